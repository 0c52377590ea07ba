"""Station graphs, space-time multiplex graphs and waveform preprocessing."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal
from scipy.ndimage import uniform_filter1d

from .errors import (
    DuplicateCoordinatesError,
    InputError,
    SamplingRateTooLowError,
    SeriesTooShortError,
    TooFewStationsError,
    ZeroVarianceError,
)
from .graph import Graph
from .samples import NodeSampleSet

EARTH_RADIUS_KM = 6371.0088
BAND_HZ = (2.0, 16.0)
FILTER_ORDER = 4
ENVELOPE_SECONDS = 0.5
MIN_SERIES_LEN = 32


@dataclass(frozen=True, eq=False)
class StationSet:
    """Station ids, ``(lat, lon)`` in degrees and optional series of shape ``(N, T, d)``."""

    ids: tuple
    coords: np.ndarray
    series: np.ndarray | None = None
    fs: float | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        if coords.shape[0] != len(self.ids):
            raise InputError("one coordinate pair per station id is required")
        if np.any(np.abs(coords[:, 0]) > 90) or np.any(np.abs(coords[:, 1]) > 180):
            raise InputError("latitude must lie in [-90, 90] and longitude in [-180, 180]")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "coords", coords)
        if self.series is not None:
            s = np.asarray(self.series, dtype=float)
            if s.ndim == 2:
                s = s[..., None]
            if s.ndim != 3 or s.shape[0] != len(self.ids):
                raise InputError("series must have shape (stations, samples, channels)")
            object.__setattr__(self, "series", s)

    @property
    def num_stations(self) -> int:
        return len(self.ids)

    def complete(self, start: int = 0, stop: int | None = None) -> "StationSet":
        """Drop stations with a missing (non-finite) value in ``series[:, start:stop]``."""
        if self.series is None:
            return self
        ok = np.all(np.isfinite(self.series[:, start:stop]), axis=(1, 2))
        return StationSet(
            tuple(i for i, k in zip(self.ids, ok) if k), self.coords[ok], self.series[ok], self.fs
        )


def haversine_matrix(coords) -> np.ndarray:
    """Great-circle distances in km between ``(lat, lon)`` rows given in degrees."""
    rad = np.radians(np.asarray(coords, dtype=float))
    lat, lon = rad[:, 0], rad[:, 1]
    dlat = lat[:, None] - lat[None, :]
    dlon = lon[:, None] - lon[None, :]
    a = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def knn_spatial_graph(stations, k: int = 3) -> Graph:
    """Union-symmetrized k-nearest-neighbour graph with unit weights.

    ``stations`` is a :class:`StationSet` or an array of ``(lat, lon)`` rows.
    """
    coords = stations.coords if isinstance(stations, StationSet) else np.asarray(stations, dtype=float).reshape(-1, 2)
    N = coords.shape[0]
    if k < 1:
        raise InputError("k must be positive")
    if N < k + 1:
        raise TooFewStationsError(f"{k}-nearest neighbours need at least {k + 1} stations, got {N}")
    if np.unique(coords, axis=0).shape[0] != N:
        raise DuplicateCoordinatesError("two stations share the same coordinates")
    D = haversine_matrix(coords)
    np.fill_diagonal(D, np.inf)
    nn = np.argsort(D, axis=1, kind="stable")[:, :k]
    edges = {(min(u, int(v)), max(u, int(v))) for u in range(N) for v in nn[u]}
    return Graph(N, sorted(edges))


@dataclass(frozen=True, eq=False)
class MultiplexGraph:
    """Space-time product graph; node ``v * num_windows + t`` is station ``v`` in window ``t``."""

    base: Graph
    num_windows: int
    graph: Graph

    def node(self, v: int, t: int) -> int:
        return v * self.num_windows + t

    def split(self, node: int) -> tuple[int, int]:
        return divmod(int(node), self.num_windows)


def build_multiplex(base: Graph, num_windows: int) -> MultiplexGraph:
    """Spatial edges copied into every window plus temporal edges between a
    station's consecutive windows."""
    T = int(num_windows)
    if T < 1:
        raise InputError("num_windows must be at least 1")
    edges = []
    for u, v, _ in base.edges:
        edges.extend((u * T + t, v * T + t) for t in range(T))
    for v in range(base.num_nodes):
        edges.extend((v * T + t, v * T + t + 1) for t in range(T - 1))
    return MultiplexGraph(base, T, Graph(base.num_nodes * T, edges))


def segment_windows(series, event_index: int, num_windows: int = 10, window_len: int = 100) -> NodeSampleSet:
    """Pre/post-event windows as samples over the multiplex node set.

    ``series`` has shape ``(N, T, d)`` (or ``(N, T)``). Window ``t`` of station
    ``v`` gives node ``v * num_windows + t``: its ``X`` is the ``t``-th block of
    ``window_len`` samples starting ``num_windows * window_len`` samples before
    the event, and its ``X'`` the ``t``-th block starting at the event.
    """
    s = np.asarray(series, dtype=float)
    if s.ndim == 2:
        s = s[..., None]
    span = num_windows * window_len
    if event_index < span or s.shape[1] - event_index < span:
        raise SeriesTooShortError(
            f"need {span} samples on both sides of the event at index {event_index}; series has {s.shape[1]}"
        )
    N, d = s.shape[0], s.shape[2]
    pre = s[:, event_index - span : event_index].reshape(N * num_windows, window_len, d)
    post = s[:, event_index : event_index + span].reshape(N * num_windows, window_len, d)
    return NodeSampleSet(pre, post)


def ar1_residuals(x) -> np.ndarray:
    """Residuals of a least-squares AR(1) fit without intercept on the demeaned series.

    The first residual is the first demeaned value, so the length is kept.
    """
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    den = x[:-1] @ x[:-1]
    phi = (x[1:] @ x[:-1]) / den if den > 0 else 0.0
    e = np.empty_like(x)
    e[0] = x[0]
    e[1:] = x[1:] - phi * x[:-1]
    return e


def rms_envelope(x, window: int) -> np.ndarray:
    """Centred moving RMS with reflected edges."""
    return np.sqrt(np.maximum(uniform_filter1d(np.asarray(x, dtype=float) ** 2, size=window, mode="reflect"), 0.0))


def bandpass(x, fs: float, band=BAND_HZ, order: int = FILTER_ORDER) -> np.ndarray:
    """Zero-phase Butterworth band-pass."""
    sos = signal.butter(order, band, btype="bandpass", fs=fs, output="sos")
    return signal.sosfiltfilt(sos, x)


def preprocess_channel(x, fs: float) -> np.ndarray:
    """Detrend, band-pass, RMS envelope, AR(1) residuals, standardize, scale to max 1."""
    x = np.asarray(x, dtype=float).ravel()
    if not fs > 2 * BAND_HZ[1]:
        raise SamplingRateTooLowError(f"sampling rate {fs} Hz must exceed {2 * BAND_HZ[1]} Hz")
    if x.size < MIN_SERIES_LEN:
        raise SeriesTooShortError(f"need at least {MIN_SERIES_LEN} samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InputError("series contains non-finite values")
    y = signal.detrend(x, type="linear")
    scale = np.max(np.abs(x))
    if not np.std(y) > 1e-12 * scale:
        raise ZeroVarianceError("series is constant or linear after detrending")
    y = bandpass(y, fs)
    y = rms_envelope(y, max(1, int(round(ENVELOPE_SECONDS * fs))))
    y = ar1_residuals(y)
    sd = np.std(y)
    if not sd > 0:
        raise ZeroVarianceError("residual series has zero variance")
    z = (y - y.mean()) / sd
    return z / np.max(np.abs(z))


def preprocess_station(series, fs: float) -> np.ndarray:
    """Channel-wise :func:`preprocess_channel` on a ``(T, d)`` array."""
    s = np.asarray(series, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    return np.column_stack([preprocess_channel(s[:, c], fs) for c in range(s.shape[1])])


def resample(series, fs: float, target_fs: float, axis: int = 0) -> np.ndarray:
    """Polyphase rational resampling from ``fs`` to ``target_fs``."""
    ratio = Fraction(target_fs / fs).limit_denominator(1000)
    return signal.resample_poly(series, ratio.numerator, ratio.denominator, axis=axis)
