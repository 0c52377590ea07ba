"""Run configuration, file formats and JSON emission."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import InputError, InvalidRateError, ParseError, UnknownMethodError
from .estimators import DEFAULT_MAX_ITER, DEFAULT_TOL, SOLVERS
from .graph import Graph
from .kernels import DEFAULT_ANCHORS_MAX, DEFAULT_EIGEN_FLOOR
from .permutation import METHODS, SELECTIONS, TestConfig, TestResult
from .samples import NodeSampleSet
from .selection import HyperGrid

FLOAT_DIGITS = 17


# ---------------------------------------------------------------------------
# JSON with fixed-precision floats


def _float_token(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    tok = format(x, f".{FLOAT_DIGITS}g")
    # keep integral values recognisable as floats
    return tok if any(c in tok for c in ".e") else tok + ".0"


def _encode(obj, indent, level, out):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = ", " if indent is None else ","
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_float_token(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(sep)
            out.append(pad + json.dumps(str(k)) + ": ")
            _encode(v, indent, level + 1, out)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if len(items) == 0:
            out.append("[]")
            return
        # numeric rows stay on one line
        flat = indent is None or all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in items)
        out.append("[")
        for i, v in enumerate(items):
            if i:
                out.append(", " if flat else sep)
            if not flat:
                out.append(pad)
            _encode(v, None if flat else indent, level + 1, out)
        out.append("]" if flat else end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int | None = 2) -> str:
    """JSON text with every float written at 17 significant digits."""
    out: list[str] = []
    _encode(obj, indent, 0, out)
    return "".join(out)


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ParseError(f"file not found: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def _parse(kind: str, path, fn):
    try:
        return fn()
    except InputError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ParseError(f"{path}: malformed {kind} ({exc})") from exc


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    alpha: float = 0.1
    n_perm: int = 500
    pi_star: float = 0.05
    seed: int = 0
    anchors_max: int = DEFAULT_ANCHORS_MAX
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    grids: HyperGrid | None = None
    method: str = "ctst"
    folds: int = 5
    eigen_floor: float = DEFAULT_EIGEN_FLOOR
    solver: str = "pcg"
    threads: int = 1
    selection: str | None = None

    def __post_init__(self):
        if not 0 <= self.alpha < 1:
            raise InvalidRateError("alpha must lie in [0, 1)")
        if not 0 < self.pi_star < 1:
            raise InvalidRateError("pi_star must lie in (0, 1)")
        if self.n_perm < 1:
            raise InvalidRateError("n_perm must be at least 1")
        if self.method not in METHODS:
            raise UnknownMethodError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.solver not in SOLVERS:
            raise InputError(f"unknown solver {self.solver!r}")
        if self.anchors_max < 1 or self.max_iter < 1 or self.folds < 2 or not self.tol > 0:
            raise InputError("anchors_max and max_iter must be positive, folds >= 2 and tol > 0")
        if self.threads < 1:
            raise InputError("threads must be at least 1")
        if self.selection is not None and self.selection not in SELECTIONS:
            raise InputError(f"unknown selection {self.selection!r}; expected one of {SELECTIONS}")

    def test_config(self, default_selection: str = "pooled") -> TestConfig:
        """Fitting settings; ``default_selection`` applies when ``selection`` is unset."""
        return TestConfig(
            anchors_max=self.anchors_max,
            tol=self.tol,
            max_iter=self.max_iter,
            folds=self.folds,
            eigen_floor=self.eigen_floor,
            solver=self.solver,
            grid=self.grids,
            n_jobs=self.threads,
            selection=self.selection or default_selection,
        )

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["grids"] = None if self.grids is None else self.grids.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ParseError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        if d.get("grids") is not None:
            d["grids"] = HyperGrid.from_dict(d["grids"])
        return cls(**d)


def load_config(path=None, **overrides) -> RunConfig:
    """Config file values, then non-``None`` keyword overrides."""
    base = {} if path is None else read_json(path)
    base.update({k: v for k, v in overrides.items() if v is not None})
    return _parse("config", path, lambda: RunConfig.from_dict(base))


# ---------------------------------------------------------------------------
# graphs and samples


def load_graph(path) -> Graph:
    d = read_json(path)
    return _parse("graph", path, lambda: Graph.from_dict(d))


def load_samples(path) -> NodeSampleSet:
    """Samples from the canonical JSON format, or the CSV format when the
    file name ends in ``.csv``."""
    if str(path).lower().endswith(".csv"):
        return read_samples_csv(path)
    d = read_json(path)
    return _parse("samples", path, lambda: NodeSampleSet.from_dict(d))


_SET_NAMES = {"x": 0, "p": 0, "0": 0, "x_prime": 1, "xp": 1, "q": 1, "1": 1}


def read_samples_csv(path) -> NodeSampleSet:
    """CSV with header ``node,set,idx,x1..xd``; ``set`` is ``X`` or ``X_prime``."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise ParseError(f"file not found: {path}") from exc
    if not rows or [c.strip().lower() for c in rows[0][:3]] != ["node", "set", "idx"]:
        raise ParseError(f"{path}: header must start with node,set,idx")
    d = len(rows[0]) - 3
    if d < 1:
        raise ParseError(f"{path}: no coordinate columns")
    entries = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != d + 3:
            raise ParseError(f"{path}:{lineno}: expected {d + 3} fields")
        try:
            node, idx = int(row[0]), int(row[2])
            which = _SET_NAMES[row[1].strip().lower()]
            vals = [float(x) for x in row[3:]]
        except (ValueError, KeyError) as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
        key = (which, node, idx)
        if key in entries:
            raise ParseError(f"{path}:{lineno}: duplicate observation {key}")
        entries[key] = vals
    if not entries:
        raise ParseError(f"{path}: no observations")
    N = max(k[1] for k in entries) + 1
    sizes = []
    arrays = []
    for which in (0, 1):
        n = max((k[2] for k in entries if k[0] == which), default=-1) + 1
        A = np.full((N, n, d), np.nan)
        for (w, v, i), vals in entries.items():
            if w == which:
                A[v, i] = vals
        if n == 0 or np.isnan(A).any():
            raise ParseError(f"{path}: every node needs observations 0..n-1 in both sets")
        sizes.append(n)
        arrays.append(A)
    return NodeSampleSet(arrays[0], arrays[1])


def write_samples_csv(path, samples: NodeSampleSet) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "set", "idx"] + [f"x{j + 1}" for j in range(samples.dim)])
        for name, A in (("X", samples.X), ("X_prime", samples.X_prime)):
            for v in range(A.shape[0]):
                for i in range(A.shape[1]):
                    w.writerow([v, name, i] + [_float_token(float(x)) for x in A[v, i]])


def load_result(path) -> TestResult:
    d = read_json(path)
    return _parse("result", path, lambda: TestResult.from_dict(d))


def write_curve_csv(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["threshold", "x", "y"])
        for p in curve:
            w.writerow([_float_token(p.threshold), _float_token(p.x), _float_token(p.y)])


def write_report_csv(path, summaries) -> None:
    summaries = list(summaries)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        keys = list(summaries[0])
        w.writerow(keys)
        for s in summaries:
            w.writerow([_float_token(v) if isinstance(v, float) else v for v in (s[k] for k in keys)])
