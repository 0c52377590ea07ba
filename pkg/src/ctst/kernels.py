"""Gaussian kernel, median heuristic, anchor selection and the Nystrom feature map.

The kernel convention is ``k(x, y) = exp(-||x - y||^2 / (2 sigma^2))`` everywhere
in the package (estimators, model selection and MMD alike).
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import (
    AllPointsIdenticalError,
    DimensionMismatchError,
    DuplicateAnchorsError,
    EmptyDataError,
    NonFiniteKernelMatrixError,
    TooFewPointsError,
)

DEFAULT_EIGEN_FLOOR = 1e-9
DEFAULT_ANCHORS_MAX = 256


def as_points(x) -> np.ndarray:
    """Coerce to a 2-d ``(m, d)`` float array; 1-d input is read as m scalars."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1, 1)
    if x.ndim == 1:
        return x.reshape(-1, 1)
    return x


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0 or not np.isfinite(sigma):
        raise ValueError(f"sigma must be positive and finite, got {sigma}")
    return sigma


def gaussian_kernel(x, y, sigma: float) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DimensionMismatchError(f"point shapes differ: {x.shape} vs {y.shape}")
    sigma = _check_sigma(sigma)
    return float(np.exp(-np.sum((x - y) ** 2) / (2.0 * sigma**2)))


def kernel_matrix(A, B, sigma: float) -> np.ndarray:
    """Gram matrix ``K[i, j] = k(A[i], B[j])``."""
    A, B = as_points(A), as_points(B)
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(f"dimensions differ: {A.shape[1]} vs {B.shape[1]}")
    sigma = _check_sigma(sigma)
    return np.exp(-cdist(A, B, "sqeuclidean") / (2.0 * sigma**2))


def median_heuristic(points) -> float:
    """Median of the pairwise Euclidean distances between ``points``."""
    pts = as_points(points)
    if pts.shape[0] < 2:
        raise TooFewPointsError("median heuristic needs at least two points")
    dists = pdist(pts)
    if not np.any(dists > 0):
        raise AllPointsIdenticalError("all points coincide")
    med = float(np.median(dists))
    if med <= 0:
        # more than half of the pairs are duplicates; fall back to the positive part
        med = float(np.median(dists[dists > 0]))
    return med


def select_anchors(pooled_data, L_max: int = DEFAULT_ANCHORS_MAX, seed=0) -> np.ndarray:
    """Uniformly subsample at most ``L_max`` distinct points from ``pooled_data``.

    Duplicated rows are removed first, so the returned anchors are pairwise
    distinct. The draw is deterministic for a given ``seed`` (an int or a
    :class:`numpy.random.SeedSequence`).
    """
    pts = as_points(pooled_data)
    if pts.shape[0] == 0:
        raise EmptyDataError("cannot select anchors from empty data")
    if L_max < 1:
        raise ValueError("L_max must be at least 1")
    distinct = np.unique(pts, axis=0)
    if distinct.shape[0] <= L_max:
        return distinct
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(distinct.shape[0], size=L_max, replace=False))
    return distinct[idx]


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Nystrom map ``psi(x) = K_anchors^{-1/2} (k(x, a_1), ..., k(x, a_L))``."""

    anchors: np.ndarray
    sigma: float
    whitener: np.ndarray
    eigen_floor: float = DEFAULT_EIGEN_FLOOR
    identifier: str = field(default="", compare=False)

    @property
    def dim(self) -> int:
        return self.anchors.shape[0]

    @property
    def input_dim(self) -> int:
        return self.anchors.shape[1]

    def transform(self, X) -> np.ndarray:
        """Rows of ``psi`` for every row of ``X``; output shape ``(m, L)``."""
        X = as_points(X)
        if X.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"points have dimension {X.shape[1]}, anchors have {self.input_dim}"
            )
        return kernel_matrix(X, self.anchors, self.sigma) @ self.whitener

    def to_dict(self) -> dict:
        return {
            "anchors": self.anchors.tolist(),
            "sigma": self.sigma,
            "whitener": self.whitener.tolist(),
            "eigen_floor": self.eigen_floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureMap":
        anchors = np.asarray(d["anchors"], dtype=float)
        whitener = np.asarray(d["whitener"], dtype=float)
        return cls(anchors, float(d["sigma"]), whitener, float(d["eigen_floor"]),
                   _fingerprint(anchors, float(d["sigma"])))


def _fingerprint(anchors: np.ndarray, sigma: float) -> str:
    h = hashlib.sha1(np.ascontiguousarray(anchors).tobytes())
    h.update(np.float64(sigma).tobytes())
    return h.hexdigest()[:16]


def build_feature_map(anchors, sigma: float, eigen_floor: float = DEFAULT_EIGEN_FLOOR) -> FeatureMap:
    """Whitening transform from the eigendecomposition of the anchor Gram matrix.

    Eigenvalues below ``eigen_floor * lambda_max`` are raised to that floor
    before taking the inverse square root.
    """
    anchors = as_points(anchors)
    if anchors.shape[0] < 1:
        raise EmptyDataError("at least one anchor is required")
    if np.unique(anchors, axis=0).shape[0] != anchors.shape[0]:
        raise DuplicateAnchorsError("anchor points must be pairwise distinct")
    sigma = _check_sigma(sigma)
    K = kernel_matrix(anchors, anchors, sigma)
    if not np.all(np.isfinite(K)):
        raise NonFiniteKernelMatrixError("anchor kernel matrix has non-finite entries")
    evals, U = np.linalg.eigh(K)
    floor = eigen_floor * max(float(evals[-1]), np.finfo(float).tiny)
    evals = np.maximum(evals, floor)
    W = (U / np.sqrt(evals)) @ U.T
    W = 0.5 * (W + W.T)
    if not np.all(np.isfinite(W)):
        raise NonFiniteKernelMatrixError("whitener has non-finite entries")
    anchors = anchors.copy()
    anchors.flags.writeable = False
    W.flags.writeable = False
    return FeatureMap(anchors, sigma, W, float(eigen_floor), _fingerprint(anchors, sigma))


def apply_feature_map(fm: FeatureMap, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1:
        raise DimensionMismatchError("apply_feature_map expects a single point")
    return fm.transform(x.reshape(1, -1))[0]
