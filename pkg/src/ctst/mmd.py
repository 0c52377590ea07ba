"""Per-node maximum mean discrepancy with a median-heuristic width."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TooFewPointsError
from .kernels import as_points, kernel_matrix, median_heuristic


@dataclass(frozen=True)
class MmdStat:
    value: float
    sigma_used: float


def mmd_statistic(X, X_prime, sigma: float) -> float:
    """Unbiased squared-MMD estimate with a Gaussian kernel.

    Mean of ``k`` over distinct pairs within each sample minus twice the mean
    over all cross pairs. The estimate can be negative.
    """
    X, X_prime = as_points(X), as_points(X_prime)
    n, m = X.shape[0], X_prime.shape[0]
    if n < 2 or m < 2:
        raise TooFewPointsError("each sample needs at least two points")
    Kxx = kernel_matrix(X, X, sigma)
    Kyy = kernel_matrix(X_prime, X_prime, sigma)
    Kxy = kernel_matrix(X, X_prime, sigma)
    # exp(0) = 1 on the diagonal; fsum makes the result independent of
    # summation order, so swapping the samples gives the identical value
    sxx = (math.fsum(Kxx.ravel()) - n) / (n * (n - 1))
    syy = (math.fsum(Kyy.ravel()) - m) / (m * (m - 1))
    sxy = math.fsum(Kxy.ravel()) / (n * m)
    return float(sxx + syy - 2.0 * sxy)


def mmd_node(X_v, X_prime_v, sigma: float | None = None) -> MmdStat:
    """MMD at one node; ``sigma`` defaults to the median heuristic of the pooled sample."""
    if sigma is None:
        sigma = median_heuristic(np.concatenate([as_points(X_v), as_points(X_prime_v)]))
    return MmdStat(mmd_statistic(X_v, X_prime_v, sigma), float(sigma))
