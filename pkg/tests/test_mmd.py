import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctst.errors import TooFewPointsError
from ctst.kernels import gaussian_kernel
from ctst.mmd import mmd_node, mmd_statistic


def test_two_point_hand_evaluation():
    a, b, sigma = 0.0, 1.3, 0.9
    k = gaussian_kernel(a, b, sigma)
    # within-sample terms are k(a, b) each; the cross mean is (1 + k + k + 1) / 4
    expected = k + k - 2 * (2 + 2 * k) / 4
    assert mmd_statistic([a, b], [a, b], sigma) == pytest.approx(expected, rel=1e-14)
    assert expected == pytest.approx(-(1 - k))


def test_too_few_points():
    with pytest.raises(TooFewPointsError):
        mmd_statistic([0.0], [0.0, 1.0], 1.0)


def test_separated_clusters():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2)) * 0.1
    Y = rng.normal(size=(30, 2)) * 0.1 + 100
    sigma = 1.0
    val = mmd_statistic(X, Y, sigma)
    within = lambda A: (np.exp(-((A[:, None] - A[None]) ** 2).sum(-1) / 2).sum() - len(A)) / (len(A) * (len(A) - 1))  # noqa: E731
    assert val == pytest.approx(within(X) + within(Y), rel=1e-12)
    assert val > 1.5


def test_identical_large_samples_near_zero():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(400, 1))
    assert abs(mmd_statistic(X, X, 1.0)) < 0.01


@given(st.integers(0, 10_000))
def test_exact_symmetry_and_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(11, 2)), rng.normal(size=(7, 2)) + 0.3
    s = mmd_statistic(X, Y, 0.8)
    assert s == mmd_statistic(Y, X, 0.8)
    assert s == pytest.approx(mmd_statistic(X[rng.permutation(11)], Y[rng.permutation(7)], 0.8), abs=1e-15)


def test_unbiased_under_null():
    rng = np.random.default_rng(2)
    vals = [mmd_statistic(rng.normal(size=(20, 1)), rng.normal(size=(20, 1)), 1.0) for _ in range(400)]
    se = np.std(vals) / math.sqrt(len(vals))
    assert abs(np.mean(vals)) < 4 * se


def test_node_helper_uses_pooled_median():
    X, Y = np.array([[0.0], [1.0]]), np.array([[3.0], [4.0]])
    out = mmd_node(X, Y)
    # pooled distances {1, 3, 4, 2, 3, 1}: median 2.5
    assert out.sigma_used == 2.5
    assert out.value == mmd_statistic(X, Y, 2.5)
