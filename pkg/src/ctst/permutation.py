"""Max-statistic permutation tests over all nodes of a graph."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyListError,
    InputError,
    InvalidPermutationError,
    InvalidRateError,
    NodeCountMismatchError,
    UnknownMethodError,
)
from .estimators import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    grulsif_fit,
    node_features,
    pe_statistics,
    rulsif_centers,
    rulsif_fit_node,
    stats_from_features,
)
from .graph import Graph
from .kernels import (
    DEFAULT_ANCHORS_MAX,
    DEFAULT_EIGEN_FLOOR,
    build_feature_map,
    median_heuristic,
    select_anchors,
)
from .mmd import mmd_statistic
from .samples import NodeSampleSet
from .selection import HyperGrid, cv_select, default_grid_grulsif, default_grid_pool, loocv_select_rulsif

# stream tags mixed into the seed so that each consumer draws independently
STREAM_ANCHORS = 0
STREAM_CV = 1
STREAM_PERM = 2
STREAM_BASELINE = 3
STREAM_REFERENCE = 4

SELECTIONS = ("pooled", "observed")


def seed_sequence(seed: int, *tags: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *map(int, tags)])


def generator(seed: int, *tags: int) -> np.random.Generator:
    """Counter-based generator keyed on ``(seed, *tags)``."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *tags)))


@dataclass(frozen=True)
class TestConfig:
    """Fitting settings shared by the GRULSIF and POOL tests.

    ``grid`` overrides the default selection grid; ``n_jobs`` > 1 spreads
    permutation replicates over worker processes.

    ``selection`` decides which arrangement of the pooled columns the
    hyperparameter search sees. ``"observed"`` uses the observed split.
    ``"pooled"`` uses a seed-derived uniform rearrangement of the columns,
    which carries no information about the observed labels, so the
    statistic is a fixed function of the pooled data and the permutation
    law is exact.
    """

    __test__ = False

    anchors_max: int = DEFAULT_ANCHORS_MAX
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    folds: int = 5
    eigen_floor: float = DEFAULT_EIGEN_FLOOR
    solver: str = "pcg"
    grid: HyperGrid | None = None
    n_jobs: int = 1
    selection: str = "pooled"

    def __post_init__(self):
        if self.selection not in SELECTIONS:
            raise InputError(f"unknown selection {self.selection!r}; expected one of {SELECTIONS}")

    def to_dict(self) -> dict:
        keys = ("anchors_max", "tol", "max_iter", "folds", "eigen_floor", "solver", "n_jobs", "selection")
        d = {k: getattr(self, k) for k in keys}
        d["grid"] = None if self.grid is None else self.grid.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TestConfig":
        d = dict(d)
        if d.get("grid") is not None:
            d["grid"] = HyperGrid.from_dict(d["grid"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class TestResult:
    """Outcome of a permutation test.

    For symmetric statistics ``stats_rev`` and ``pvalues_rev`` are ``None`` and
    ``perm_max_reverse`` is empty.
    """

    __test__ = False

    stats: np.ndarray
    stats_rev: np.ndarray | None
    pvalues: np.ndarray
    pvalues_rev: np.ndarray | None
    perm_max_forward: np.ndarray
    perm_max_reverse: np.ndarray
    rejected: tuple
    pi_star: float
    n_perm: int
    seed: int
    method: str = "ctst"
    metadata: dict = field(default_factory=dict)

    @property
    def num_nodes(self) -> int:
        return len(self.stats)

    def to_dict(self) -> dict:
        rej = set(self.rejected)
        nodes = []
        for v in range(self.num_nodes):
            nodes.append(
                {
                    "node": v,
                    "S": float(self.stats[v]),
                    "S_rev": None if self.stats_rev is None else float(self.stats_rev[v]),
                    "pi": float(self.pvalues[v]),
                    "pi_rev": None if self.pvalues_rev is None else float(self.pvalues_rev[v]),
                    "rejected": v in rej,
                }
            )
        return {
            "method": self.method,
            "seed": self.seed,
            "n_perm": self.n_perm,
            "pi_star": self.pi_star,
            "nodes": nodes,
            "rejected": sorted(rej),
            "perm_max_forward": [float(x) for x in self.perm_max_forward],
            "perm_max_reverse": [float(x) for x in self.perm_max_reverse],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestResult":
        nodes = sorted(d["nodes"], key=lambda r: r["node"])
        sym = all(r["S_rev"] is None for r in nodes)
        col = lambda key: np.array([r[key] for r in nodes], dtype=float)  # noqa: E731
        return cls(
            stats=col("S"),
            stats_rev=None if sym else col("S_rev"),
            pvalues=col("pi"),
            pvalues_rev=None if sym else col("pi_rev"),
            perm_max_forward=np.asarray(d["perm_max_forward"], dtype=float),
            perm_max_reverse=np.asarray(d["perm_max_reverse"], dtype=float),
            rejected=tuple(int(v) for v in d["rejected"]),
            pi_star=float(d["pi_star"]),
            n_perm=int(d["n_perm"]),
            seed=int(d["seed"]),
            method=d.get("method", "ctst"),
            metadata=d.get("metadata", {}),
        )


# ---------------------------------------------------------------------------
# permutations


def permute_columns(samples: NodeSampleSet, tau) -> NodeSampleSet:
    """Reorder the pooled cross-node columns by ``tau``.

    Column ``j`` stacks the ``j``-th observation of every node (the first
    ``n`` columns come from ``X``). After reordering the first ``n`` columns
    form the new ``X`` and the rest the new ``X'``; every node moves together.
    """
    n, n_prime = samples.n, samples.n_prime
    tau = np.asarray(tau)
    m = n + n_prime
    if tau.shape != (m,) or not np.issubdtype(tau.dtype, np.integer):
        raise InvalidPermutationError(f"tau must be an integer vector of length {m}")
    if not np.array_equal(np.sort(tau), np.arange(m)):
        raise InvalidPermutationError("tau is not a bijection on the pooled column indices")
    Z = samples.columns()[:, tau]
    return NodeSampleSet(Z[:, :n], Z[:, n:])


def replicate_permutation(m: int, seed: int, index: int) -> np.ndarray:
    """The ``index``-th random permutation of ``range(m)`` for a run seed."""
    return generator(seed, STREAM_PERM, index).permutation(m)


def empirical_quantile(perm_max, level: float) -> float:
    """``sup{s : F(s) <= level}`` for the empirical CDF ``F`` of ``perm_max``.

    This is the right-continuous inverse: for ``{1, 2, 3, 4}`` at level 0.5
    the CDF stays at 0.5 on ``[2, 3)``, so the supremum is 3.
    """
    x = np.sort(np.asarray(perm_max, dtype=float).ravel())
    if x.size == 0:
        raise EmptyListError("perm_max is empty")
    if not 0 < level < 1:
        if level == 1:
            return float(x[-1])
        raise InvalidRateError("level must lie in (0, 1]")
    k = math.floor(level * x.size + 1e-9)
    return float(x[min(k, x.size - 1)])


def pvalues_from_max(S: np.ndarray, perm_max: np.ndarray) -> np.ndarray:
    """Fraction of permuted maxima at or above each observed statistic."""
    S = np.asarray(S, dtype=float)
    perm_max = np.asarray(perm_max, dtype=float)
    return (S[:, None] <= perm_max[None, :]).mean(axis=1)


def rejection_set(pvalues, pvalues_rev, threshold: float, strict: bool) -> tuple:
    cmp = np.less if strict else np.less_equal
    hit = cmp(pvalues, threshold)
    if pvalues_rev is not None:
        hit = hit | cmp(pvalues_rev, threshold)
    return tuple(int(v) for v in np.flatnonzero(hit))


def _check_rates(n_perm: int, pi_star: float) -> None:
    if int(n_perm) < 1:
        raise InvalidRateError("n_perm must be at least 1")
    if not 0 < pi_star < 1:
        raise InvalidRateError("pi_star must lie in (0, 1)")


def _as_pair(out):
    if isinstance(out, tuple):
        S, S_rev = out
        return np.asarray(S, dtype=float), None if S_rev is None else np.asarray(S_rev, dtype=float)
    return np.asarray(out, dtype=float), None


def _replicate_maxima(stat_fn, samples, seed, indices):
    m = samples.n + samples.n_prime
    out = []
    for i in indices:
        S, S_rev = _as_pair(stat_fn(permute_columns(samples, replicate_permutation(m, seed, i))))
        out.append((float(np.max(S)), None if S_rev is None else float(np.max(S_rev))))
    return out


def permutation_maxima(stat_fn, samples: NodeSampleSet, n_perm: int, seed: int, n_jobs: int = 1):
    """Max statistics of ``stat_fn`` over ``n_perm`` seeded column permutations.

    Replicate ``i`` uses a permutation keyed on ``(seed, i)`` only, so the
    result does not depend on ``n_jobs``.
    """
    indices = list(range(int(n_perm)))
    if n_jobs == 1 or n_perm < 2:
        pairs = _replicate_maxima(stat_fn, samples, seed, indices)
    else:
        from joblib import Parallel, delayed

        n_workers = n_jobs if n_jobs > 0 else max(1, os.cpu_count() or 1)
        chunks = [c for c in np.array_split(indices, n_workers) if len(c)]
        parts = Parallel(n_jobs=n_workers)(
            delayed(_replicate_maxima)(stat_fn, samples, seed, c.tolist()) for c in chunks
        )
        pairs = [p for part in parts for p in part]
    fwd = np.array([p[0] for p in pairs])
    rev = np.array([] if pairs and pairs[0][1] is None else [p[1] for p in pairs], dtype=float)
    return fwd, rev


def max_statistic_test(
    samples: NodeSampleSet,
    stat_fn,
    n_perm: int,
    pi_star: float,
    seed: int,
    *,
    strict: bool,
    method: str,
    n_jobs: int = 1,
    metadata: dict | None = None,
) -> TestResult:
    """Shared engine: observed statistics, permuted maxima, pi-values, rejections.

    ``stat_fn(samples)`` returns either one vector of node statistics
    (symmetric, threshold ``pi_star``) or a forward/reverse pair (threshold
    ``pi_star / 2`` on each direction).
    """
    _check_rates(n_perm, pi_star)
    S, S_rev = _as_pair(stat_fn(samples))
    fwd, rev = permutation_maxima(stat_fn, samples, n_perm, seed, n_jobs)
    pv = pvalues_from_max(S, fwd)
    if S_rev is None:
        pv_rev, threshold = None, pi_star
    else:
        pv_rev, threshold = pvalues_from_max(S_rev, rev), pi_star / 2
    return TestResult(
        stats=S,
        stats_rev=S_rev,
        pvalues=pv,
        pvalues_rev=pv_rev,
        perm_max_forward=fwd,
        perm_max_reverse=rev,
        rejected=rejection_set(pv, pv_rev, threshold, strict),
        pi_star=float(pi_star),
        n_perm=int(n_perm),
        seed=int(seed),
        method=method,
        metadata=metadata or {},
    )


# ---------------------------------------------------------------------------
# node statistics with parameters frozen on the observed data


class GrulsifStatistic:
    """Collaborative PE statistics in both directions.

    Anchors come from the pooled observed data and hyperparameters are picked
    by cross-validation for each direction, on the arrangement chosen by
    ``config.selection``. Both stay fixed when the statistic is re-evaluated
    on permuted samples. With ``pool=True`` the graph is replaced by an
    edgeless one and lambda is 1.
    """

    def __init__(self, g: Graph, samples: NodeSampleSet, alpha: float, config: TestConfig, seed: int, pool: bool = False):
        self.alpha = float(alpha)
        self.config = config
        self.pool = pool
        self.graph = Graph(g.num_nodes) if pool else g
        if g.num_nodes != samples.num_nodes:
            raise NodeCountMismatchError(
                f"graph has {g.num_nodes} nodes but samples cover {samples.num_nodes}"
            )
        self.anchors = select_anchors(samples.pooled(), config.anchors_max, seed_sequence(seed, STREAM_ANCHORS))
        if config.selection == "pooled":
            tau = generator(seed, STREAM_REFERENCE).permutation(samples.n + samples.n_prime)
            reference = permute_columns(samples, tau)
        else:
            reference = samples
        self.cv = []
        self.maps = []
        self.theta = []
        for direction, data in enumerate((reference, reference.swapped())):
            grid = self._grid(data)
            cv = cv_select(
                self.graph,
                data,
                grid,
                self.alpha,
                config.folds,
                seed_sequence(seed, STREAM_CV, direction),
                anchors=self.anchors,
                eigen_floor=config.eigen_floor,
                tol=config.tol,
                max_iter=config.max_iter,
                solver=config.solver,
            )
            self.cv.append(cv)
            self.maps.append(build_feature_map(self.anchors, cv.best.sigma, config.eigen_floor))
            self.theta.append(None)
        self.fits = [None, None]
        self.observed = self._evaluate(samples, record=True)

    def _grid(self, data: NodeSampleSet) -> HyperGrid:
        grid = self.config.grid
        if self.pool:
            base = default_grid_pool(data) if grid is None else grid
            return HyperGrid(base.sigmas, base.gammas, (1.0,))
        return default_grid_grulsif(self.graph, data) if grid is None else grid

    @property
    def hyperparams(self) -> tuple:
        return tuple(cv.best for cv in self.cv)

    def _evaluate(self, samples: NodeSampleSet, record: bool = False):
        out = []
        for direction, data in enumerate((samples, samples.swapped())):
            fm = self.maps[direction]
            st = stats_from_features(node_features(fm, data.X), node_features(fm, data.X_prime))
            fit = grulsif_fit(
                self.graph,
                st,
                self.cv[direction].best,
                self.config.tol,
                self.config.max_iter,
                solver=self.config.solver,
                theta0=self.theta[direction],
                feature_map_id=fm.identifier,
            )
            if record:
                # observed solution seeds the permuted fits
                self.theta[direction] = fit.theta
                self.fits[direction] = fit
            out.append(pe_statistics(fit.theta, st, self.alpha))
        return out[0], out[1]

    def __call__(self, samples: NodeSampleSet):
        return self._evaluate(samples)

    def metadata(self) -> dict:
        return {
            "hyperparams": [hp.to_dict() for hp in self.hyperparams],
            "anchors": int(self.anchors.shape[0]),
            "selection": self.config.selection,
            "objective": [f.final_objective for f in self.fits],
            "converged": [bool(f.converged) for f in self.fits],
            "iterations": [int(f.iterations) for f in self.fits],
        }


class RulsifStatistic:
    """Independent per-node relative ratio fits in both directions.

    Width and ridge are chosen per node and direction by leave-one-out on the
    observed data; kernel centers are drawn from the observed numerator
    sample. ``alpha = 0`` gives the uLSIF baseline.
    """

    def __init__(self, samples: NodeSampleSet, alpha: float, seed: int, L_v: int = 100):
        self.alpha = float(alpha)
        self.L_v = L_v
        self.params = [[], []]
        self.centers = [[], []]
        for direction, data in enumerate((samples, samples.swapped())):
            for v in range(samples.num_nodes):
                ss = seed_sequence(seed, STREAM_BASELINE, direction, v)
                self.params[direction].append(loocv_select_rulsif(data.X[v], data.X_prime[v], self.alpha, ss, L_v))
                self.centers[direction].append(rulsif_centers(data.X_prime[v], L_v, ss))

    def __call__(self, samples: NodeSampleSet):
        out = []
        for direction, data in enumerate((samples, samples.swapped())):
            S = np.empty(samples.num_nodes)
            for v in range(samples.num_nodes):
                hp = self.params[direction][v]
                fit = rulsif_fit_node(
                    data.X[v], data.X_prime[v], self.alpha, hp.sigma, hp.gamma, centers=self.centers[direction][v]
                )
                S[v] = fit.statistic(data.X[v], data.X_prime[v])
            out.append(S)
        return out[0], out[1]

    def metadata(self) -> dict:
        return {
            "hyperparams": [[{"sigma": hp.sigma, "gamma": hp.gamma} for hp in ps] for ps in self.params]
        }


class MmdStatistic:
    """Per-node unbiased MMD with widths fixed from the pooled observed data."""

    def __init__(self, samples: NodeSampleSet):
        cols = samples.columns()
        self.sigmas = np.array([median_heuristic(cols[v]) for v in range(samples.num_nodes)])

    def __call__(self, samples: NodeSampleSet):
        return np.array(
            [mmd_statistic(samples.X[v], samples.X_prime[v], self.sigmas[v]) for v in range(samples.num_nodes)]
        )

    def metadata(self) -> dict:
        return {"sigmas": [float(s) for s in self.sigmas]}


# ---------------------------------------------------------------------------
# public tests


def ctst_test(
    g: Graph,
    samples: NodeSampleSet,
    alpha: float = 0.1,
    n_perm: int = 500,
    pi_star: float = 0.05,
    config: TestConfig | None = None,
    seed: int = 0,
    *,
    pool: bool = False,
) -> TestResult:
    """Collaborative two-sample test with weak family-wise error control.

    A node is rejected when either directional pi-value is at most
    ``pi_star / 2``. ``pool=True`` runs the same procedure without the graph.
    """
    config = config or TestConfig()
    _check_rates(n_perm, pi_star)
    stat = GrulsifStatistic(g, samples, alpha, config, seed, pool=pool)
    return max_statistic_test(
        samples,
        stat,
        n_perm,
        pi_star,
        seed,
        strict=False,
        method="pool" if pool else "ctst",
        n_jobs=config.n_jobs,
        metadata=stat.metadata(),
    )


def pool_test(g: Graph, samples: NodeSampleSet, alpha: float = 0.1, n_perm: int = 500, pi_star: float = 0.05, config=None, seed: int = 0) -> TestResult:
    return ctst_test(g, samples, alpha, n_perm, pi_star, config, seed, pool=True)


def baseline_max_test(
    g: Graph,
    samples: NodeSampleSet,
    node_stat_fn,
    symmetric: bool,
    n_perm: int = 500,
    pi_star: float = 0.05,
    seed: int = 0,
    *,
    method: str = "baseline",
    n_jobs: int = 1,
) -> TestResult:
    """Max-statistic test for independent node statistics.

    Rejections use strict inequalities: ``pi < pi_star`` for a symmetric
    statistic, ``pi < pi_star / 2`` in either direction otherwise. The graph
    only fixes the node count.
    """
    if g.num_nodes != samples.num_nodes:
        raise NodeCountMismatchError(f"graph has {g.num_nodes} nodes but samples cover {samples.num_nodes}")

    def fn(s):
        out = node_stat_fn(s)
        if symmetric:
            return out[0] if isinstance(out, tuple) else out
        if not isinstance(out, tuple):
            raise ValueError("a directional statistic must return a (forward, reverse) pair")
        return out

    meta = node_stat_fn.metadata() if hasattr(node_stat_fn, "metadata") else {}
    return max_statistic_test(
        samples, fn, n_perm, pi_star, seed, strict=True, method=method, n_jobs=n_jobs, metadata=meta
    )


def run_method(
    method: str,
    g: Graph,
    samples: NodeSampleSet,
    alpha: float = 0.1,
    n_perm: int = 500,
    pi_star: float = 0.05,
    config: TestConfig | None = None,
    seed: int = 0,
) -> TestResult:
    """Dispatch on method name: ctst, pool, rulsif, ulsif or mmd_median."""
    config = config or TestConfig()
    if method == "ctst":
        return ctst_test(g, samples, alpha, n_perm, pi_star, config, seed)
    if method == "pool":
        return pool_test(g, samples, alpha, n_perm, pi_star, config, seed)
    if method in ("rulsif", "ulsif"):
        a = alpha if method == "rulsif" else 0.0
        return baseline_max_test(
            g, samples, RulsifStatistic(samples, a, seed), False, n_perm, pi_star, seed, method=method, n_jobs=config.n_jobs
        )
    if method == "mmd_median":
        return baseline_max_test(
            g, samples, MmdStatistic(samples), True, n_perm, pi_star, seed, method=method, n_jobs=config.n_jobs
        )
    raise UnknownMethodError(f"unknown method {method!r}")


METHODS = ("ctst", "pool", "rulsif", "ulsif", "mmd_median")
