"""AFROC and ROC curves over benchmark instances."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabelsError, EmptyAffectedSetError, EmptyCurveError, EmptyInputError, UnknownMethodError
from .permutation import METHODS, GrulsifStatistic, MmdStatistic, RulsifStatistic, TestConfig
from .scenarios import ScenarioSpec, generate, scenario_graph

AFROC_WINDOW = 0.05
# Curves are calibrated by null instances scored with the same procedure, not
# by a permutation law, so selection may look at the observed split.
BENCH_SELECTION = "observed"


@dataclass(frozen=True)
class CurvePoint:
    x: float
    y: float
    threshold: float = float("nan")


def _count_above(sorted_vals: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    """Number of entries strictly greater than each threshold."""
    return sorted_vals.size - np.searchsorted(sorted_vals, thresholds, side="right")


def _thresholds(*arrays) -> np.ndarray:
    vals = np.unique(np.concatenate([np.ravel(a) for a in arrays]))
    # descending, so both coordinates grow along the curve
    return np.concatenate([[np.inf], vals[::-1], [-np.inf]])


def afroc_curve(null_stats, alt_runs) -> list[CurvePoint]:
    """Family-wise false-positive rate against mean TPR on the affected nodes.

    For each threshold, ``x`` is the fraction of null instances whose largest
    node statistic exceeds it, and ``y`` averages, over alternative
    instances, the fraction of affected nodes exceeding it.
    """
    null_stats = [np.asarray(s, dtype=float) for s in null_stats]
    alt_runs = [(np.asarray(s, dtype=float), sorted(a)) for s, a in alt_runs]
    if not null_stats or not alt_runs:
        raise EmptyInputError("need at least one null and one alternative instance")
    if any(len(a) == 0 for _, a in alt_runs):
        raise EmptyAffectedSetError("every alternative instance needs a non-empty affected set")
    null_max = np.sort([s.max() for s in null_stats])
    thd = _thresholds(null_max, *[s for s, _ in alt_runs])
    x = _count_above(null_max, thd) / null_max.size
    y = np.zeros(thd.size)
    for s, a in alt_runs:
        aff = np.sort(s[a])
        y += _count_above(aff, thd) / aff.size
    y /= len(alt_runs)
    return [CurvePoint(float(a), float(b), float(t)) for a, b, t in zip(x, y, thd)]


def roc_curve(alt_runs) -> list[CurvePoint]:
    """Pooled node-level ROC over all alternative instances."""
    stats, labels = [], []
    for s, a in alt_runs:
        s = np.asarray(s, dtype=float)
        lab = np.zeros(s.size, dtype=bool)
        lab[list(a)] = True
        stats.append(s)
        labels.append(lab)
    if not stats:
        raise EmptyInputError("need at least one alternative instance")
    s = np.concatenate(stats)
    lab = np.concatenate(labels)
    pos, neg = np.sort(s[lab]), np.sort(s[~lab])
    if pos.size == 0 or neg.size == 0:
        raise DegenerateLabelsError("ROC needs both affected and unaffected nodes")
    thd = _thresholds(s)
    x = _count_above(neg, thd) / neg.size
    y = _count_above(pos, thd) / pos.size
    return [CurvePoint(float(a), float(b), float(t)) for a, b, t in zip(x, y, thd)]


def _xy(curve):
    if len(curve) == 0:
        raise EmptyCurveError("empty curve")
    pts = sorted((p.x, p.y) for p in curve)
    return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])


def roc_auc(curve) -> float:
    """Trapezoidal area under the full curve; tied scores contribute a diagonal."""
    x, y = _xy(curve)
    return float(np.trapezoid(y, x))


def afroc_auc(curve, window: float = AFROC_WINDOW) -> float:
    """Area over ``x in [0, window]`` divided by ``window``.

    The curve is interpolated linearly at ``x = window``; if it ends before
    the window, its last value is carried to the boundary.
    """
    x, y = _xy(curve)
    inside = x <= window
    xs, ys = list(x[inside]), list(y[inside])
    if not xs:
        # curve starts right of the window: interpolate from its first point
        xs, ys = [0.0], [float(y[0])]
    if xs[-1] < window:
        k = int(np.count_nonzero(inside))
        if k < x.size and k > 0:
            x0, y0, x1, y1 = x[k - 1], y[k - 1], x[k], y[k]
            y_end = y0 + (y1 - y0) * (window - x0) / (x1 - x0)
        else:
            y_end = ys[-1]
        xs.append(window)
        ys.append(float(y_end))
    if xs[0] > 0:
        xs.insert(0, 0.0)
        ys.insert(0, ys[0])
    return float(np.trapezoid(ys, xs) / window)


# ---------------------------------------------------------------------------
# benchmark


def instance_seed(seed: int, kind: int, index: int) -> int:
    """Integer seed of null (``kind=0``) or alternative (``kind=1``) instance ``index``."""
    return int(np.random.SeedSequence([int(seed), kind, index]).generate_state(1)[0])


def node_scores(method: str, g, samples, alpha: float, config: TestConfig, seed: int) -> np.ndarray:
    """Per-node statistic fed to the curves; directional methods use the larger direction."""
    if method in ("ctst", "pool"):
        S, S_rev = GrulsifStatistic(g, samples, alpha, config, seed, pool=method == "pool").observed
        return np.maximum(S, S_rev)
    if method in ("rulsif", "ulsif"):
        stat = RulsifStatistic(samples, alpha if method == "rulsif" else 0.0, seed)
        S, S_rev = stat(samples)
        return np.maximum(S, S_rev)
    if method == "mmd_median":
        return MmdStatistic(samples)(samples)
    raise UnknownMethodError(f"unknown method {method!r}; expected one of {METHODS}")


@dataclass(eq=False)
class BenchReport:
    method: str
    scenario: str
    n: int
    n_prime: int
    afroc_auc: float
    roc_auc: float
    num_null_instances: int
    num_alt_instances: int
    runtime: float
    afroc: list = field(default_factory=list, repr=False)
    roc: list = field(default_factory=list, repr=False)
    null_stats: list = field(default_factory=list, repr=False)
    alt_runs: list = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "method": self.method,
            "scenario": self.scenario,
            "n": self.n,
            "n_prime": self.n_prime,
            "afroc_auc": self.afroc_auc,
            "roc_auc": self.roc_auc,
            "num_null_instances": self.num_null_instances,
            "num_alt_instances": self.num_alt_instances,
            "runtime": self.runtime,
        }

    def to_dict(self) -> dict:
        d = self.summary()
        d["null_stats"] = [np.asarray(s).tolist() for s in self.null_stats]
        d["alt_runs"] = [{"stats": np.asarray(s).tolist(), "affected": sorted(a)} for s, a in self.alt_runs]
        return d


def run_benchmark(
    scenario: ScenarioSpec,
    method: str,
    num_null: int,
    num_alt: int,
    seed: int = 0,
    *,
    alpha: float = 0.1,
    config: TestConfig | None = None,
    progress=None,
) -> BenchReport:
    """Score ``num_null`` null and ``num_alt`` alternative instances with one method.

    The graph is drawn once from ``seed`` and kept for every instance. The
    instances depend only on ``(scenario, seed)``, so two methods run with
    the same seed see identical data. Curves threshold the raw node
    statistics; no permutations are run.
    """
    if method not in METHODS:
        raise UnknownMethodError(f"unknown method {method!r}; expected one of {METHODS}")
    if num_null < 1 or num_alt < 1:
        raise EmptyInputError("need at least one null and one alternative instance")
    config = config or TestConfig(selection=BENCH_SELECTION)
    t0 = time.perf_counter()
    base = ScenarioSpec(
        scenario.name,
        scenario.n,
        scenario.n_prime,
        seed,
        graph_seed=seed,
        nodes_per_cluster=scenario.nodes_per_cluster,
        grid_shape=scenario.grid_shape,
    )
    graph = scenario_graph(base)
    null_stats, alt_runs = [], []
    for kind, count in ((0, num_null), (1, num_alt)):
        for i in range(count):
            s = instance_seed(seed, kind, i)
            spec = ScenarioSpec(
                base.name, base.n, base.n_prime, s, kind == 0, seed, base.nodes_per_cluster, base.grid_shape
            )
            inst = generate(spec, graph)
            scores = node_scores(method, inst.graph, inst.samples, alpha, config, s)
            if kind == 0:
                null_stats.append(scores)
            else:
                alt_runs.append((scores, inst.affected))
            if progress is not None:
                progress(kind, i)
    af = afroc_curve(null_stats, alt_runs)
    rc = roc_curve(alt_runs)
    return BenchReport(
        method=method,
        scenario=scenario.name,
        n=scenario.n,
        n_prime=scenario.n_prime,
        afroc_auc=afroc_auc(af),
        roc_auc=roc_auc(rc),
        num_null_instances=num_null,
        num_alt_instances=num_alt,
        runtime=time.perf_counter() - t0,
        afroc=af,
        roc=rc,
        null_stats=null_stats,
        alt_runs=alt_runs,
    )
