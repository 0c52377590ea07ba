"""Synthetic graphs and labelled two-sample instances."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyGraphError, UnknownScenarioError
from .graph import Graph
from .samples import NodeSampleSet

SCENARIOS = ("Ia", "Ib", "IIa", "IIb")

SQRT3 = np.sqrt(3.0)
IIB_MEANS = np.array([[0.0, 0.0], [0.0, 5.0], [0.0, -5.0], [5.0, 0.0], [-5.0, 0.0]])


def sbm_graph(
    clusters: int = 4,
    nodes_per_cluster: int = 25,
    p_in: float = 0.5,
    p_out: float = 0.01,
    seed=0,
) -> tuple[Graph, np.ndarray]:
    """Stochastic block model with equal contiguous clusters and unit weights.

    Returns the graph and the cluster label of every node.
    """
    for p in (p_in, p_out):
        if not 0 <= p <= 1:
            raise ValueError("edge probabilities must lie in [0, 1]")
    labels = np.repeat(np.arange(clusters), nodes_per_cluster)
    N = labels.size
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(N, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    return Graph(N, list(zip(iu[keep].tolist(), ju[keep].tolist()))), labels


def grid_graph(rows: int = 10, cols: int = 10) -> Graph:
    """Four-neighbour lattice; node ``r * cols + c`` sits at row ``r``, column ``c``."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph(rows * cols, edges)


def ego_2hop(g: Graph, seed=0) -> tuple[int, frozenset]:
    """Degree-proportional center and its two-hop neighbourhood (center included)."""
    deg = g.degrees.astype(float)
    total = deg.sum()
    if total <= 0:
        raise EmptyGraphError("cannot sample a center from a graph without edges")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = int(rng.choice(g.num_nodes, p=deg / total))
    return u, frozenset(g.hop_distances(u, max_hops=2))


@dataclass(frozen=True)
class ScenarioSpec:
    """Scenario name, sample sizes and seeds.

    ``graph_seed`` fixes the SBM draw separately from the data seed so that a
    benchmark can keep one graph across instances (defaults to ``seed``).
    ``nodes_per_cluster`` and ``grid_shape`` shrink the graphs for quick runs.
    """

    name: str
    n: int = 50
    n_prime: int = 50
    seed: int = 0
    null_mode: bool = False
    graph_seed: int | None = None
    nodes_per_cluster: int = 25
    grid_shape: tuple = (10, 10)

    def __post_init__(self):
        if self.name not in SCENARIOS:
            raise UnknownScenarioError(f"unknown scenario {self.name!r}; expected one of {SCENARIOS}")
        if self.n < 1 or self.n_prime < 1:
            raise ValueError("sample sizes must be positive")
        object.__setattr__(self, "grid_shape", tuple(int(x) for x in self.grid_shape))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "n_prime": self.n_prime,
            "seed": self.seed,
            "null_mode": self.null_mode,
            "graph_seed": self.graph_seed,
            "nodes_per_cluster": self.nodes_per_cluster,
            "grid_shape": list(self.grid_shape),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        return cls(**d)


@dataclass(frozen=True, eq=False)
class LabeledInstance:
    graph: Graph
    samples: NodeSampleSet
    affected: frozenset = field(default_factory=frozenset)
    center: int | None = None

    def labels(self) -> np.ndarray:
        y = np.zeros(self.graph.num_nodes, dtype=bool)
        y[list(self.affected)] = True
        return y


def scenario_graph(spec: ScenarioSpec) -> tuple[Graph, np.ndarray | None]:
    """Graph of the scenario family; SBM cluster labels, or ``None`` for grids."""
    gseed = spec.seed if spec.graph_seed is None else spec.graph_seed
    if spec.name in ("Ia", "Ib"):
        return sbm_graph(4, spec.nodes_per_cluster, 0.5, 0.01, np.random.SeedSequence([gseed, 100]))
    return grid_graph(*spec.grid_shape), None


def _mvn(rng, mean, cov, size):
    chol = np.linalg.cholesky(np.asarray(cov, dtype=float))
    return np.asarray(mean, dtype=float) + rng.standard_normal((size, chol.shape[0])) @ chol.T


def _corr(d, rho):
    cov = np.eye(d)
    cov[0, 1] = cov[1, 0] = rho
    return cov


def _ia(rng, changed_mode, m):
    """``changed_mode``: 0 unchanged, 1 uniform, 4 shifted mean."""
    if changed_mode == 1:
        return rng.uniform(-SQRT3, SQRT3, size=(m, 1))
    if changed_mode == 4:
        return rng.normal(1.0, 1.0, size=(m, 1))
    return rng.normal(0.0, 1.0, size=(m, 1))


def _iib_mixture(rng, m):
    comp = rng.integers(0, len(IIB_MEANS), size=m)
    return IIB_MEANS[comp] + np.sqrt(5.0) * rng.standard_normal((m, 2))


def generate(spec: ScenarioSpec, graph: tuple | None = None) -> LabeledInstance:
    """Draw one labelled instance.

    ``graph`` may pass a precomputed ``(Graph, labels)`` pair from
    :func:`scenario_graph` to avoid rebuilding it.
    """
    g, labels = scenario_graph(spec) if graph is None else graph
    N = g.num_nodes
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 200]))
    n, m = spec.n, spec.n_prime
    center = None

    if spec.name == "Ia":
        # clusters are 0-based here: 0 -> uniform, 3 -> mean shift
        mode = {0: 1, 3: 4}
        affected = set() if spec.null_mode else {v for v in range(N) if labels[v] in (0, 3)}
        X = np.stack([_ia(rng, 0, n) for _ in range(N)])
        Xp = np.stack([_ia(rng, 0 if spec.null_mode else mode.get(int(labels[v]), 0), m) for v in range(N)])
    elif spec.name == "Ib":
        p_cov = {0: _corr(2, -0.8), 1: _corr(2, -0.8), 2: _corr(2, 0.8), 3: np.eye(2)}
        affected = set() if spec.null_mode else {v for v in range(N) if labels[v] in (2, 3)}
        X = np.stack([_mvn(rng, np.zeros(2), p_cov[int(labels[v])], n) for v in range(N)])
        Xp = []
        for v in range(N):
            c = int(labels[v])
            if spec.null_mode or c in (0, 1):
                Xp.append(_mvn(rng, np.zeros(2), p_cov[c], m))
            elif c == 2:
                Xp.append(_mvn(rng, np.zeros(2), np.eye(2), m))
            else:
                Xp.append(_mvn(rng, np.ones(2), np.eye(2), m))
        Xp = np.stack(Xp)
    else:
        if spec.null_mode:
            affected = set()
        else:
            center, affected = ego_2hop(g, rng)
        if spec.name == "IIa":
            p_cov = _corr(3, 0.8)
            X = np.stack([_mvn(rng, np.zeros(3), p_cov, n) for _ in range(N)])
            Xp = np.stack(
                [_mvn(rng, np.zeros(3), np.eye(3) if v in affected else p_cov, m) for v in range(N)]
            )
        else:
            X = np.sqrt(10.0) * rng.standard_normal((N, n, 2))
            Xp = np.stack(
                [_iib_mixture(rng, m) if v in affected else np.sqrt(10.0) * rng.standard_normal((m, 2)) for v in range(N)]
            )
    return LabeledInstance(g, NodeSampleSet(X, Xp), frozenset(int(v) for v in affected), center)
