"""Fixed undirected positive-weighted graphs and graph smoothness."""
from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateEdgeError,
    LengthMismatchError,
    NegativeWeightError,
    NodeOutOfRangeError,
    SelfLoopError,
)


class Graph:
    """Immutable undirected graph with strictly positive edge weights.

    Edges are stored canonically as ``(u, v, w)`` with ``u < v``; adjacency is
    kept as sorted neighbor arrays so that block updates can iterate over the
    neighbors of a node without touching a dense weight matrix.
    """

    __slots__ = ("num_nodes", "edges", "_nbrs", "_nbr_w", "_degrees", "_lookup", "_spectrum", "_lap")

    def __init__(self, num_nodes: int, edges: Iterable[Sequence] = ()):
        num_nodes = int(num_nodes)
        if num_nodes < 1:
            raise NodeOutOfRangeError(f"num_nodes must be positive, got {num_nodes}")
        lookup: dict[tuple[int, int], float] = {}
        for e in edges:
            if len(e) == 2:
                u, v, w = int(e[0]), int(e[1]), 1.0
            else:
                u, v, w = int(e[0]), int(e[1]), float(e[2])
            if not (0 <= u < num_nodes and 0 <= v < num_nodes):
                raise NodeOutOfRangeError(f"edge ({u}, {v}) outside [0, {num_nodes})")
            if u == v:
                raise SelfLoopError(f"self-loop at node {u}")
            if not w > 0 or not np.isfinite(w):
                raise NegativeWeightError(f"edge ({u}, {v}) has non-positive weight {w}")
            key = (min(u, v), max(u, v))
            if key in lookup:
                raise DuplicateEdgeError(f"duplicate edge {key}")
            lookup[key] = w

        canon = sorted((u, v, w) for (u, v), w in lookup.items())
        nbrs: list[list[int]] = [[] for _ in range(num_nodes)]
        nbr_w: list[list[float]] = [[] for _ in range(num_nodes)]
        for u, v, w in canon:
            nbrs[u].append(v)
            nbr_w[u].append(w)
            nbrs[v].append(u)
            nbr_w[v].append(w)
        self.num_nodes = num_nodes
        self.edges = tuple(canon)
        self._lookup = lookup
        self._nbrs = []
        self._nbr_w = []
        for idx, ws in zip(nbrs, nbr_w):
            order = np.argsort(idx, kind="stable")
            a = np.asarray(idx, dtype=np.intp)[order]
            b = np.asarray(ws, dtype=float)[order]
            a.flags.writeable = False
            b.flags.writeable = False
            self._nbrs.append(a)
            self._nbr_w.append(b)
        deg = np.array([b.sum() for b in self._nbr_w], dtype=float)
        deg.flags.writeable = False
        self._degrees = deg
        self._spectrum = None
        self._lap = None

    def __repr__(self) -> str:
        return f"Graph(num_nodes={self.num_nodes}, num_edges={len(self.edges)})"

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self.num_nodes == other.num_nodes
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.num_nodes, self.edges))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def degrees(self) -> np.ndarray:
        return self._degrees

    @property
    def average_degree(self) -> float:
        return float(self._degrees.mean())

    def _check(self, v: int) -> int:
        v = int(v)
        if not 0 <= v < self.num_nodes:
            raise NodeOutOfRangeError(f"node {v} outside [0, {self.num_nodes})")
        return v

    def neighbors(self, v: int) -> np.ndarray:
        return self._nbrs[self._check(v)]

    def neighbor_weights(self, v: int) -> np.ndarray:
        return self._nbr_w[self._check(v)]

    def weight(self, u: int, v: int) -> float:
        """Weight of edge ``{u, v}``; 0.0 when absent."""
        u, v = self._check(u), self._check(v)
        return self._lookup.get((min(u, v), max(u, v)), 0.0)

    def degree(self, v: int) -> float:
        return float(self._degrees[self._check(v)])

    def adjacency(self) -> np.ndarray:
        """Dense symmetric weight matrix ``W``."""
        W = np.zeros((self.num_nodes, self.num_nodes))
        for u, v, w in self.edges:
            W[u, v] = W[v, u] = w
        return W

    def laplacian(self) -> np.ndarray:
        """Combinatorial Laplacian ``D - W`` (cached, read-only)."""
        if self._lap is None:
            W = self.adjacency()
            lap = np.diag(W.sum(axis=1)) - W
            lap.flags.writeable = False
            self._lap = lap
        return self._lap

    def laplacian_spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Cached eigendecomposition ``(eigenvalues, eigenvectors)`` of the Laplacian."""
        if self._spectrum is None:
            evals, Q = np.linalg.eigh(self.laplacian())
            evals = np.maximum(evals, 0.0)
            evals.flags.writeable = False
            Q.flags.writeable = False
            self._spectrum = (evals, Q)
        return self._spectrum

    def without_edges(self) -> "Graph":
        return Graph(self.num_nodes)

    def hop_distances(self, source: int, max_hops: int | None = None) -> dict[int, int]:
        """Unweighted BFS distances from ``source`` (optionally truncated)."""
        source = self._check(source)
        dist = {source: 0}
        queue = deque([source])
        while queue:
            u = queue.popleft()
            if max_hops is not None and dist[u] >= max_hops:
                continue
            for v in self._nbrs[u]:
                v = int(v)
                if v not in dist:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def connected_components(self, nodes: Iterable[int] | None = None) -> list[list[int]]:
        """Connected components of the subgraph induced by ``nodes`` (all by default)."""
        keep = set(range(self.num_nodes)) if nodes is None else {self._check(v) for v in nodes}
        seen: set[int] = set()
        comps = []
        for s in sorted(keep):
            if s in seen:
                continue
            comp = []
            queue = deque([s])
            seen.add(s)
            while queue:
                u = queue.popleft()
                comp.append(u)
                for v in self._nbrs[u]:
                    v = int(v)
                    if v in keep and v not in seen:
                        seen.add(v)
                        queue.append(v)
            comps.append(sorted(comp))
        return comps

    def to_dict(self) -> dict:
        return {"num_nodes": self.num_nodes, "edges": [[u, v, w] for u, v, w in self.edges]}

    @classmethod
    def from_dict(cls, d: dict) -> "Graph":
        return cls(d["num_nodes"], d.get("edges", []))


def build_graph(num_nodes: int, edge_list: Iterable[Sequence]) -> Graph:
    return Graph(num_nodes, edge_list)


def smoothness(g: Graph, s) -> float:
    """Sum over edges of ``W_uv (s_u - s_v)**2``."""
    s = np.asarray(s, dtype=float)
    if s.shape != (g.num_nodes,):
        raise LengthMismatchError(f"signal has shape {s.shape}, graph has {g.num_nodes} nodes")
    if not g.edges:
        return 0.0
    e = np.asarray(g.edges)
    u, v, w = e[:, 0].astype(int), e[:, 1].astype(int), e[:, 2]
    return float(np.sum(w * (s[u] - s[v]) ** 2))
