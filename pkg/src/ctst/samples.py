"""Paired per-node observation sets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyNodeSampleError,
    InputError,
    NodeCountMismatchError,
)


@dataclass(frozen=True, eq=False)
class NodeSampleSet:
    """``X[v]`` holds the ``n`` draws from ``p_v``, ``X_prime[v]`` the ``n'`` draws from ``q_v``.

    Arrays have shapes ``(N, n, d)`` and ``(N, n', d)``. Every node carries the
    same number of observations, which is what makes whole cross-node columns
    exchangeable under the global null.
    """

    X: np.ndarray
    X_prime: np.ndarray

    def __post_init__(self):
        X = _as_node_array(self.X, "X")
        Xp = _as_node_array(self.X_prime, "X_prime")
        if X.shape[0] != Xp.shape[0]:
            raise NodeCountMismatchError(
                f"X has {X.shape[0]} nodes but X_prime has {Xp.shape[0]}"
            )
        if X.shape[2] != Xp.shape[2]:
            raise DimensionMismatchError(f"dimension mismatch: {X.shape[2]} vs {Xp.shape[2]}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "X_prime", Xp)

    @property
    def num_nodes(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    @property
    def n_prime(self) -> int:
        return self.X_prime.shape[1]

    @property
    def dim(self) -> int:
        return self.X.shape[2]

    def pooled(self) -> np.ndarray:
        """All observations of all nodes stacked into ``(N * (n + n'), d)``."""
        return np.concatenate([self.X.reshape(-1, self.dim), self.X_prime.reshape(-1, self.dim)])

    def columns(self) -> np.ndarray:
        """Cross-node columns ``Z``: shape ``(N, n + n', d)``, X first."""
        return np.concatenate([self.X, self.X_prime], axis=1)

    def swapped(self) -> "NodeSampleSet":
        return NodeSampleSet(self.X_prime, self.X)

    def to_dict(self) -> dict:
        return {
            "d": self.dim,
            "n": self.n,
            "n_prime": self.n_prime,
            "X": self.X.tolist(),
            "X_prime": self.X_prime.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NodeSampleSet":
        dim = int(d["d"])
        X = np.asarray(d["X"], dtype=float)
        Xp = np.asarray(d["X_prime"], dtype=float)
        if X.ndim == 2 and dim == 1:
            X = X[..., None]
        if Xp.ndim == 2 and dim == 1:
            Xp = Xp[..., None]
        out = cls(X, Xp)
        if out.dim != dim or out.n != int(d.get("n", out.n)) or out.n_prime != int(
            d.get("n_prime", out.n_prime)
        ):
            raise DimensionMismatchError("declared d/n/n_prime disagree with the arrays")
        return out


def _as_node_array(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        a = a[..., None]
    if a.ndim != 3:
        raise DimensionMismatchError(f"{name} must have shape (N, n, d), got {a.shape}")
    if a.shape[0] < 1:
        raise NodeCountMismatchError(f"{name} has no nodes")
    if a.shape[1] < 1:
        raise EmptyNodeSampleError(f"{name} has no observations per node")
    if not np.all(np.isfinite(a)):
        raise InputError(f"{name} contains non-finite values")
    return a
