"""Hyperparameter grids and cross-validated selection."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyNodeSampleError, TooFewObservationsForFoldsError, TooFewPointsError
from .estimators import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    BlockSystem,
    Hyperparams,
    grulsif_fit,
    heldout_score,
    node_features,
    rulsif_centers,
    stats_from_features,
)
from .graph import Graph
from .kernels import (
    DEFAULT_ANCHORS_MAX,
    DEFAULT_EIGEN_FLOOR,
    as_points,
    build_feature_map,
    kernel_matrix,
    median_heuristic,
    select_anchors,
)
from .samples import NodeSampleSet

GRULSIF_GAMMAS = (1e-5, 1e-3, 0.1, 1.0)
GRULSIF_LAMBDA_FACTORS = (1e-3, 1e-2, 0.1, 1.0, 10.0)
RULSIF_SIGMA_FACTORS = (0.6, 0.8, 1.0, 1.2, 1.4)
RULSIF_GAMMAS = (1e-5, 1e-3, 0.1, 10.0)


@dataclass(frozen=True)
class HyperGrid:
    sigmas: tuple
    gammas: tuple
    lambdas: tuple

    def __post_init__(self):
        for name in ("sigmas", "gammas", "lambdas"):
            vals = tuple(sorted(set(float(x) for x in getattr(self, name))))
            if not vals or any(not x > 0 for x in vals):
                raise ValueError(f"{name} must be a non-empty list of positive reals")
            object.__setattr__(self, name, vals)

    def __len__(self):
        return len(self.sigmas) * len(self.gammas) * len(self.lambdas)

    def to_dict(self) -> dict:
        return {"sigmas": list(self.sigmas), "gammas": list(self.gammas), "lambdas": list(self.lambdas)}

    @classmethod
    def from_dict(cls, d: dict) -> "HyperGrid":
        return cls(tuple(d["sigmas"]), tuple(d["gammas"]), tuple(d["lambdas"]))


def node_median_widths(X: np.ndarray) -> np.ndarray:
    """Median-heuristic width of each node's sample, ``X`` of shape ``(N, n, d)``."""
    if X.shape[1] < 2:
        raise EmptyNodeSampleError("median heuristic needs two observations per node")
    return np.array([median_heuristic(X[v]) for v in range(X.shape[0])])


def sigma_candidates(widths) -> tuple:
    lo, med, hi = float(np.min(widths)), float(np.median(widths)), float(np.max(widths))
    return (lo, 0.5 * (lo + med), med, 0.5 * (hi + med), hi)


def lambda_candidates(g: Graph) -> tuple:
    """Coupling grid scaled by the inverse average degree (unscaled when edgeless)."""
    dbar = g.average_degree
    scale = 1.0 / dbar if dbar > 0 else 1.0
    return tuple(f * scale for f in GRULSIF_LAMBDA_FACTORS)


def default_grid_grulsif(g: Graph, samples: NodeSampleSet) -> HyperGrid:
    """Widths from per-node medians over ``X_v``; gammas and lambdas from fixed ladders."""
    return HyperGrid(sigma_candidates(node_median_widths(samples.X)), GRULSIF_GAMMAS, lambda_candidates(g))


def default_grid_pool(samples: NodeSampleSet) -> HyperGrid:
    """POOL ignores the graph, so the coupling constant is pinned to 1."""
    return HyperGrid(sigma_candidates(node_median_widths(samples.X)), GRULSIF_GAMMAS, (1.0,))


@dataclass(frozen=True)
class CvResult:
    best: Hyperparams
    scores: dict = field(repr=False)
    folds: int = 5

    def to_dict(self) -> dict:
        return {
            "best": self.best.to_dict(),
            "folds": self.folds,
            "scores": [
                {"sigma": s, "gamma": gm, "lambda": lm, "score": v}
                for (s, gm, lm), v in sorted(self.scores.items())
            ],
        }


def fold_positions(n: int, folds: int) -> list[np.ndarray]:
    return np.array_split(np.arange(n), folds)


def node_fold_orders(N: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Independent shuffle of ``range(n)`` per node, shape ``(N, n)``."""
    return np.argsort(rng.random((N, n)), axis=1)


def _split(Psi: np.ndarray, order: np.ndarray, pos: np.ndarray):
    mask = np.ones(order.shape[1], dtype=bool)
    mask[pos] = False
    test = np.take_along_axis(Psi, order[:, pos, None], axis=1)
    train = np.take_along_axis(Psi, order[:, mask, None], axis=1)
    return train, test


def cv_select(
    g: Graph,
    samples: NodeSampleSet,
    grid: HyperGrid,
    alpha: float,
    folds: int = 5,
    seed=0,
    *,
    anchors=None,
    anchors_max: int = DEFAULT_ANCHORS_MAX,
    eigen_floor: float = DEFAULT_EIGEN_FLOOR,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    solver: str = "pcg",
) -> CvResult:
    """K-fold selection of ``(sigma, gamma, lambda)`` by held-out mean score.

    Each node's two samples are shuffled independently and split into
    ``folds`` parts; the same split is reused for every grid point. The fit on
    the training folds is scored with the held-out fold's statistics as
    ``1/N sum_v ((1-a)/2 t'Ht + a/2 t'H't - h''t)`` and the scores are
    averaged over folds. Lower is better; exact ties go to the smaller gamma,
    then the smaller lambda, then the smaller sigma.

    Fits are warm-started from the same grid point on the previous fold (the
    training sets overlap heavily), or on the first fold from the previous
    lambda of the increasing ladder.
    """
    if folds < 2:
        raise ValueError("need at least two folds")
    if min(samples.n, samples.n_prime) < folds:
        raise TooFewObservationsForFoldsError(
            f"{folds} folds need at least {folds} observations per sample at every node"
        )
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    anchor_seed, fold_seed = ss.spawn(2)
    if anchors is None:
        anchors = select_anchors(samples.pooled(), anchors_max, anchor_seed)
    rng = np.random.default_rng(fold_seed)
    N = samples.num_nodes
    order = node_fold_orders(N, samples.n, rng)
    order_p = node_fold_orders(N, samples.n_prime, rng)
    pos = fold_positions(samples.n, folds)
    pos_p = fold_positions(samples.n_prime, folds)

    totals = {}
    for sigma in grid.sigmas:
        fm = build_feature_map(anchors, sigma, eigen_floor)
        Psi = node_features(fm, samples.X)
        Psi_p = node_features(fm, samples.X_prime)
        previous = {}
        for k in range(folds):
            tr, te = _split(Psi, order, pos[k])
            tr_p, te_p = _split(Psi_p, order_p, pos_p[k])
            train = stats_from_features(tr, tr_p)
            test = stats_from_features(te, te_p)
            system = BlockSystem(train, alpha)
            for gamma in grid.gammas:
                theta = None
                for lam in grid.lambdas:
                    key = (sigma, gamma, lam)
                    hp = Hyperparams(alpha, lam, gamma, sigma)
                    fit = grulsif_fit(
                        g,
                        train,
                        hp,
                        tol,
                        max_iter,
                        solver=solver,
                        theta0=previous.get(key, theta),
                        system=system,
                        compute_objective=False,
                    )
                    theta = previous[key] = fit.theta
                    totals[key] = totals.get(key, 0.0) + heldout_score(theta, test, alpha)
    scores = {key: val / folds for key, val in totals.items()}
    sigma, gamma, lam = min(scores, key=lambda k: (scores[k], k[1], k[2], k[0]))
    return CvResult(Hyperparams(alpha, lam, gamma, sigma), scores, folds)


# ---------------------------------------------------------------------------
# per-node leave-one-out for the single-task baseline


def _loo_score_closed_form(Phi, Phi_p, alpha, gamma):
    """Leave-one-pair-out criterion for paired samples of equal size.

    Removing the pair ``(x_i, x'_i)`` perturbs the regularized system by a
    rank-two term, handled with the Woodbury identity so that all ``n``
    held-out fits cost one ``b x b`` inverse.
    """
    n, b = Phi.shape
    G = (1 - alpha) * Phi.T @ Phi / n + alpha * Phi_p.T @ Phi_p / n
    h = Phi_p.mean(axis=0)
    B = n * G + (n - 1) * gamma * np.eye(b)
    Binv = np.linalg.inv(B)
    Binv = 0.5 * (Binv + Binv.T)
    BP = Phi @ Binv
    BPp = Phi_p @ Binv
    Bh = Binv @ h
    s1, s2 = np.sqrt(1 - alpha), np.sqrt(alpha)
    pp = np.einsum("ij,ij->i", Phi, BP)
    pq = np.einsum("ij,ij->i", Phi, BPp)
    qq = np.einsum("ij,ij->i", Phi_p, BPp)
    # Binv c_i with c_i = n h - phi'_i, projected on phi_i and phi'_i
    p_c = n * (Phi @ Bh) - pq
    q_c = n * (Phi_p @ Bh) - qq
    C = np.empty((n, 2, 2))
    C[:, 0, 0] = 1 - s1 * s1 * pp
    C[:, 0, 1] = C[:, 1, 0] = -s1 * s2 * pq
    C[:, 1, 1] = 1 - s2 * s2 * qq
    rhs = np.stack([s1 * p_c, s2 * q_c], axis=1)
    w = np.linalg.solve(C, rhs[..., None])[..., 0]
    f = p_c + s1 * pp * w[:, 0] + s2 * pq * w[:, 1]
    fp = q_c + s1 * pq * w[:, 0] + s2 * qq * w[:, 1]
    return float(np.mean(0.5 * (1 - alpha) * f**2 + 0.5 * alpha * fp**2 - fp))


def _loo_score_refit(Phi, Phi_p, alpha, gamma):
    m = min(Phi.shape[0], Phi_p.shape[0])
    b = Phi.shape[1]
    total = 0.0
    for i in range(m):
        P = np.delete(Phi, i, axis=0)
        Pp = np.delete(Phi_p, i, axis=0)
        G = (1 - alpha) * P.T @ P / P.shape[0] + alpha * Pp.T @ Pp / Pp.shape[0]
        theta = np.linalg.solve(G + gamma * np.eye(b), Pp.mean(axis=0))
        f, fp = Phi[i] @ theta, Phi_p[i] @ theta
        total += 0.5 * (1 - alpha) * f**2 + 0.5 * alpha * fp**2 - fp
    return total / m


def loo_score(X_v, X_prime_v, alpha, sigma, gamma, centers, closed_form=True) -> float:
    """Leave-one-out squared-loss criterion of the single-node ratio fit."""
    X_v, X_prime_v = as_points(X_v), as_points(X_prime_v)
    Phi = kernel_matrix(X_v, centers, sigma)
    Phi_p = kernel_matrix(X_prime_v, centers, sigma)
    if closed_form and Phi.shape[0] == Phi_p.shape[0]:
        return _loo_score_closed_form(Phi, Phi_p, alpha, gamma)
    return _loo_score_refit(Phi, Phi_p, alpha, gamma)


def loocv_select_rulsif(
    X_v,
    X_prime_v,
    alpha: float,
    seed=0,
    L_v: int = 100,
    sigma_factors=RULSIF_SIGMA_FACTORS,
    gammas=RULSIF_GAMMAS,
) -> Hyperparams:
    """Pick ``(sigma, gamma)`` for one node by leave-one-out cross-validation.

    Widths are multiples of the median heuristic over ``X'_v``. The returned
    :class:`Hyperparams` carries ``lam=1`` (no graph coupling in this model).
    """
    X_v, X_prime_v = as_points(X_v), as_points(X_prime_v)
    if X_v.shape[0] < 2 or X_prime_v.shape[0] < 2:
        raise TooFewPointsError("leave-one-out needs at least two observations per sample")
    centers = rulsif_centers(X_prime_v, L_v, seed)
    med = median_heuristic(X_prime_v)
    best = None
    for fac in sorted(sigma_factors):
        for gamma in sorted(gammas):
            score = loo_score(X_v, X_prime_v, alpha, fac * med, gamma, centers)
            key = (score, gamma, fac)
            if best is None or key < best:
                best = key
    _, gamma, fac = best
    return Hyperparams(alpha, 1.0, gamma, fac * med)
