"""Independent reference implementations used by the tests."""
import numpy as np
from scipy import integrate, stats


def brute_objective(W, H, Hp, hp_vec, alpha, lam, gamma, theta):
    """Objective written out with explicit loops over node pairs."""
    N = theta.shape[0]
    fit = 0.0
    for v in range(N):
        t = theta[v]
        fit += 0.5 * (1 - alpha) * t @ H[v] @ t + 0.5 * alpha * t @ Hp[v] @ t - hp_vec[v] @ t
    smooth = 0.0
    for u in range(N):
        for v in range(N):
            d = theta[v] - theta[u]
            smooth += W[u, v] * d @ d
    return fit / N + lam / 4 * smooth + lam * gamma / 2 * np.sum(theta**2)


def dense_minimizer(W, H, Hp, hp_vec, alpha, lam, gamma):
    """Exact minimizer from the quadratic form recovered by polarization."""
    N, L = hp_vec.shape
    D = N * L

    def f(x):
        return brute_objective(W, H, Hp, hp_vec, alpha, lam, gamma, x.reshape(N, L))

    f0 = f(np.zeros(D))
    E = np.eye(D)
    fe = np.array([f(E[i]) for i in range(D)])
    Q = np.empty((D, D))
    for i in range(D):
        for j in range(D):
            Q[i, j] = f(E[i] + E[j]) - fe[i] - fe[j] + f0
    # f(e_i) = Q_ii / 2 - c_i
    c = 0.5 * np.diag(Q) - fe
    return np.linalg.solve(Q, c).reshape(N, L)


def pearson_divergence_gaussian_shift(mu=1.0, sigma=1.0):
    """0.5 * int (q/p - 1)^2 p for p = N(0, s^2), q = N(mu, s^2), by quadrature."""
    p, q = stats.norm(0, sigma), stats.norm(mu, sigma)
    val, _ = integrate.quad(lambda x: (q.pdf(x) / p.pdf(x) - 1) ** 2 * p.pdf(x), -20, 20 + mu, limit=200)
    return 0.5 * val


def pearson_divergence_relative(p_pdf, q_pdf, alpha, lo, hi):
    """0.5 * int (r_alpha - 1)^2 p_alpha with p_alpha = (1-a) p + a q."""
    def integrand(x):
        pa = (1 - alpha) * p_pdf(x) + alpha * q_pdf(x)
        r = q_pdf(x) / pa
        return (r - 1) ** 2 * pa

    val, _ = integrate.quad(integrand, lo, hi, limit=400)
    return 0.5 * val
