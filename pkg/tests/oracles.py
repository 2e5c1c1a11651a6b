"""Independent reference computations used as test oracles.

None of these share code with the package; each uses a different
algorithm from the one under test.
"""
import math

import numpy as np
from scipy import integrate
from scipy.special import ndtr, owens_t


def phi_series(x, terms=200):
    """Standard normal CDF from its Taylor series around zero."""
    total, term = 0.0, x
    for n in range(terms):
        total += term
        term *= x * x / (2 * n + 3)
    return 0.5 + math.exp(-x * x / 2) / math.sqrt(2 * math.pi) * total


def bvn_quadrature(h, k, r):
    """Lower-orthant bivariate normal probability by numerical integration.

    Integrates the conditional normal CDF over the first coordinate, which
    is smooth even for ``|r|`` near one.
    """
    s = math.sqrt(1 - r * r)

    def f(x):
        return math.exp(-x * x / 2) / math.sqrt(2 * math.pi) * ndtr((k - r * x) / s)

    lo = min(h, -40.0)
    val, _ = integrate.quad(f, lo, h, epsabs=1e-14, epsrel=1e-13, limit=400)
    return val


def bvn_owen(h, k, r):
    """Vectorized lower-orthant probability through Owen's T function.

    ``h`` and ``k`` may be infinite. ``r`` may be an array.
    """
    r = np.asarray(r, dtype=float)
    if h == -np.inf or k == -np.inf:
        return np.zeros_like(r)
    if h == np.inf:
        return np.full_like(r, ndtr(k))
    if k == np.inf:
        return np.full_like(r, ndtr(h))
    if h == 0 or k == 0:
        raise ValueError("oracle needs nonzero limits")
    s = np.sqrt(1 - r * r)
    ah = (k - r * h) / (h * s)
    ak = (h - r * k) / (k * s)
    adj = 0.5 if h * k < 0 else 0.0
    return 0.5 * (ndtr(h) + ndtr(k)) - owens_t(h, ah) - owens_t(k, ak) - adj


def grid_polychoric(table, tx, ty, step=0.002):
    """Grid-search maximizer of the multinomial log-likelihood in rho."""
    table = np.asarray(table, dtype=float)
    grid = np.arange(-0.998, 0.998 + step / 2, step)
    ex = np.concatenate([[-np.inf], tx, [np.inf]])
    ey = np.concatenate([[-np.inf], ty, [np.inf]])
    F = np.array([[bvn_owen(a, b, grid) for b in ey] for a in ex])
    ll = np.zeros_like(grid)
    for i in range(len(ex) - 1):
        for j in range(len(ey) - 1):
            pr = F[i + 1, j + 1] - F[i, j + 1] - F[i + 1, j] + F[i, j]
            ll += table[i, j] * np.log(np.maximum(pr, 1e-300))
    return float(grid[np.argmax(ll)])


def dummy_ols_r2(y, X, groups):
    """R-squared of OLS on covariates plus one indicator per group."""
    y = np.asarray(y, dtype=float)
    levels, g = np.unique(groups, return_inverse=True)
    D = np.zeros((len(y), len(levels)))
    D[np.arange(len(y)), g] = 1.0
    A = np.column_stack([np.asarray(X, dtype=float).reshape(len(y), -1), D])
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ beta
    return 1.0 - resid @ resid / np.sum((y - y.mean()) ** 2), beta[: A.shape[1] - len(levels)]


def poisson_newton(y, X, iters=100):
    """Poisson log-link MLE by plain Newton steps from the log-mean start."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    beta = np.zeros(X.shape[1])
    beta[0] = math.log(max(y.mean(), 1e-8))
    for _ in range(iters):
        mu = np.exp(X @ beta)
        grad = X.T @ (y - mu)
        H = X.T @ (X * mu[:, None])
        step = np.linalg.solve(H, grad)
        beta = beta + step
        if np.max(np.abs(step)) < 1e-14:
            break
    mu = np.exp(X @ beta)
    cov = np.linalg.inv(X.T @ (X * mu[:, None]))
    return beta, mu, cov


def tucker_bruteforce(A, B):
    """Mean absolute congruence under the best column permutation."""
    from itertools import permutations

    A = np.asarray(A, float)
    B = np.asarray(B, float)
    k = A.shape[1]
    C = np.abs(A.T @ B) / np.outer(np.linalg.norm(A, axis=0), np.linalg.norm(B, axis=0))
    return max(np.mean([C[i, p[i]] for i in range(k)]) for p in permutations(range(k)))
