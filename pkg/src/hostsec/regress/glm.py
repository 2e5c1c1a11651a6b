"""Quasi-Poisson log-link GLM fitted by iteratively reweighted least squares."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.linalg import qr
from scipy.special import gammaln, xlogy

from .fixed_effects import RegressionError

GLM_TOL = 1e-10
GLM_MAX_ITER = 100


class ConvergenceError(RegressionError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class RegressionFit:
    names: tuple
    coefficients: np.ndarray
    std_errors: np.ndarray
    dispersion: float
    deviance: float
    null_deviance: float
    pseudo_r2: float
    poisson_loglik: float
    n: int
    p: int
    poisson_std_errors: np.ndarray = None
    iterations: int = 0
    X: np.ndarray = field(default=None, repr=False)
    y: np.ndarray = field(default=None, repr=False)

    @property
    def df_resid(self) -> int:
        return self.n - self.p

    def coef(self, name) -> float:
        return float(self.coefficients[self.names.index(name)])

    @property
    def t_values(self):
        return self.coefficients / self.std_errors

    @property
    def p_values(self):
        return 2.0 * stats.t.sf(np.abs(self.t_values), self.df_resid)

    def predict(self, X):
        return np.exp(np.asarray(X, dtype=float) @ self.coefficients)

    def as_dict(self) -> dict:
        return {
            "names": list(self.names),
            "coefficients": self.coefficients.tolist(),
            "std_errors": self.std_errors.tolist(),
            "poisson_std_errors": self.poisson_std_errors.tolist(),
            "t_values": self.t_values.tolist(),
            "p_values": self.p_values.tolist(),
            "dispersion": self.dispersion,
            "deviance": self.deviance,
            "null_deviance": self.null_deviance,
            "pseudo_r2": self.pseudo_r2,
            "poisson_loglik": self.poisson_loglik,
            "n": self.n,
            "p": self.p,
            "iterations": self.iterations,
        }


def poisson_deviance(y, mu) -> float:
    y = np.asarray(y, dtype=float)
    return float(2.0 * np.sum(xlogy(y, y) - xlogy(y, mu) - (y - mu)))


def poisson_loglik(y, mu) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.sum(xlogy(y, mu) - mu - gammaln(y + 1.0)))


def check_rank(X, names) -> None:
    """Raise naming the columns that are linear combinations of earlier ones."""
    _, R, piv = qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    tol = d.max() * max(X.shape) * np.finfo(float).eps if d.size else 0.0
    rank = int(np.sum(d > tol))
    if rank < X.shape[1]:
        dropped = sorted(int(i) for i in piv[rank:])
        raise RegressionError(
            "design matrix is rank deficient; collinear columns: " + ", ".join(names[i] for i in dropped))


def glm_quasipoisson(y, X, names=None, tol: float = GLM_TOL, max_iter: int = GLM_MAX_ITER) -> RegressionFit:
    """Fit ``log E[y] = X b`` with variance ``phi * mu``.

    Coefficients are the Poisson maximum-likelihood estimates. The
    dispersion ``phi`` is Pearson's chi-square over ``n - p`` and scales the
    Poisson standard errors by ``sqrt(phi)``. ``X`` should contain an
    intercept column; the null deviance is that of the intercept-only fit.

    Raises
    ------
    RegressionError
        For negative or non-integer counts or a rank-deficient design.
    ConvergenceError
        If IRLS does not converge; carries the per-iteration trace.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n, p = X.shape
    names = tuple(names) if names is not None else tuple(f"x{j}" for j in range(p))
    if len(names) != p:
        raise RegressionError("names do not match design columns")
    if y.shape != (n,):
        raise RegressionError("y and X disagree on n")
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise RegressionError("response must be nonnegative integer counts")
    if n <= p:
        raise RegressionError("need more observations than coefficients")
    check_rank(X, names)

    mu = y + 0.1 * y.mean() + 0.1
    eta = np.log(mu)
    beta = np.zeros(p)
    dev = poisson_deviance(y, mu)
    trace = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        z = eta + (y - mu) / mu
        sw = np.sqrt(mu)
        new, *_ = np.linalg.lstsq(X * sw[:, None], z * sw, rcond=None)
        new_eta = X @ new
        new_dev = poisson_deviance(y, np.exp(new_eta))
        # step-halving guards against overshoot from poor starts
        halvings = 0
        while it > 1 and (not np.isfinite(new_dev) or new_dev > dev * (1 + 1e-12) + 1e-12) and halvings < 30:
            new = 0.5 * (new + beta)
            new_eta = X @ new
            new_dev = poisson_deviance(y, np.exp(new_eta))
            halvings += 1
        change = np.max(np.abs(new - beta) / np.maximum(np.abs(new), 1e-8)) if it > 1 else np.inf
        trace.append((it, float(new_dev), float(change)))
        beta, eta, dev = new, new_eta, new_dev
        mu = np.exp(eta)
        if change < tol:
            converged = True
            break
    if not converged:
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations", trace)

    info = X.T @ (X * mu[:, None])
    cov = np.linalg.inv(info)
    se_pois = np.sqrt(np.diag(cov))
    phi = float(np.sum((y - mu) ** 2 / mu) / (n - p))
    mu0 = np.full(n, y.mean())
    null_dev = poisson_deviance(y, mu0)
    pseudo = 1.0 - dev / null_dev if null_dev > 0 else float("nan")
    return RegressionFit(names, beta, math.sqrt(phi) * se_pois, phi, dev, null_dev, pseudo,
                         poisson_loglik(y, mu), n, p, se_pois, it, X, y)


def pseudo_r2_vs_baseline(fit: RegressionFit, baseline: RegressionFit) -> float:
    """``1 - D(fit) / D(baseline)`` for fits on the same response."""
    if fit.n != baseline.n:
        raise RegressionError("fits have different numbers of observations")
    if fit.y is not None and baseline.y is not None and not np.array_equal(fit.y, baseline.y):
        raise RegressionError("fits have different responses")
    if baseline.deviance == 0:
        return 0.0 if fit.deviance == 0 else float("-inf")
    return 1.0 - fit.deviance / baseline.deviance


def rate_ratio(coefficient: float) -> float:
    """Multiplicative change in expected counts per unit change, ``exp(|b|)``."""
    return math.exp(abs(coefficient))


def stars(p_value: float) -> str:
    if p_value < 0.001:
        return "***"
    if p_value < 0.01:
        return "**"
    if p_value < 0.05:
        return "*"
    return ""


def coefficient_table(fit: RegressionFit):
    """Rows of ``(name, estimate, std_error, t, p, stars)``."""
    return [
        (name, float(b), float(se), float(t), float(pv), stars(pv))
        for name, b, se, t, pv in zip(fit.names, fit.coefficients, fit.std_errors, fit.t_values, fit.p_values)
    ]


def effect_curve(fit: RegressionFit, vary: str, at=(0.1, 0.5, 0.9), sweep: str = None,
                 grid=None, points: int = 50):
    """Expected counts along ``sweep`` with ``vary`` held at quantiles.

    Every other covariate sits at its sample median; the intercept column
    (all ones) is left alone. Returns a list of ``(quantile, vary_value,
    sweep_value, expected)`` tuples.

    Raises
    ------
    RegressionError
        If ``vary`` or ``sweep`` is not a fitted covariate.
    """
    if fit.X is None:
        raise RegressionError("fit does not carry its design matrix")
    for name in (vary, sweep):
        if name is not None and name not in fit.names:
            raise RegressionError(f"unknown covariate {name!r}")
    X = fit.X
    base = np.median(X, axis=0)
    if sweep is None:
        grid = np.array([0.0])
    elif grid is None:
        col = X[:, fit.names.index(sweep)]
        grid = np.linspace(col.min(), col.max(), points)
    grid = np.asarray(grid, dtype=float)
    jv = fit.names.index(vary)
    rows = []
    for q in at:
        v = float(np.quantile(X[:, jv], q))
        for s in grid:
            x = base.copy()
            x[jv] = v
            if sweep is not None:
                x[fit.names.index(sweep)] = s
            rows.append((float(q), v, float(s), float(np.exp(x @ fit.coefficients))))
    return rows
