"""Factor extraction, varimax rotation and variance accounting."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .polychoric import CorrelationMatrix, FactorError

log = logging.getLogger(__name__)

U_BOUNDS = (0.001, 1.0)
MINRES_FTOL = 1e-9
MAX_ITER = 500
VARIMAX_TOL = 1e-10


@dataclass(frozen=True)
class Extraction:
    loadings: np.ndarray
    uniquenesses: np.ndarray
    objective: float
    iterations: int
    converged: bool
    heywood: tuple = ()  # indices of variables at the lower uniqueness bound
    method: str = "minres"


def _values(R):
    return R.values if isinstance(R, CorrelationMatrix) else np.asarray(R, dtype=float)


def _top_k(M, k):
    w, V = np.linalg.eigh(M)
    w, V = w[::-1][:k], V[:, ::-1][:, :k]
    return V * np.sqrt(np.maximum(w, 0.0))


def off_diagonal_residual(R, loadings) -> float:
    """Sum over ``i < j`` of squared residual correlations."""
    R = _values(R)
    E = R - loadings @ loadings.T
    return float(np.sum(np.triu(E, 1) ** 2))


def canonical_columns(L):
    """Order columns by descending sum of squares and make each column's
    largest-magnitude entry positive. Returns ``(L, order, signs)``."""
    L = np.asarray(L, dtype=float)
    ss = np.sum(L ** 2, axis=0)
    order = np.argsort(-ss, kind="stable")
    L = L[:, order]
    signs = np.ones(L.shape[1])
    for j in range(L.shape[1]):
        i = int(np.argmax(np.abs(L[:, j])))
        if L[i, j] < 0:
            signs[j] = -1.0
    return L * signs, order, signs


def _start(R):
    try:
        inv = np.linalg.inv(R)
        u = 1.0 / np.diag(inv)
    except np.linalg.LinAlgError:
        u = 1.0 / np.diag(np.linalg.pinv(R))
    return np.clip(u, *U_BOUNDS)


def extract_minres(R, k: int, max_iter: int = MAX_ITER, ftol: float = MINRES_FTOL) -> Extraction:
    """Minimum-residual extraction of ``k`` factors.

    Uniquenesses are optimized inside ``[0.001, 1]``. For fixed ``u`` the
    loadings are the top-``k`` eigenpairs of ``R - diag(u)``; the search
    minimizes the squared residual of that reduced matrix, whose gradient
    in ``u`` is ``-2 diag(residual)``. Where no bound is active this matches
    the off-diagonal least-squares criterion, and the reported objective
    is always the off-diagonal one.

    Raises
    ------
    FactorError
        If ``k`` is not in ``1..p-1``.
    """
    R = _values(R)
    p = R.shape[0]
    if not 1 <= k < p:
        raise FactorError(f"need 1 <= k < p, got k={k}, p={p}")

    def fg(u):
        M = R - np.diag(u)
        L = _top_k(M, k)
        E = M - L @ L.T
        return float(np.sum(E ** 2)), -2.0 * np.diag(E)

    res = minimize(fg, _start(R), jac=True, method="L-BFGS-B", bounds=[U_BOUNDS] * p,
                   options={"maxiter": max_iter, "ftol": ftol * 1e-3, "gtol": 1e-12})
    u = np.clip(res.x, *U_BOUNDS)
    L, _, _ = canonical_columns(_top_k(R - np.diag(u), k))
    # report uniqueness consistent with the model so communality + u = 1
    heywood = tuple(int(i) for i in np.flatnonzero(u <= U_BOUNDS[0] * (1 + 1e-9)))
    if heywood:
        log.warning("Heywood case: uniqueness at lower bound for variables %s", heywood)
    return Extraction(L, u, off_diagonal_residual(R, L), int(res.nit), bool(res.success), heywood)


def extract_principal_axis(R, k: int, max_iter: int = MAX_ITER, tol: float = 1e-9) -> Extraction:
    """Iterated principal-axis factoring starting from squared multiple correlations."""
    R = _values(R)
    p = R.shape[0]
    if not 1 <= k < p:
        raise FactorError(f"need 1 <= k < p, got k={k}, p={p}")
    h = 1.0 - _start(R)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        M = R.copy()
        np.fill_diagonal(M, h)
        L = _top_k(M, k)
        h_new = np.clip(np.sum(L ** 2, axis=1), 1.0 - U_BOUNDS[1], 1.0 - U_BOUNDS[0])
        if np.max(np.abs(h_new - h)) < tol:
            h = h_new
            converged = True
            break
        h = h_new
    M = R.copy()
    np.fill_diagonal(M, h)
    L, _, _ = canonical_columns(_top_k(M, k))
    u = 1.0 - h
    heywood = tuple(int(i) for i in np.flatnonzero(u <= U_BOUNDS[0] * (1 + 1e-9)))
    return Extraction(L, u, off_diagonal_residual(R, L), it, converged, heywood, "principal_axis")


def varimax_criterion(L) -> float:
    L2 = np.asarray(L) ** 2
    p = L2.shape[0]
    return float(np.sum(p * np.sum(L2 ** 2, axis=0) - np.sum(L2, axis=0) ** 2) / p ** 2)


def varimax(loadings, normalize: bool = True, tol: float = VARIMAX_TOL, max_sweeps: int = 1000):
    """Orthogonal varimax rotation by pairwise planar rotations.

    Returns ``(rotated, T)`` with ``rotated = loadings @ T``. With
    ``normalize`` rows are scaled to unit length during the search
    (Kaiser normalization) and scaled back afterwards.
    """
    A = np.array(loadings, dtype=float)
    p, k = A.shape
    T = np.eye(k)
    if k < 2:
        return A, T
    h = np.sqrt(np.sum(A ** 2, axis=1))
    if normalize:
        scale = np.where(h > 0, h, 1.0)
        A = A / scale[:, None]
    crit = varimax_criterion(A)
    for _ in range(max_sweeps):
        for a in range(k - 1):
            for b in range(a + 1, k):
                x, y = A[:, a], A[:, b]
                u = x * x - y * y
                v = 2.0 * x * y
                num = 2.0 * np.sum(u * v) - 2.0 * np.sum(u) * np.sum(v) / p
                den = np.sum(u * u - v * v) - (np.sum(u) ** 2 - np.sum(v) ** 2) / p
                phi = np.arctan2(num, den) / 4.0
                if abs(phi) < 1e-15:
                    continue
                c, s = np.cos(phi), np.sin(phi)
                G = np.array([[c, -s], [s, c]])
                A[:, [a, b]] = A[:, [a, b]] @ G
                T[:, [a, b]] = T[:, [a, b]] @ G
        new = varimax_criterion(A)
        if new - crit < tol:
            crit = new
            break
        crit = new
    rotated = np.asarray(loadings, dtype=float) @ T
    return rotated, T


def variance_table(loadings):
    """Sums of squared loadings, proportions of ``p`` and their running total."""
    L = np.asarray(loadings, dtype=float)
    ss = np.sum(L ** 2, axis=0)
    prop = ss / L.shape[0]
    return ss, prop, np.cumsum(prop)


def primary_factor(loadings, cutoff: float = 0.4) -> np.ndarray:
    """Column of each row's largest absolute loading, or -1 below ``cutoff``."""
    A = np.abs(np.asarray(loadings, dtype=float))
    best = np.argmax(A, axis=1)
    return np.where(A[np.arange(A.shape[0]), best] >= cutoff, best, -1)
