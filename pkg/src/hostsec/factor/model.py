"""Factor scores, parallel analysis and the end-to-end factor fit."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .extract import canonical_columns, extract_minres, extract_principal_axis, variance_table, varimax
from .polychoric import (
    CorrelationMatrix,
    FactorError,
    OrdinalDataset,
    correlation_from_thresholds,
    dataset_thresholds,
    polychoric_matrix,
    smooth_correlation,
)

log = logging.getLogger(__name__)

PA_REPLICATES = 50
PA_QUANTILE = 0.95


@dataclass(frozen=True)
class FactorModel:
    columns: tuple
    loadings: np.ndarray
    uniquenesses: np.ndarray
    rotation: np.ndarray
    ss_loadings: np.ndarray
    proportion_var: np.ndarray
    cumulative_var: np.ndarray
    scores: np.ndarray = None
    heywood: tuple = ()
    extraction: str = "minres"
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.loadings.shape[1]

    @property
    def names(self):
        prefix = "MR" if self.extraction == "minres" else "PA"
        return tuple(f"{prefix}{j + 1}" for j in range(self.k))


def standardize_codes(codes) -> np.ndarray:
    Z = np.asarray(codes, dtype=float)
    sd = Z.std(axis=0)
    if np.any(sd == 0):
        raise FactorError("cannot standardize a constant column")
    return (Z - Z.mean(axis=0)) / sd


def factor_scores(data: OrdinalDataset, R, loadings, method: str = "regression", uniquenesses=None):
    """Per-observation factor score estimates.

    Parameters
    ----------
    method : {"regression", "bartlett"}
        Regression scores are ``Z R^-1 L``. Bartlett scores need
        ``uniquenesses`` and are ``Z U^-1 L (L' U^-1 L)^-1``.

    Raises
    ------
    FactorError
        If ``R`` is numerically singular; smooth it first.
    """
    Rv = R.values if isinstance(R, CorrelationMatrix) else np.asarray(R, dtype=float)
    L = np.asarray(loadings, dtype=float)
    Z = standardize_codes(data.codes)
    if method == "regression":
        if np.linalg.cond(Rv) > 1e12:
            raise FactorError("correlation matrix is singular; apply eigenvalue smoothing")
        W = np.linalg.solve(Rv, L)
    elif method == "bartlett":
        if uniquenesses is None:
            raise FactorError("bartlett scores need uniquenesses")
        Ui = L / np.asarray(uniquenesses, dtype=float)[:, None]
        W = Ui @ np.linalg.inv(L.T @ Ui)
    else:
        raise FactorError(f"unknown score method {method!r}")
    S = Z @ W
    # exact zero mean despite rounding in the standardization
    return S - S.mean(axis=0)


def null_eigenvalues(data: OrdinalDataset, replicates: int = PA_REPLICATES, seed=0,
                     correction: float = 0.5, backend=None) -> np.ndarray:
    """Eigenvalues of polychoric matrices of column-permuted copies.

    Permutation keeps every marginal, so thresholds are shared with the
    observed data. Replicate ``r`` draws from child ``r`` of the seed
    sequence, so results do not depend on execution order.
    """
    data = data.compact()
    th = dataset_thresholds(data)
    children = np.random.SeedSequence(seed).spawn(replicates)
    out = np.empty((replicates, data.p))
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        codes = np.column_stack([rng.permutation(data.codes[:, j]) for j in range(data.p)])
        null = OrdinalDataset(data.columns, codes, data.category_counts)
        R, _ = correlation_from_thresholds(null, th, correction, backend)
        R, _, _ = smooth_correlation(R)
        out[r] = np.sort(np.linalg.eigvalsh(R))[::-1]
    return out


def parallel_analysis(data: OrdinalDataset, replicates: int = PA_REPLICATES, quantile: float = PA_QUANTILE,
                      seed=0, backend=None, R=None, return_details: bool = False):
    """Number of factors whose observed eigenvalue beats the null quantile.

    Counting stops at the first rank that does not exceed its null quantile.
    """
    if R is None:
        R = polychoric_matrix(data, backend=backend)
    observed = np.sort(np.linalg.eigvalsh(R.values))[::-1]
    null = null_eigenvalues(data, replicates, seed, backend=backend)
    cut = np.quantile(null, quantile, axis=0)
    above = observed > cut
    k = int(np.argmin(above)) if not above.all() else len(above)
    if return_details:
        return k, observed, cut
    return k


def fit_factor_model(data: OrdinalDataset, k=None, *, replicates: int = PA_REPLICATES,
                     quantile: float = PA_QUANTILE, seed=0, extraction: str = "minres",
                     scores: str = "regression", rotate: bool = True, backend=None) -> tuple:
    """Correlation, factor count, extraction, rotation and scores in one call.

    ``k=None`` selects the count by parallel analysis. Returns
    ``(FactorModel, CorrelationMatrix)``.
    """
    R = polychoric_matrix(data, backend=backend)
    meta = {"smoothed": R.smoothed, "min_eigenvalue_before": R.min_eigenvalue_before}
    if k is None:
        k, observed, cut = parallel_analysis(data, replicates, quantile, seed, backend, R, True)
        meta.update(parallel_k=k, observed_eigenvalues=observed.tolist(), null_quantile=cut.tolist())
        if k < 1:
            raise FactorError("parallel analysis retained no factors")
    if extraction == "minres":
        ext = extract_minres(R, k)
    elif extraction == "principal_axis":
        ext = extract_principal_axis(R, k)
    else:
        raise FactorError(f"unknown extraction {extraction!r}")
    meta.update(objective=ext.objective, iterations=ext.iterations, converged=ext.converged)
    if rotate:
        L, T = varimax(ext.loadings)
        L, order, signs = canonical_columns(L)
        T = T[:, order] * signs
    else:
        L, T = ext.loadings, np.eye(k)
    ss, prop, cum = variance_table(L)
    S = factor_scores(data, R, L, scores, ext.uniquenesses)
    model = FactorModel(data.columns, L, ext.uniquenesses, T, ss, prop, cum, S,
                        ext.heywood, extraction, meta)
    return model, R
