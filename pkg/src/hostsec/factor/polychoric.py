"""Ordinal datasets, latent thresholds and polychoric correlation matrices."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .. import _backend

log = logging.getLogger(__name__)

RHO_BOUND = 0.999
RHO_XTOL = 1e-10
CONTINUITY = 0.5
MIN_EIGENVALUE = 1e-6


class FactorError(ValueError):
    """Invalid input to a factor-analysis step."""


class ConstantColumn(FactorError):
    pass


class DegeneratePair(FactorError):
    pass


@dataclass(frozen=True)
class OrdinalDataset:
    """``n`` observations of ``p`` ordinal variables coded 0..k-1.

    Parameters
    ----------
    columns : tuple of str
    codes : ndarray, shape (n, p)
    category_counts : tuple of int
    """

    columns: tuple
    codes: np.ndarray
    category_counts: tuple

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2:
            raise FactorError("codes must be an n x p matrix")
        n, p = codes.shape
        if len(self.columns) != p or len(self.category_counts) != p:
            raise FactorError("columns, codes and category_counts disagree on p")
        if n < 2:
            raise FactorError("need at least 2 observations")
        if not np.issubdtype(codes.dtype, np.integer):
            if not np.all(codes == np.round(codes)):
                raise FactorError("codes must be integers")
        codes = codes.astype(np.int32)
        for j, (name, k) in enumerate(zip(self.columns, self.category_counts)):
            col = codes[:, j]
            if col.min() < 0 or col.max() >= k:
                raise FactorError(f"column {name!r}: codes outside 0..{k - 1}")
            if col.min() == col.max():
                raise ConstantColumn(f"column {name!r} is constant")
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "category_counts", tuple(int(k) for k in self.category_counts))

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def p(self) -> int:
        return self.codes.shape[1]

    @classmethod
    def from_codes(cls, codes, columns=None, category_counts=None):
        codes = np.asarray(codes)
        p = codes.shape[1]
        if columns is None:
            columns = tuple(f"V{j + 1}" for j in range(p))
        if category_counts is None:
            category_counts = tuple(int(codes[:, j].max()) + 1 for j in range(p))
        return cls(tuple(columns), codes, tuple(category_counts))

    def compact(self) -> "OrdinalDataset":
        """Drop unobserved categories so every column uses 0..m-1 without gaps."""
        codes = np.empty_like(self.codes)
        counts = []
        for j in range(self.p):
            levels, inv = np.unique(self.codes[:, j], return_inverse=True)
            codes[:, j] = inv
            counts.append(len(levels))
        return OrdinalDataset(self.columns, codes, tuple(counts))

    def reversed(self, column) -> "OrdinalDataset":
        """Copy with the category order of one column flipped."""
        j = self.columns.index(column) if isinstance(column, str) else int(column)
        codes = self.codes.copy()
        codes[:, j] = self.category_counts[j] - 1 - codes[:, j]
        return OrdinalDataset(self.columns, codes, self.category_counts)


@dataclass(frozen=True)
class ThresholdSet:
    columns: tuple
    values: tuple  # per column, tuple of increasing floats

    def __post_init__(self):
        for name, t in zip(self.columns, self.values):
            t = np.asarray(t, dtype=float)
            if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
                raise FactorError(f"thresholds of {name!r} must be finite and strictly increasing")

    def padded(self) -> np.ndarray:
        width = max((len(t) for t in self.values), default=0)
        out = np.zeros((len(self.values), max(width, 1)))
        for i, t in enumerate(self.values):
            out[i, : len(t)] = t
        return out


@dataclass(frozen=True)
class CorrelationMatrix:
    values: np.ndarray
    smoothed: bool = False
    min_eigenvalue_before: float = 1.0
    columns: tuple = ()
    status: np.ndarray = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.values.shape[0]


def empirical_thresholds(codes, category_count: int) -> np.ndarray:
    """Normal quantiles of the cumulative category proportions.

    Raises
    ------
    ConstantColumn
        If fewer than two categories are observed.
    FactorError
        If an interior category is empty, which would make two thresholds
        coincide. Use :meth:`OrdinalDataset.compact` first.
    """
    codes = np.asarray(codes)
    counts = np.bincount(codes, minlength=category_count)[:category_count]
    if np.count_nonzero(counts) < 2:
        raise ConstantColumn("constant column has no thresholds")
    cum = np.cumsum(counts)[:-1] / codes.size
    if np.any(cum <= 0) or np.any(cum >= 1) or np.any(np.diff(cum) <= 0):
        raise FactorError("empty category; compact the dataset before estimating thresholds")
    return ndtri(cum)


def dataset_thresholds(data: OrdinalDataset) -> ThresholdSet:
    return ThresholdSet(
        data.columns,
        tuple(tuple(empirical_thresholds(data.codes[:, j], data.category_counts[j])) for j in range(data.p)),
    )


def _as_codes(x):
    x = np.asarray(x)
    if x.ndim != 1:
        raise FactorError("expected a 1-D code vector")
    levels, inv = np.unique(x, return_inverse=True)
    if len(levels) < 2:
        raise ConstantColumn("constant column")
    return inv.astype(np.int32), len(levels)


def polychoric_rho(x, y, correction: float = CONTINUITY, backend=None, return_status=False):
    """Two-step maximum-likelihood polychoric correlation of two code vectors.

    Categories are taken as the sorted distinct values of each vector.
    The estimate does not depend on argument order.

    Returns
    -------
    float, or ``(float, int)`` with ``return_status``. Status 0 means an
    interior optimum, 1 and 2 mean the result sits on the lower or upper
    bound of ``[-0.999, 0.999]``.
    """
    xc, nx = _as_codes(x)
    yc, ny = _as_codes(y)
    if xc.size != yc.size:
        raise FactorError("code vectors differ in length")
    # canonical order makes the floating-point path identical for (x, y) and (y, x)
    if (ny, yc.tobytes()) < (nx, xc.tobytes()):
        xc, yc, nx, ny = yc, xc, ny, nx
    k = _backend.load(backend) if backend else _backend.kernels
    tx = empirical_thresholds(xc, nx)
    ty = empirical_thresholds(yc, ny)
    tab = k.contingency(xc, yc, nx, ny)
    tab[tab == 0.0] = correction
    rho, status = k.polychoric_table(tab, tx, ty, -RHO_BOUND, RHO_BOUND, RHO_XTOL)
    if not np.isfinite(rho):
        raise DegeneratePair("degenerate contingency table")
    return (float(rho), int(status)) if return_status else float(rho)


def smooth_correlation(R, floor: float = MIN_EIGENVALUE, max_iter: int = 100):
    """Clip eigenvalues at ``floor`` and rescale to a unit diagonal.

    Returns ``(smoothed, min_eigenvalue_before, changed)``. The clip and
    rescale pair is repeated until the smallest eigenvalue clears the floor.
    """
    R = np.asarray(R, dtype=float)
    w = np.linalg.eigvalsh(R)
    before = float(w[0])
    if before >= floor:
        return R, before, False
    S = R
    for _ in range(max_iter):
        w, V = np.linalg.eigh(S)
        if w[0] >= floor:
            break
        # clip slightly above the floor so the rescale keeps it clear
        w = np.maximum(w, floor * 1.5)
        S = (V * w) @ V.T
        d = np.sqrt(np.diag(S))
        S = S / np.outer(d, d)
        S = (S + S.T) / 2
        np.fill_diagonal(S, 1.0)
    else:
        raise FactorError("eigenvalue smoothing did not converge")
    return S, before, True


def correlation_from_thresholds(data: OrdinalDataset, thresholds: ThresholdSet,
                                correction: float = CONTINUITY, backend=None):
    """Raw pairwise polychoric matrix and fit status for fixed thresholds."""
    k = _backend.load(backend) if backend else _backend.kernels
    codes_t = np.ascontiguousarray(data.codes.T, dtype=np.int32)
    return k.polychoric_codes(codes_t, np.asarray(data.category_counts, dtype=np.int32),
                              thresholds.padded(), correction, -RHO_BOUND, RHO_BOUND, RHO_XTOL)


def polychoric_matrix(data: OrdinalDataset, correction: float = CONTINUITY,
                      smooth: bool = True, backend=None) -> CorrelationMatrix:
    """Pairwise polychoric correlations, smoothed to positive definiteness.

    Empty categories are collapsed before thresholds are estimated.
    """
    if data.p == 1:
        return CorrelationMatrix(np.eye(1), False, 1.0, data.columns, np.zeros((1, 1), np.int8))
    data = data.compact()
    th = dataset_thresholds(data)
    R, status = correlation_from_thresholds(data, th, correction, backend)
    bad = np.argwhere(status < 0)
    if bad.size:
        i, j = bad[0]
        raise DegeneratePair(f"degenerate table for pair ({data.columns[i]!r}, {data.columns[j]!r})")
    clamped = int(np.count_nonzero(np.triu(status > 0, 1)))
    if clamped:
        log.info("%d variable pairs hit the correlation bound", clamped)
    if not smooth:
        return CorrelationMatrix(R, False, float(np.linalg.eigvalsh(R)[0]), data.columns, status)
    S, before, changed = smooth_correlation(R)
    if changed:
        log.warning("correlation matrix not positive definite (min eigenvalue %.3g); smoothed", before)
    return CorrelationMatrix(S, changed, before, data.columns, status)
