"""Factor-recovery metrics for comparing loading matrices."""
from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment


def congruence_matrix(A, B) -> np.ndarray:
    """Tucker's phi between every column of ``A`` and every column of ``B``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    num = A.T @ B
    den = np.sqrt(np.outer(np.sum(A ** 2, axis=0), np.sum(B ** 2, axis=0)))
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / den, 0.0)


def match_factors(A, B):
    """Pair columns of ``B`` with columns of ``A`` maximizing total ``|phi|``.

    Returns ``(order, signs)`` such that ``B[:, order] * signs`` lines up
    with ``A`` column for column.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    C = congruence_matrix(A, B)
    rows, cols = linear_sum_assignment(-np.abs(C))
    order = cols[np.argsort(rows)]
    signs = np.sign(C[np.arange(A.shape[1]), order])
    signs[signs == 0] = 1.0
    return order, signs


def tucker_congruence(A, B) -> np.ndarray:
    """Per-factor congruence after optimal column matching and sign flips."""
    order, signs = match_factors(A, B)
    C = congruence_matrix(A, np.asarray(B, dtype=float)[:, order] * signs)
    return np.diag(C).copy()
