"""Provider fixed-effects regression of factor scores."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


class RegressionError(ValueError):
    pass


@dataclass(frozen=True)
class FixedEffectsFit:
    r_squared: float
    adj_r_squared: float
    residual_std_error: float
    group_count: int
    n: int
    intercept: float
    ss_between: float = 0.0
    ss_within: float = 0.0
    ss_total: float = 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def fixed_effects_fit(scores, provider_ids) -> FixedEffectsFit:
    """Regress ``scores`` on one dummy per provider via group means.

    The intercept is the mean of the first provider in sorted order, which
    is the reference level under treatment coding.

    Raises
    ------
    RegressionError
        With fewer than two providers, no residual degrees of freedom, or
        zero total variance.
    """
    y = np.asarray(scores, dtype=float)
    ids = np.asarray(provider_ids)
    if y.ndim != 1 or ids.shape != y.shape:
        raise RegressionError("scores and provider_ids must be equal-length vectors")
    levels, g = np.unique(ids, return_inverse=True)
    G, n = len(levels), y.size
    if G < 2:
        raise RegressionError("fixed effects need at least two providers")
    if n <= G:
        raise RegressionError("no residual degrees of freedom (n <= number of providers)")
    counts = np.bincount(g, minlength=G)
    means = np.bincount(g, weights=y, minlength=G) / counts
    grand = y.mean()
    sst = float(np.sum((y - grand) ** 2))
    if sst <= 0.0:
        raise RegressionError("scores have zero variance")
    ssw = float(np.sum((y - means[g]) ** 2))
    ssb = float(np.sum(counts * (means - grand) ** 2))
    # the smaller share carries less cancellation error
    r2 = ssb / sst if ssb <= ssw else 1.0 - ssw / sst
    r2 = min(max(r2, 0.0), 1.0)
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - G)
    return FixedEffectsFit(r2, adj, float(np.sqrt(ssw / (n - G))), G, n, float(means[0]), ssb, ssw, sst)
