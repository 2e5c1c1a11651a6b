"""Provider fixed effects and quasi-Poisson abuse models."""
from .fixed_effects import FixedEffectsFit, RegressionError, fixed_effects_fit
from .glm import (
    ConvergenceError,
    RegressionFit,
    coefficient_table,
    effect_curve,
    glm_quasipoisson,
    poisson_deviance,
    pseudo_r2_vs_baseline,
    rate_ratio,
    stars,
)
