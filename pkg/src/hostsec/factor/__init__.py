"""Polychoric exploratory factor analysis."""
from .extract import (
    Extraction,
    extract_minres,
    extract_principal_axis,
    off_diagonal_residual,
    primary_factor,
    variance_table,
    varimax,
    varimax_criterion,
)
from .model import FactorModel, factor_scores, fit_factor_model, null_eigenvalues, parallel_analysis
from .polychoric import (
    ConstantColumn,
    CorrelationMatrix,
    DegeneratePair,
    FactorError,
    OrdinalDataset,
    ThresholdSet,
    dataset_thresholds,
    empirical_thresholds,
    polychoric_matrix,
    polychoric_rho,
    smooth_correlation,
)
