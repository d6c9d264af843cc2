"""Differentially private conformal prediction.

Calibrates prediction-set cutoffs from precomputed conformity scores
under epsilon-differential privacy, with finite-sample coverage
guarantees, and ships a seeded statistical harness that verifies those
guarantees by simulation.
"""

from dpcp.calibrate import (
    CalibConfig,
    Threshold,
    adjusted_quantile,
    calibrate,
    gamma_star,
    tune_m_star,
)
from dpcp.errors import InputFormatError, InternalCheckError, InvalidArgumentError
from dpcp.harness import (
    BoundReport,
    CoverageReport,
    DominanceReport,
    coverage_upper_bound,
    dp_ratio_sweep,
    max_bin_mass,
    quantile_dominance_check,
    run_coverage_experiment,
    utility_event_frequencies,
)
from dpcp.mechanism import (
    MechanismDistribution,
    QuantileQuery,
    dp_ratio,
    mechanism_weights,
    sample_private_quantile,
)
from dpcp.predict import CoverageFragment, PredictionSet, evaluate, form_set, set_size_histogram
from dpcp.scores import BinGrid, ScoreSet, discretize, softmax_score, uniform_grid

__version__ = "0.1.0"

__all__ = [
    "BinGrid",
    "BoundReport",
    "CalibConfig",
    "CoverageFragment",
    "CoverageReport",
    "DominanceReport",
    "InputFormatError",
    "InternalCheckError",
    "InvalidArgumentError",
    "MechanismDistribution",
    "PredictionSet",
    "QuantileQuery",
    "ScoreSet",
    "Threshold",
    "adjusted_quantile",
    "calibrate",
    "coverage_upper_bound",
    "discretize",
    "dp_ratio",
    "dp_ratio_sweep",
    "evaluate",
    "form_set",
    "gamma_star",
    "max_bin_mass",
    "mechanism_weights",
    "quantile_dominance_check",
    "run_coverage_experiment",
    "sample_private_quantile",
    "set_size_histogram",
    "softmax_score",
    "tune_m_star",
    "uniform_grid",
    "utility_event_frequencies",
    "__version__",
]
