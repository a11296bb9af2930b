"""Hub-weighted graphical lasso for Gaussian graphical models with hub nodes."""

__version__ = "0.1.0"

from .glasso import FitResult, PenaltyMatrix, SolverConfig, fit_weighted_glasso, kkt_residual  # noqa: E402
from .weights import InitialEstimator, WeightSpec, adaptive_weights, hw_weights, initial_estimate  # noqa: E402

__all__ = [
    "FitResult",
    "InitialEstimator",
    "PenaltyMatrix",
    "SolverConfig",
    "WeightSpec",
    "adaptive_weights",
    "fit_weighted_glasso",
    "hw_weights",
    "initial_estimate",
    "kkt_residual",
]
