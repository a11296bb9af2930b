"""Numerical tolerances shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # Cholesky is the only PD test; no slack is added to it.
    pd_check: float = 0.0
    inverse_residual: float = 1e-10
    # |theta_ij| above this counts as an edge when scoring estimates.
    nonzero: float = 1e-8
    kkt: float = 1e-4
    kmeans_equal_means: float = 1e-9


TOLERANCES = Tolerances()
