"""Initial precision estimates and hub-aware penalty weights.

Weights use ``numpy.inf`` to mark entries that must be zero in the final
estimate (a zero in the initial estimate, or an isolated row when the
row-sum factor is active).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import DataError, NotPositiveDefiniteError
from .glasso import PenaltyMatrix, SolverConfig, fit_weighted_glasso

RIDGE_MIN_EIGENVALUE = 1e-3
# Scale-equivariant default shift, relative to the average variance.
RIDGE_SCALE = 2.0


@dataclass(frozen=True)
class InitialEstimator:
    """How to build the initial estimate used for the weights.

    ``kind`` is ``"inverse"``, ``"ridge"`` or ``"glasso"``. ``alpha`` is the
    ridge shift (``None`` picks one automatically); ``lam0`` the uniform
    graphical-lasso penalty (``None`` selects it by BIC).
    """

    kind: str = "ridge"
    alpha: float | None = None
    lam0: float | None = None

    def __post_init__(self):
        if self.kind not in ("inverse", "ridge", "glasso"):
            raise ValueError(f"unknown initial estimator {self.kind!r}")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("ridge alpha must be positive")
        if self.lam0 is not None and not self.lam0 > 0:
            raise ValueError("glasso lam0 must be positive")

    @classmethod
    def parse(cls, text: str) -> InitialEstimator:
        """Parse ``inverse``, ``ridge``, ``ridge:0.5``, ``glasso`` or ``glasso:0.1``."""
        kind, _, value = text.partition(":")
        kind = {"direct_inverse": "inverse"}.get(kind, kind)
        if not value:
            return cls(kind)
        if kind == "ridge":
            return cls(kind, alpha=float(value))
        if kind == "glasso":
            return cls(kind, lam0=float(value))
        raise ValueError(f"{kind} takes no parameter")

    def describe(self) -> str:
        if self.kind == "ridge":
            return f"ridge:{self.alpha}" if self.alpha is not None else "ridge:auto"
        if self.kind == "glasso":
            return f"glasso:{self.lam0}" if self.lam0 is not None else "glasso:bic"
        return "inverse"


@dataclass(frozen=True)
class WeightSpec:
    gamma1: float = 1.0
    gamma2: float = 1.0

    def __post_init__(self):
        for g in (self.gamma1, self.gamma2):
            if not (np.isfinite(g) and g >= 0):
                raise ValueError("gamma1 and gamma2 must be finite and nonnegative")


def default_ridge_alpha(s) -> float:
    """Ridge shift for the initial estimate: ``2 * mean(diag(s))``.

    Raised if needed so that ``lambda_min(s + alpha I) >= 1e-3``.
    """
    s = np.asarray(s, dtype=float)
    lo, _ = linalg.eigen_extremes(s)
    return max(RIDGE_SCALE * float(np.mean(np.diag(s))), RIDGE_MIN_EIGENVALUE - lo)


def initial_estimate(s, init: InitialEstimator | str = "ridge", cfg: SolverConfig | None = None,
                     n: int | None = None) -> tuple[np.ndarray, dict]:
    """Initial precision estimate and a record of how it was made.

    ``n`` is only needed for the BIC choice of ``lam0`` in the glasso kind.
    """
    if isinstance(init, str):
        init = InitialEstimator.parse(init)
    s = linalg.as_symmetric(s, name="s")
    p = s.shape[0]
    if init.kind == "inverse":
        if n is not None and n <= p:
            raise DataError(f"direct inverse needs n > p (n={n}, p={p}); use the ridge initial estimate")
        try:
            _, theta = linalg.chol_logdet_inverse(s)
        except NotPositiveDefiniteError as exc:
            raise NotPositiveDefiniteError(
                "sample covariance is singular; use the ridge initial estimate instead"
            ) from exc
        return theta, {"init": "inverse"}
    if init.kind == "ridge":
        alpha = init.alpha if init.alpha is not None else default_ridge_alpha(s)
        _, theta = linalg.chol_logdet_inverse(s + alpha * np.eye(p))
        return theta, {"init": "ridge", "alpha": alpha}

    # glasso initial estimate: uniform penalty, lam0 fixed or chosen by BIC
    if init.lam0 is not None:
        fit = fit_weighted_glasso(s, PenaltyMatrix.uniform(p, init.lam0), cfg)
        return fit.theta, {"init": "glasso", "lam0": init.lam0}
    if n is None:
        raise DataError("selecting lam0 by BIC needs the sample size n")
    from .selection import default_grid, select_lambda

    w = uniform_weights(p)
    fit, report = select_lambda(s, w, default_grid(s, w), n, cfg)
    return fit.theta, {"init": "glasso", "lam0": report.chosen_lambda}


def uniform_weights(p: int) -> np.ndarray:
    w = np.ones((p, p))
    np.fill_diagonal(w, 0.0)
    return w


def _safe_pow(x: np.ndarray, gamma: float) -> np.ndarray:
    # x ** 0 is 1 even where x == 0 (exponent zero switches the factor off).
    if gamma == 0:
        return np.ones_like(x)
    return x ** gamma


def hw_weights(theta_tilde, spec: WeightSpec | None = None, gamma1: float | None = None,
               gamma2: float | None = None) -> np.ndarray:
    """Hub weights from an initial precision estimate.

    ``w_ij = 1 / (|t_ij|^gamma1 * (r_i * r_j)^gamma2)`` for ``i != j`` where
    ``r_i = sum_{k != i} |t_ik|``, and ``w_ii = 0``. A zero denominator gives
    ``inf``.
    """
    if spec is None:
        spec = WeightSpec(1.0 if gamma1 is None else gamma1, 1.0 if gamma2 is None else gamma2)
    t = np.abs(linalg.as_symmetric(theta_tilde, name="theta_tilde"))
    off = t.copy()
    np.fill_diagonal(off, 0.0)
    rowsum = off.sum(axis=1)
    denom = _safe_pow(off, spec.gamma1) * _safe_pow(np.outer(rowsum, rowsum), spec.gamma2)
    with np.errstate(divide="ignore", over="ignore"):
        w = np.where(denom > 0, 1.0 / np.where(denom > 0, denom, 1.0), np.inf)
    np.fill_diagonal(w, 0.0)
    return _mirror_upper(w)


def _mirror_upper(w: np.ndarray) -> np.ndarray:
    # Upper triangle mirrored so infinite marks are symmetric bit for bit.
    return np.triu(w) + np.triu(w, 1).T


def adaptive_weights(theta_tilde, gamma1: float = 1.0) -> np.ndarray:
    """Adaptive graphical lasso weights ``1 / |t_ij|^gamma1``."""
    return hw_weights(theta_tilde, WeightSpec(gamma1, 0.0))


def write_weights_csv(path, w, labels=None) -> None:
    linalg.write_matrix_csv(path, w, labels)


def read_weights_csv(path):
    w, labels = linalg.read_matrix_csv(path, symmetric=True, allow_inf=True)
    return w, labels
