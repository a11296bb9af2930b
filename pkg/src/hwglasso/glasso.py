"""Weighted graphical lasso.

Maximises ``log det(Theta) - tr(S Theta) - sum_{i != j} rho_ij |theta_ij|``
over positive definite ``Theta`` with an elementwise penalty matrix ``rho``.
The diagonal is never penalised. Entries with ``rho_ij = inf`` are hard zero
constraints and come out as exact zeros.

The solver is the column-wise block coordinate descent of Friedman, Hastie
and Tibshirani (2008): each column is a lasso problem in the working
covariance, solved by coordinate descent and warm-started between sweeps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from types import SimpleNamespace

import numpy as np
from scipy.sparse import csgraph

from . import linalg
from ._bcd import glasso_bcd, precision_from_coefficients
from .config import TOLERANCES
from .exceptions import DataError, NotPositiveDefiniteError


@dataclass(frozen=True)
class PenaltyMatrix:
    """Symmetric, nonnegative per-entry penalty; ``inf`` marks a forced zero."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DataError(f"penalty must be square, got shape {rho.shape}")
        if np.isnan(rho).any():
            raise DataError("penalty contains NaN")
        if (rho < 0).any():
            raise DataError("penalty entries must be nonnegative")
        if not np.array_equal(rho, rho.T):
            raise DataError("penalty must be symmetric")
        if np.any(np.diag(rho) != 0):
            raise DataError("diagonal penalty must be zero")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def infinite_mask(self) -> np.ndarray:
        return np.isinf(self.rho)

    @classmethod
    def uniform(cls, p: int, lam: float) -> PenaltyMatrix:
        rho = np.full((p, p), float(lam))
        np.fill_diagonal(rho, 0.0)
        return cls(rho)

    @classmethod
    def from_weights(cls, lam: float, weights) -> PenaltyMatrix:
        """``rho = lam * weights`` with infinite weights staying infinite."""
        w = np.asarray(weights, dtype=float)
        inf = np.isinf(w)
        rho = np.where(inf, np.inf, lam * np.where(inf, 0.0, w))
        np.fill_diagonal(rho, 0.0)
        return cls(rho)

    def is_zero(self) -> bool:
        return not np.any(self.rho)


@dataclass(frozen=True)
class SolverConfig:
    outer_tol: float = 1e-5
    inner_tol: float = 1e-6
    max_outer: int = 200
    max_inner: int = 1000
    diag_jitter: float = 0.0
    # Refinement passes (tolerances /10 each) when the KKT residual exceeds kkt_tol.
    kkt_tol: float = TOLERANCES.kkt
    max_refine: int = 4
    max_jitter_escalations: int = 6

    def __post_init__(self):
        for name in ("outer_tol", "inner_tol", "kkt_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration limits must be positive")
        if self.diag_jitter < 0:
            raise ValueError("diag_jitter must be nonnegative")


@dataclass
class FitResult:
    theta: np.ndarray
    sigma: np.ndarray
    objective: float
    iterations: int
    converged: bool
    kkt_violation: float
    jitter: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def edge_count(self) -> int:
        return int(np.count_nonzero(np.triu(self.theta, 1)))

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "converged": self.converged,
            "kkt_violation": self.kkt_violation,
            "jitter": self.jitter,
            "edge_count": self.edge_count,
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def objective(s, theta, penalty: PenaltyMatrix) -> float:
    """Penalised log-likelihood at ``theta`` (``-inf`` if not PD)."""
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    try:
        ld = linalg.logdet(theta)
    except NotPositiveDefiniteError:
        return -np.inf
    rho = penalty.rho
    abs_t = np.abs(theta)
    inf = np.isinf(rho)
    if np.any(abs_t[inf] != 0):
        return -np.inf
    pen = float(np.sum(np.where(inf, 0.0, rho) * abs_t))
    return ld - float(np.sum(s * theta)) - pen


def kkt_residual(s, theta, penalty: PenaltyMatrix) -> float:
    """Largest violation of the first-order optimality conditions.

    Off the diagonal, an active entry needs ``s_ij - sigma_ij + rho_ij
    sign(theta_ij) = 0`` and a zero entry needs ``|s_ij - sigma_ij| <= rho_ij``,
    where ``sigma = theta^{-1}``. The diagonal needs ``s_ii = sigma_ii``.
    """
    s = np.asarray(s, dtype=float)
    _, sigma = linalg.chol_logdet_inverse(theta)
    theta = np.asarray(theta, dtype=float)
    d = s - sigma
    rho = penalty.rho
    inf = np.isinf(rho)
    finite_rho = np.where(inf, 0.0, rho)
    active = theta != 0
    viol = np.where(
        active,
        np.abs(d + finite_rho * np.sign(theta)),
        np.maximum(0.0, np.abs(d) - finite_rho),
    )
    viol[inf & ~active] = 0.0
    np.fill_diagonal(viol, 0.0)
    off = float(viol.max()) if viol.size else 0.0
    diag = float(np.max(np.abs(np.diag(d)))) if d.size else 0.0
    return max(off, diag)


def _symmetric_from_columns(theta_cols: np.ndarray) -> np.ndarray:
    # Entries where the two column solves disagree on sparsity are left at zero.
    t = theta_cols
    both = (t != 0) & (t.T != 0)
    avg = 0.5 * (t + t.T)
    out = np.where(both, avg, 0.0)
    np.fill_diagonal(out, np.diag(t))
    return linalg.symmetrize(out)


def _check_inputs(s, penalty):
    s = linalg.as_symmetric(s, name="s")
    if not isinstance(penalty, PenaltyMatrix):
        penalty = PenaltyMatrix(penalty)
    if penalty.dim != s.shape[0]:
        raise DataError(f"penalty is {penalty.dim}x{penalty.dim} but s is {s.shape[0]}x{s.shape[0]}")
    return s, penalty


def _warm_arrays(s_work, hard_zero, warm_start):
    p = s_work.shape[0]
    if warm_start is None:
        W = s_work.copy()
        B = np.zeros((p, p))
    else:
        W = np.array(warm_start.sigma, dtype=float, copy=True)
        theta = np.asarray(warm_start.theta, dtype=float)
        if W.shape != (p, p) or theta.shape != (p, p):
            raise DataError("warm start has the wrong dimension")
        B = -theta / np.diag(theta)[None, :]
        np.fill_diagonal(B, 0.0)
        B[hard_zero] = 0.0
        np.fill_diagonal(W, np.diag(s_work))
    return np.ascontiguousarray(W), np.ascontiguousarray(B)


def _solve(s, penalty, cfg, warm_start, jitter):
    p = s.shape[0]
    s_work = s + jitter * np.eye(p)
    hard_zero = np.ascontiguousarray(penalty.infinite_mask)
    rho = np.ascontiguousarray(np.where(hard_zero, 0.0, penalty.rho))
    W, B = _warm_arrays(s_work, hard_zero, warm_start)

    outer_tol, inner_tol = cfg.outer_tol, cfg.inner_tol
    total_iter = 0
    theta = None
    kkt = np.inf
    converged = False
    for _ in range(cfg.max_refine + 1):
        n_iter, converged = glasso_bcd(
            s_work, rho, hard_zero, W, B, outer_tol, inner_tol, cfg.max_outer, cfg.max_inner
        )
        total_iter += n_iter
        theta = _symmetric_from_columns(precision_from_coefficients(W, B))
        if not linalg.is_positive_definite(theta):
            return theta, W, total_iter, False, np.inf
        kkt = kkt_residual(s_work, theta, penalty)
        if not converged or kkt <= cfg.kkt_tol:
            break
        outer_tol /= 10.0
        inner_tol /= 10.0
    return theta, linalg.symmetrize(W), total_iter, converged and kkt <= cfg.kkt_tol, kkt


def fit_weighted_glasso(s, penalty, cfg: SolverConfig | None = None, warm_start: FitResult | None = None,
                        screen: bool = False) -> FitResult:
    """Solve the weighted graphical lasso for covariance ``s``.

    Parameters
    ----------
    s : (p, p) array_like
        Symmetric sample covariance.
    penalty : PenaltyMatrix or array_like
        Elementwise penalty; ``inf`` entries are forced to zero.
    cfg : SolverConfig, optional
    warm_start : FitResult, optional
        A previous fit (typically at a nearby penalty) used to initialise
        the working covariance and column coefficients.
    screen : bool
        Split the problem into the exact independent blocks found by
        :func:`block_screen` and solve each separately.

    Returns
    -------
    FitResult
        ``converged`` is False if the sweep limit was hit or the KKT
        residual stayed above ``cfg.kkt_tol``.
    """
    cfg = cfg or SolverConfig()
    s, penalty = _check_inputs(s, penalty)
    p = s.shape[0]

    if penalty.is_zero():
        # Unpenalised problem: the maximiser is s^{-1} when it exists.
        try:
            ld, theta = linalg.chol_logdet_inverse(s)
        except NotPositiveDefiniteError as exc:
            raise NotPositiveDefiniteError(
                "s is singular and no penalty was given; use a nonzero penalty "
                "or a ridge initial estimate"
            ) from exc
        return FitResult(theta=theta, sigma=s.copy(), objective=ld - p, iterations=0,
                         converged=True, kkt_violation=kkt_residual(s, theta, penalty))

    if screen:
        return _fit_blockwise(s, penalty, cfg, warm_start)

    jitter = cfg.diag_jitter
    diag = np.diag(s)
    if np.any(diag + jitter <= 0):
        jitter = max(jitter, 1e-8 * max(float(np.mean(np.abs(diag))), 1.0))
    for attempt in range(cfg.max_jitter_escalations + 1):
        if np.all(diag + jitter > 0):
            theta, W, n_iter, converged, kkt = _solve(s, penalty, cfg, warm_start, jitter)
            if np.isfinite(kkt):
                break
            if warm_start is not None:
                # a warm start outside the new problem's dual box can lose
                # positive definiteness; retry from scratch before adding jitter
                warm_start = None
                theta, W, n_iter, converged, kkt = _solve(s, penalty, cfg, None, jitter)
                if np.isfinite(kkt):
                    break
        jitter = max(10.0 * jitter, 1e-8 * max(float(np.mean(np.abs(diag))), 1.0))
        warm_start = None
    else:
        raise NotPositiveDefiniteError("solver could not produce a positive definite estimate")

    s_work = s + jitter * np.eye(p)
    return FitResult(
        theta=theta,
        sigma=W,
        objective=objective(s_work, theta, penalty),
        iterations=n_iter,
        converged=converged,
        kkt_violation=kkt,
        jitter=jitter,
    )


def block_screen(s, penalty) -> list[np.ndarray]:
    """Exact block decomposition of the weighted graphical lasso solution.

    Variables ``i`` and ``j`` are linked when ``|s_ij| > rho_ij``; the
    connected components of that graph are independent subproblems.
    Components are returned as sorted index arrays, ordered by smallest member.
    """
    s, penalty = _check_inputs(s, penalty)
    link = np.abs(s) > penalty.rho
    np.fill_diagonal(link, False)
    n_comp, labels = csgraph.connected_components(link, directed=False)
    blocks = [np.flatnonzero(labels == c) for c in range(n_comp)]
    blocks.sort(key=lambda b: b[0])
    return blocks


def _fit_blockwise(s, penalty, cfg, warm_start):
    p = s.shape[0]
    theta = np.zeros((p, p))
    sigma = np.zeros((p, p))
    iterations = 0
    converged = True
    jitter = 0.0
    for block in block_screen(s, penalty):
        ix = np.ix_(block, block)
        if block.size == 1:
            i = block[0]
            if s[i, i] <= 0:
                raise NotPositiveDefiniteError(f"variable {i} has nonpositive variance")
            theta[i, i] = 1.0 / s[i, i]
            sigma[i, i] = s[i, i]
            continue
        ws = None
        if warm_start is not None:
            ws = SimpleNamespace(theta=warm_start.theta[ix], sigma=warm_start.sigma[ix])
        sub = fit_weighted_glasso(s[ix], PenaltyMatrix(penalty.rho[ix]), cfg, warm_start=ws)
        theta[ix] = sub.theta
        sigma[ix] = sub.sigma
        iterations = max(iterations, sub.iterations)
        converged &= sub.converged
        jitter = max(jitter, sub.jitter)
    s_work = s + jitter * np.eye(p)
    theta = linalg.symmetrize(theta)
    return FitResult(
        theta=theta,
        sigma=linalg.symmetrize(sigma),
        objective=objective(s_work, theta, penalty),
        iterations=iterations,
        converged=converged,
        kkt_violation=kkt_residual(s_work, theta, penalty),
        jitter=jitter,
    )


def fit_correlation_based(data, penalty, cfg: SolverConfig | None = None, labels=None) -> FitResult:
    """Fit on the sample correlation matrix and map back to the covariance scale.

    The returned precision is ``D^{-1} K D^{-1}`` where ``K`` is the fit on the
    correlation matrix and ``D`` holds the column standard deviations. The
    objective and KKT residual refer to the correlation-scale problem; ``K``
    is kept in ``meta['k_hat']``.
    """
    r, sd = linalg.sample_correlation(data, labels=labels)
    fit = fit_weighted_glasso(r, penalty, cfg)
    inv_sd = 1.0 / sd
    theta = linalg.symmetrize(fit.theta * np.outer(inv_sd, inv_sd))
    sigma = linalg.symmetrize(fit.sigma * np.outer(sd, sd))
    return replace(fit, theta=theta, sigma=sigma, meta={**fit.meta, "k_hat": fit.theta, "sd": sd})


def edge_list(theta, labels=None, tol: float = 0.0):
    """``(i, j, theta_ij)`` for ``i < j`` with ``|theta_ij| > tol``."""
    theta = np.asarray(theta)
    iu, ju = np.nonzero(np.abs(np.triu(theta, 1)) > tol)
    if labels is None:
        return [(int(i), int(j), float(theta[i, j])) for i, j in zip(iu, ju)]
    return [(labels[i], labels[j], float(theta[i, j])) for i, j in zip(iu, ju)]


def write_edge_list(path, theta, labels=None, extra: dict | None = None) -> None:
    """Write an edge-list TSV; ``extra`` maps column name to a p x p array."""
    extra = extra or {}
    with open(path, "w") as fh:
        fh.write("\t".join(["i", "j", "theta", *extra]) + "\n")
        theta = np.asarray(theta)
        iu, ju = np.nonzero(np.triu(theta, 1))
        for i, j in zip(iu, ju):
            a = labels[i] if labels is not None else str(i)
            b = labels[j] if labels is not None else str(j)
            cols = [a, b, repr(float(theta[i, j]))] + [repr(float(m[i, j])) for m in extra.values()]
            fh.write("\t".join(cols) + "\n")
