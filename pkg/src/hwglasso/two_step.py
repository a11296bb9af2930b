"""Hub identification and the two-step hub-weighted graphical lasso."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .config import TOLERANCES
from .exceptions import DataError
from .glasso import FitResult, PenaltyMatrix, SolverConfig
from .selection import SelectionReport, default_grid, select_lambda_pair

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HubSet:
    indices: tuple
    method: str = "known"
    params: tuple = ()

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise DataError("hub indices must be unique")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return int(i) in self.indices

    def validate(self, p: int) -> HubSet:
        if any(i < 0 or i >= p for i in self.indices):
            raise DataError(f"hub index out of range for p={p}")
        return self

    def mask(self, p: int) -> np.ndarray:
        m = np.zeros(p, dtype=bool)
        m[list(self.validate(p).indices)] = True
        return m

    def to_json(self) -> str:
        return json.dumps({"indices": list(self.indices), "method": self.method, "params": dict(self.params)})

    @classmethod
    def from_json(cls, text: str) -> HubSet:
        d = json.loads(text)
        return cls(tuple(d["indices"]), d.get("method", "known"), tuple(sorted(d.get("params", {}).items())))


def degrees(theta, tol: float = 0.0) -> np.ndarray:
    """Number of nonzero off-diagonal entries in each row."""
    a = np.abs(np.asarray(theta, dtype=float)) > tol
    np.fill_diagonal(a, False)
    return a.sum(axis=1)


def identify_hubs_threshold(theta, k_percent: float = 10.0, tol: float = 0.0) -> HubSet:
    """Nodes whose degree exceeds ``k_percent`` percent of the other ``p - 1`` nodes."""
    if not 0 < k_percent < 100:
        raise ValueError("k_percent must lie in (0, 100)")
    d = degrees(theta, tol)
    p = d.size
    hubs = np.flatnonzero(d > (k_percent / 100.0) * (p - 1))
    return HubSet(tuple(hubs.tolist()), "threshold", (("k_percent", k_percent),))


def _two_means_split(values: np.ndarray):
    # Optimal 1-D 2-means is a split of the sorted values; try all of them.
    order = np.argsort(-values, kind="stable")
    v = values[order].astype(float)
    p = v.size
    csum = np.cumsum(v)
    csq = np.cumsum(v * v)
    best_ss, best_k = np.inf, None
    for k in range(1, p):
        n1, n2 = k, p - k
        s1, s2 = csum[k - 1], csum[-1] - csum[k - 1]
        q1, q2 = csq[k - 1], csq[-1] - csq[k - 1]
        ss = (q1 - s1 * s1 / n1) + (q2 - s2 * s2 / n2)
        if ss < best_ss - 1e-12:
            best_ss, best_k = ss, k
    return order, best_k


def identify_hubs_kmeans(theta, tol: float = 0.0) -> HubSet:
    """Two-group clustering of node degrees; the higher-mean group are hubs.

    Uses the exact optimal 1-D split. Returns no hubs when all degrees are
    equal or the two group means coincide.
    """
    d = degrees(theta, tol).astype(float)
    if d.size < 2:
        raise DataError("need at least two nodes")
    if np.all(d == d[0]):
        logger.warning("all node degrees equal; no hubs identified")
        return HubSet((), "kmeans")
    order, k = _two_means_split(d)
    hi, lo = d[order[:k]], d[order[k:]]
    if abs(hi.mean() - lo.mean()) <= TOLERANCES.kmeans_equal_means:
        logger.warning("degree clusters have equal means; no hubs identified")
        return HubSet((), "kmeans")
    return HubSet(tuple(order[:k].tolist()), "kmeans")


def two_step_weights(hubs, lambda1: float, lambda2: float, p: int | None = None, mode: str = "flat",
                     theta_tilde=None, gamma1: float = 1.0) -> PenaltyMatrix:
    """Penalty matrix with ``lambda1`` on hub-incident edges and ``lambda2`` elsewhere.

    In ``"adaptive"`` mode each entry is further divided by
    ``|theta_tilde_ij|^gamma1``; zero entries become forced zeros.
    """
    if mode not in ("flat", "adaptive"):
        raise ValueError(f"unknown weight mode {mode!r}")
    if mode == "adaptive" and theta_tilde is None:
        raise DataError("adaptive two-step weights need an initial estimate theta_tilde")
    if p is None:
        if theta_tilde is None:
            raise DataError("dimension p is required")
        p = np.asarray(theta_tilde).shape[0]
    if not isinstance(hubs, HubSet):
        hubs = HubSet(tuple(hubs))
    h = hubs.mask(p)
    touch = h[:, None] | h[None, :]
    w = np.where(touch, float(lambda1), float(lambda2))
    if mode == "adaptive":
        t = np.abs(np.asarray(theta_tilde, dtype=float))
        if gamma1 == 0:
            scale = np.ones_like(t)
        else:
            scale = t ** gamma1
        with np.errstate(divide="ignore"):
            w = np.where(scale > 0, w / np.where(scale > 0, scale, 1.0), np.inf)
    np.fill_diagonal(w, 0.0)
    w = np.triu(w) + np.triu(w, 1).T
    return PenaltyMatrix(w)


def fit_two_step(s, first_fit: FitResult, n: int, hub_method: str = "threshold", grid1=None, grid2=None,
                 cfg: SolverConfig | None = None, known_hubs=None, k_percent: float = 10.0,
                 mode: str = "flat", theta_tilde=None, gamma1: float = 1.0, n_grid: int = 10,
                 warm_start: bool = True) -> tuple[FitResult, HubSet, SelectionReport]:
    """Second stage: identify hubs from ``first_fit`` and refit with separate hub penalty.

    ``hub_method`` is ``"threshold"``, ``"kmeans"`` or ``"known"`` (then
    ``known_hubs`` is used as is). Missing grids default to ``n_grid``
    log-spaced values from the uniform-penalty ``lambda_max`` down by 100x.
    """
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    if hub_method == "known" or known_hubs is not None:
        if known_hubs is None:
            raise DataError("known hub method needs known_hubs")
        hubs = known_hubs if isinstance(known_hubs, HubSet) else HubSet(tuple(known_hubs), "known")
        hubs.validate(p)
    else:
        if not first_fit.converged:
            raise DataError("first-step fit did not converge")
        if hub_method == "threshold":
            hubs = identify_hubs_threshold(first_fit.theta, k_percent)
        elif hub_method == "kmeans":
            hubs = identify_hubs_kmeans(first_fit.theta)
        else:
            raise ValueError(f"unknown hub method {hub_method!r}")
    if grid1 is None or grid2 is None:
        if mode == "adaptive":
            from .weights import adaptive_weights

            base = adaptive_weights(theta_tilde, gamma1)
        else:
            base = np.ones((p, p))
            np.fill_diagonal(base, 0.0)
        g = default_grid(s, base, n_values=n_grid)
        grid1 = g if grid1 is None else grid1
        grid2 = g if grid2 is None else grid2
    fit, report = select_lambda_pair(s, hubs, grid1, grid2, n, cfg, mode=mode, theta_tilde=theta_tilde,
                                     gamma1=gamma1, warm_start=warm_start)
    return fit, hubs, report
