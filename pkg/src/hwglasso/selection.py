"""BIC tuning over penalty grids.

The score is ``-n (log det Theta - tr(S Theta)) + log(n) * k`` where ``k``
counts nonzero strictly-upper-triangular entries of ``Theta``. The diagonal
is unpenalised and therefore not counted.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .exceptions import ConvergenceError, DataError
from .glasso import FitResult, PenaltyMatrix, SolverConfig, fit_weighted_glasso

BIC_FORMULA = "-n*(logdet(theta) - tr(S theta)) + log(n)*#{i<j: theta_ij != 0}"


def bic_score(s, theta, n: int) -> float:
    logdet = linalg.logdet(theta)
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    k = np.count_nonzero(np.triu(theta, 1))
    return -n * (logdet - float(np.sum(s * theta))) + np.log(n) * k


def make_grid(values) -> np.ndarray:
    """Validate a tuning grid: nonempty, positive, finite and non-increasing."""
    g = np.atleast_1d(np.asarray(values, dtype=float))
    if g.ndim != 1 or g.size == 0:
        raise DataError("grid must be a nonempty list of values")
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise DataError("grid values must be finite and positive")
    if np.any(np.diff(g) > 0):
        raise DataError("grid must be in descending order")
    return g


def lambda_max(s, weights) -> float:
    """Smallest ``lam`` at which ``lam * weights`` zeroes every off-diagonal entry."""
    s = np.asarray(s, dtype=float)
    w = np.asarray(weights, dtype=float)
    off = ~np.eye(s.shape[0], dtype=bool)
    finite = off & np.isfinite(w)
    if not finite.any():
        return 1.0
    smax = float(np.max(np.abs(s[off]))) if off.any() else 0.0
    wmin = float(np.min(w[finite]))
    if smax == 0.0 or wmin == 0.0:
        return 1.0
    return smax / wmin


def default_grid(s, weights, n_values: int = 30, ratio: float = 100.0) -> np.ndarray:
    """Log-spaced grid from :func:`lambda_max` downwards.

    The bottom is ``ratio`` times below the point where a median-weight entry
    would enter the model, i.e. ``lambda_max * (w_min / w_median) / ratio``.
    With uniform weights this is simply ``lambda_max / ratio``.
    """
    top = lambda_max(s, weights)
    w = np.asarray(weights, dtype=float)
    off = ~np.eye(w.shape[0], dtype=bool)
    finite = w[off & np.isfinite(w)]
    spread = 1.0
    if finite.size and np.min(finite) > 0:
        spread = float(np.min(finite) / np.median(finite))
    return np.geomspace(top, top * spread / ratio, n_values)


@dataclass
class SelectionReport:
    points: list = field(default_factory=list)
    chosen: int = -1
    bic_formula: str = BIC_FORMULA

    @property
    def chosen_point(self) -> dict:
        return self.points[self.chosen]

    @property
    def chosen_lambda(self):
        pt = self.chosen_point
        if "lambda" in pt:
            return pt["lambda"]
        return (pt["lambda1"], pt["lambda2"])

    def to_dict(self) -> dict:
        return {"bic_formula": self.bic_formula, "chosen": self.chosen, "points": self.points}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def write_path_csv(self, path) -> None:
        keys = [k for k in self.points[0] if not isinstance(self.points[0][k], (list, dict))]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=keys, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            w.writerows(self.points)


def _select(s, labelled_penalties, n, cfg, warm_start=True, n_jobs=1, warm_from=None):
    """Fit each ``(label, penalty)`` in order and keep the lowest BIC.

    ``warm_from(k)`` gives the index of the fit used to warm-start point ``k``
    (default: the previous point). Points whose penalty matrix equals an
    earlier one reuse that fit.
    """
    cfg = cfg or SolverConfig()
    fits: list[FitResult] = []
    cache: dict[bytes, int] = {}
    keys = [pen.rho.tobytes() for _, pen in labelled_penalties]

    if not warm_start and n_jobs != 1:
        from joblib import Parallel, delayed

        unique = {}
        for k, key in enumerate(keys):
            unique.setdefault(key, k)
        order = sorted(unique.values())
        results = Parallel(n_jobs=n_jobs)(
            delayed(fit_weighted_glasso)(s, labelled_penalties[k][1], cfg) for k in order
        )
        by_key = {keys[k]: r for k, r in zip(order, results)}
        fits = [by_key[key] for key in keys]
    else:
        for k, (_, pen) in enumerate(labelled_penalties):
            if keys[k] in cache:
                fits.append(fits[cache[keys[k]]])
                continue
            ws = None
            if warm_start and k > 0:
                ws = fits[warm_from(k) if warm_from else k - 1]
            fits.append(fit_weighted_glasso(s, pen, cfg, warm_start=ws))
            cache[keys[k]] = k

    report = SelectionReport()
    best = None
    for k, ((label, _), fit) in enumerate(zip(labelled_penalties, fits)):
        score = bic_score(s, fit.theta, n) if fit.converged else float("nan")
        report.points.append({
            **label,
            "bic": score,
            "edge_count": fit.edge_count,
            "objective": fit.objective,
            "converged": fit.converged,
            "kkt_violation": fit.kkt_violation,
        })
        # strict comparison: ties go to the earlier (larger-penalty) point
        if fit.converged and (best is None or score < report.points[best]["bic"]):
            best = k
    if best is None:
        raise ConvergenceError("no grid point converged")
    report.chosen = best
    return fits[best], report


def select_lambda(s, weights, grid, n: int, cfg: SolverConfig | None = None, warm_start: bool = True,
                  n_jobs: int = 1) -> tuple[FitResult, SelectionReport]:
    """Fit ``lam * weights`` for every ``lam`` in ``grid`` and return the BIC choice.

    Fits follow the grid order (largest penalty first), each warm-started
    from the previous one unless ``warm_start`` is False.
    """
    s = linalg.as_symmetric(s, name="s")
    grid = make_grid(grid)
    pens = [({"lambda": float(lam)}, PenaltyMatrix.from_weights(lam, weights)) for lam in grid]
    return _select(s, pens, n, cfg, warm_start=warm_start, n_jobs=n_jobs)


def select_lambda_pair(s, hub_set, grid1, grid2, n: int, cfg: SolverConfig | None = None, mode: str = "flat",
                       theta_tilde=None, gamma1: float = 1.0, warm_start: bool = True,
                       n_jobs: int = 1) -> tuple[FitResult, SelectionReport]:
    """Two-step tuning over the crossed ``(lambda1, lambda2)`` grids.

    ``lambda1`` penalises edges touching a hub in ``hub_set`` and ``lambda2``
    all other edges. The outer loop runs over ``grid1``, the inner over
    ``grid2``; the first point of each row is warm-started from the first
    point of the previous row.
    """
    from .two_step import two_step_weights

    s = linalg.as_symmetric(s, name="s")
    g1, g2 = make_grid(grid1), make_grid(grid2)
    pens = []
    for l1 in g1:
        for l2 in g2:
            pen = two_step_weights(hub_set, l1, l2, s.shape[0], mode=mode, theta_tilde=theta_tilde, gamma1=gamma1)
            pens.append(({"lambda1": float(l1), "lambda2": float(l2)}, pen))
    m = g2.size

    def warm_from(k):
        return k - m if k % m == 0 else k - 1

    return _select(s, pens, n, cfg, warm_start=warm_start, n_jobs=n_jobs, warm_from=warm_from)
