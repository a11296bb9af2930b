"""Compositional data workflow: CLR transform, bootstrap edge stability, group permutation tests."""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from functools import partial

import numpy as np

from . import linalg
from .evaluation import adjacency_from_theta, graph_stats
from .exceptions import ConvergenceError, DataError, NotPositiveDefiniteError
from .glasso import FitResult, PenaltyMatrix, SolverConfig, fit_weighted_glasso
from .netgen import rng_for
from .selection import default_grid, select_lambda
from .weights import initial_estimate, hw_weights

logger = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.20
SCALAR_STATISTICS = ("density", "global_clustering", "avg_path_length", "mean_betweenness")
STATISTICS = SCALAR_STATISTICS + ("degree_centrality",)
_FIT_ERRORS = (ConvergenceError, DataError, NotPositiveDefiniteError, ValueError)


@dataclass
class AbundanceTable:
    """Samples by taxa, nonnegative counts or relative abundances."""

    values: np.ndarray
    taxa: list
    samples: list = field(default_factory=list)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DataError("abundance table must be two-dimensional")
        if v.shape[1] < 2:
            raise DataError("abundance table needs at least two taxa")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise DataError("abundances must be finite and nonnegative")
        self.taxa = [str(t) for t in self.taxa]
        if len(self.taxa) != v.shape[1]:
            raise DataError(f"{len(self.taxa)} taxa labels for {v.shape[1]} columns")
        if len(set(self.taxa)) != len(self.taxa):
            raise DataError("taxa labels must be unique")
        if not self.samples:
            self.samples = [f"s{i}" for i in range(v.shape[0])]
        self.values = v

    @classmethod
    def read_csv(cls, path) -> AbundanceTable:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r]
        if len(rows) < 2:
            raise DataError(f"{path}: needs a header and at least one sample")
        taxa = rows[0][1:]
        samples, values = [], []
        for k, r in enumerate(rows[1:], start=2):
            if len(r) != len(taxa) + 1:
                raise DataError(f"{path}: line {k} has {len(r) - 1} values, expected {len(taxa)}")
            samples.append(r[0])
            try:
                values.append([float(x) for x in r[1:]])
            except ValueError as exc:
                raise DataError(f"{path}: line {k}: {exc}") from exc
        return cls(np.array(values), taxa, samples)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample", *self.taxa])
            for s, row in zip(self.samples, self.values):
                w.writerow([s, *(repr(float(x)) for x in row)])


def clr_transform(table, zero_replacement: float = 0.5) -> np.ndarray:
    """Centered log-ratio transform of each sample.

    Zeros are replaced by ``zero_replacement`` first, then each sample is
    rescaled to proportions, logged and centred on its mean log.
    """
    v = table.values if isinstance(table, AbundanceTable) else np.asarray(table, dtype=float)
    v = np.atleast_2d(v)
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise DataError("abundances must be finite and nonnegative")
    if zero_replacement <= 0:
        raise DataError("zero_replacement must be positive")
    empty = np.flatnonzero(np.all(v == 0, axis=1))
    if empty.size:
        raise DataError(f"sample {int(empty[0])} is entirely zero")
    x = np.where(v == 0, zero_replacement, v)
    # log proportions, formed in log space so tiny abundances do not underflow
    lx = np.log(x) - np.log(x.sum(axis=1, keepdims=True))
    return lx - lx.mean(axis=1, keepdims=True)


@dataclass(frozen=True)
class HWGlassoRecipe:
    """The full estimation pipeline applied to a data matrix.

    Ridge (or other) initial estimate, hub weights, then BIC choice of
    ``lam`` over the default grid. Columns are centred before the
    covariance is formed.
    """

    gamma1: float = 1.0
    gamma2: float = 1.0
    init: str = "ridge"
    n_grid: int = 30
    cfg: SolverConfig = field(default_factory=SolverConfig)

    def _prepare(self, data):
        x = linalg.as_data_matrix(data, min_rows=2)
        s = linalg.sample_covariance(x, center=True)
        theta_tilde, _ = initial_estimate(s, self.init, self.cfg, n=x.shape[0])
        return x.shape[0], s, hw_weights(theta_tilde, gamma1=self.gamma1, gamma2=self.gamma2)

    def select(self, data) -> tuple[FitResult, float]:
        n, s, w = self._prepare(data)
        fit, report = select_lambda(s, w, default_grid(s, w, self.n_grid), n, self.cfg)
        return fit, float(report.chosen_lambda)

    def fit_at(self, data, lam: float) -> FitResult:
        _, s, w = self._prepare(data)
        fit = fit_weighted_glasso(s, PenaltyMatrix.from_weights(lam, w), self.cfg)
        if not fit.converged:
            raise ConvergenceError(f"fit at lambda={lam} did not converge")
        return fit


@dataclass
class StabilityResult:
    proportions: np.ndarray
    threshold: float
    B: int
    failures: int = 0
    labels: list | None = None

    @property
    def stable(self) -> np.ndarray:
        """Boolean p x p mask of edges kept in at least ``threshold`` of replicates."""
        m = self.proportions >= self.threshold
        np.fill_diagonal(m, False)
        return m

    def stable_edges(self) -> list:
        iu, ju = np.nonzero(np.triu(self.stable, 1))
        return [(int(i), int(j)) for i, j in zip(iu, ju)]

    def to_dict(self) -> dict:
        return {
            "B": self.B,
            "threshold": self.threshold,
            "failures": self.failures,
            "labels": self.labels,
            "proportions": self.proportions.tolist(),
            "stable_edges": self.stable_edges(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _map(fn, items, n_jobs):
    if n_jobs == 1:
        return [fn(i) for i in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(i) for i in items)


def _check_failures(failures, total, what):
    if failures:
        logger.warning("%d of %d %s failed", failures, total, what)
    if failures > MAX_FAILURE_FRACTION * total:
        raise ConvergenceError(f"{failures} of {total} {what} failed")


def _boot_support(raw, recipe, transform, seed, b):
    idx = rng_for(seed, b).integers(0, raw.shape[0], raw.shape[0])
    x = raw[idx]
    try:
        if transform is not None:
            x = transform(x)
        fit, _ = recipe.select(x)
    except _FIT_ERRORS as exc:
        logger.info("bootstrap replicate %d failed: %s", b, exc)
        return None
    return adjacency_from_theta(fit.theta).astype(bool)


def bootstrap_stability(data, recipe: HWGlassoRecipe | None = None, B: int = 100, threshold: float = 0.8,
                        seed: int = 0, transform=None, n_jobs: int = 1) -> StabilityResult:
    """Edge reproducibility over ``B`` row resamples.

    An :class:`AbundanceTable` is resampled raw and CLR-transformed per
    replicate; a plain matrix is used as is unless ``transform`` is given.
    Failed replicates are skipped and counted; proportions are over the
    successful ones.
    """
    if B < 1:
        raise DataError("B must be at least 1")
    if not 0 < threshold <= 1:
        raise DataError("threshold must lie in (0, 1]")
    recipe = recipe or HWGlassoRecipe()
    labels = None
    if isinstance(data, AbundanceTable):
        raw, labels = data.values, data.taxa
        transform = transform or clr_transform
    else:
        raw = linalg.as_data_matrix(data, min_rows=2)
    supports = _map(partial(_boot_support, raw, recipe, transform, seed), range(B), n_jobs)
    ok = [sup for sup in supports if sup is not None]
    failures = B - len(ok)
    _check_failures(failures, B, "bootstrap replicates")
    props = np.mean(ok, axis=0)
    return StabilityResult(props, threshold, B, failures, labels)


@dataclass
class PermutationResult:
    observed: dict
    p_values: dict
    R: int
    failures: int = 0
    flags: tuple = ()

    def to_dict(self) -> dict:
        conv = lambda v: np.asarray(v).tolist()  # noqa: E731
        return {
            "R": self.R,
            "failures": self.failures,
            "flags": list(self.flags),
            "observed_difference": {k: conv(v) for k, v in self.observed.items()},
            "p_values": {k: conv(v) for k, v in self.p_values.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _network_statistics(theta, statistics) -> dict:
    gs = graph_stats(adjacency_from_theta(theta))
    out = {}
    for name in statistics:
        if name == "degree_centrality":
            out[name] = gs.degree_centrality.astype(float)
        else:
            out[name] = np.float64(gs.scalar(name))
    return out


def _difference(fa, fb, statistics):
    sa = _network_statistics(fa.theta, statistics)
    sb = _network_statistics(fb.theta, statistics)
    return {k: sa[k] - sb[k] for k in statistics}


def _perm_difference(pooled, na, recipe, lams, statistics, reselect, seed, r):
    perm = rng_for(seed, r).permutation(pooled.shape[0])
    xa, xb = pooled[perm[:na]], pooled[perm[na:]]
    try:
        if reselect:
            fa, _ = recipe.select(xa)
            fb, _ = recipe.select(xb)
        else:
            fa, fb = recipe.fit_at(xa, lams[0]), recipe.fit_at(xb, lams[1])
    except _FIT_ERRORS as exc:
        logger.info("permutation %d failed: %s", r, exc)
        return None
    return _difference(fa, fb, statistics)


def permutation_test(group_a, group_b, statistics=STATISTICS, R: int = 1000, seed: int = 0,
                     recipe: HWGlassoRecipe | None = None, reselect: bool = False,
                     n_jobs: int = 1) -> PermutationResult:
    """Two-sided permutation test for differences in network statistics.

    Group labels are shuffled ``R`` times and both networks refitted. By
    default each refit reuses the ``lam`` chosen by BIC on the observed
    group; ``reselect=True`` reruns the BIC search every time.

    The p-value is ``(1 + #{|perm diff| >= |observed diff|}) / (R_ok + 1)``
    where ``R_ok`` counts successful permutations.
    """
    unknown = set(statistics) - set(STATISTICS)
    if unknown:
        raise DataError(f"unknown statistics {sorted(unknown)}; choose from {STATISTICS}")
    if R < 1:
        raise DataError("R must be at least 1")
    a = linalg.as_data_matrix(group_a, min_rows=2)
    b = linalg.as_data_matrix(group_b, min_rows=2)
    if a.shape[1] != b.shape[1]:
        raise DataError(f"groups have {a.shape[1]} and {b.shape[1]} columns")
    recipe = recipe or HWGlassoRecipe()
    statistics = tuple(statistics)
    fa, lam_a = recipe.select(a)
    fb, lam_b = recipe.select(b)
    observed = _difference(fa, fb, statistics)

    pooled = np.vstack([a, b])
    fn = partial(_perm_difference, pooled, a.shape[0], recipe, (lam_a, lam_b), statistics, reselect, seed)
    diffs = [d for d in _map(fn, range(R), n_jobs) if d is not None]
    failures = R - len(diffs)
    _check_failures(failures, R, "permutations")

    flags = []
    p_values = {}
    for k in statistics:
        obs = np.abs(observed[k])
        perm = np.abs(np.array([d[k] for d in diffs]))
        # nan differences (e.g. path length of an edgeless graph) count as not extreme
        with np.errstate(invalid="ignore"):
            count = np.sum(perm >= obs, axis=0)
        pv = (1.0 + count) / (len(diffs) + 1.0)
        if np.any(np.isnan(obs)):
            flags.append(f"{k}_observed_undefined")
            pv = np.where(np.isnan(obs), np.nan, pv)
        p_values[k] = pv if np.ndim(pv) else float(pv)
    return PermutationResult(observed, p_values, R, failures, tuple(flags))


def write_stable_network(path, theta, stability: StabilityResult, labels=None) -> None:
    """Edge list of ``theta`` restricted to stable edges, with a reproducibility column."""
    from .glasso import write_edge_list

    t = np.where(stability.stable, np.asarray(theta), 0.0)
    np.fill_diagonal(t, np.diag(theta))
    write_edge_list(path, t, labels or stability.labels, {"reproducibility": stability.proportions})
