"""Simulation experiments: generate, fit every method on the same data, aggregate."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, linalg, netgen
from .evaluation import evaluate
from .exceptions import ConvergenceError, DataError
from .glasso import SolverConfig
from .selection import default_grid, select_lambda
from .two_step import HubSet, fit_two_step, identify_hubs_threshold
from .weights import InitialEstimator, hw_weights, initial_estimate, uniform_weights

logger = logging.getLogger(__name__)

METHODS = ("glasso", "ada_glasso", "hw_glasso", "two_step", "two_step_known_hubs")
METRIC_FIELDS = ("tpr", "tnr", "hub_edge_pct", "hub_node_pct", "nonhub_node_pct", "edge_count",
                 "frobenius_measure", "frobenius_full")
MAX_FAILURE_FRACTION = 0.10


@dataclass(frozen=True)
class ExperimentConfig:
    mechanism: str = "i"
    n: int = 100
    p: int = 50
    replicates: int = 100
    methods: tuple = METHODS
    gamma1: float = 1.0
    gamma2: float = 1.0
    init: str = "ridge"
    n_grid: int = 30
    n_pair_grid: int = 10
    k_percent: float = 10.0
    hub_method: str = "threshold"
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.mechanism not in netgen.MECHANISMS:
            raise DataError(f"unknown mechanism {self.mechanism!r}")
        if self.replicates < 1:
            raise DataError("replicates must be at least 1")
        if self.n < 2:
            raise DataError("n must be at least 2")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise DataError(f"unknown methods {sorted(unknown)}")
        InitialEstimator.parse(self.init)
        # generator preconditions, checked up front rather than per replicate
        netgen.generate_network(self.mechanism, self.p, self.seed, 0)


def true_hub_set(spec: netgen.NetworkSpec, k_percent: float = 10.0) -> HubSet:
    """Planted hubs, or for mechanisms without planting the degree-threshold hubs of the truth."""
    if len(spec.hubs) or spec.mechanism != "iv":
        return spec.hubs
    return identify_hubs_threshold(spec.theta0, k_percent)


def data_checksum(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x).tobytes()).hexdigest()[:16]


def fit_methods(s, n, methods, gamma1=1.0, gamma2=1.0, init="ridge", n_grid=30, n_pair_grid=10,
                hub_method="threshold", known_hubs=None, k_percent=10.0, cfg: SolverConfig | None = None):
    """Fit the requested methods on one covariance; returns ``{method: theta}``."""
    p = s.shape[0]
    out = {}
    theta_tilde = None
    if {"ada_glasso", "hw_glasso", "two_step"} & set(methods):
        theta_tilde, _ = initial_estimate(s, init, cfg, n=n)

    def weighted(w):
        fit, _ = select_lambda(s, w, default_grid(s, w, n_grid), n, cfg)
        return fit

    if "glasso" in methods:
        out["glasso"] = weighted(uniform_weights(p)).theta
    if "ada_glasso" in methods:
        # adaptive lasso is the gamma2 = 0 case of the hub weights
        out["ada_glasso"] = weighted(hw_weights(theta_tilde, gamma1=gamma1, gamma2=0.0)).theta
    hw_fit = None
    if "hw_glasso" in methods or "two_step" in methods:
        hw_fit = weighted(hw_weights(theta_tilde, gamma1=gamma1, gamma2=gamma2))
        if "hw_glasso" in methods:
            out["hw_glasso"] = hw_fit.theta
    if "two_step" in methods:
        fit, _, _ = fit_two_step(s, hw_fit, n, hub_method=hub_method, cfg=cfg, k_percent=k_percent,
                                 n_grid=n_pair_grid)
        out["two_step"] = fit.theta
    if "two_step_known_hubs" in methods:
        if known_hubs is None:
            raise DataError("two_step_known_hubs needs the true hub set")
        fit, _, _ = fit_two_step(s, None, n, hub_method="known", known_hubs=known_hubs, cfg=cfg,
                                 n_grid=n_pair_grid)
        out["two_step_known_hubs"] = fit.theta
    return out


def run_replicate(cfg: ExperimentConfig, r: int) -> dict:
    spec = netgen.generate_network(cfg.mechanism, cfg.p, cfg.seed, r)
    x = netgen.sample_replicate(spec, cfg.n)
    s = linalg.sample_covariance(x, center=False)
    hubs = true_hub_set(spec, cfg.k_percent)
    record = {"replicate": r, "checksum": data_checksum(x), "metrics": {}, "errors": {}}
    try:
        thetas = fit_methods(s, cfg.n, cfg.methods, cfg.gamma1, cfg.gamma2, cfg.init, cfg.n_grid,
                             cfg.n_pair_grid, cfg.hub_method, hubs, cfg.k_percent)
    except (ConvergenceError, DataError, ValueError) as exc:
        record["errors"] = {m: str(exc) for m in cfg.methods}
        return record
    for m, theta in thetas.items():
        record["metrics"][m] = evaluate(theta, spec.theta0, hubs, cfg.k_percent).as_dict()
    return record


def aggregate(records, methods) -> dict:
    """Mean and standard error (sample SD / sqrt(count)) per method and metric."""
    rows = {}
    for m in methods:
        vals = [rec["metrics"][m] for rec in records if m in rec["metrics"]]
        row = {"method": m, "replicates": len(vals)}
        for f in METRIC_FIELDS:
            arr = np.array([v[f] for v in vals], dtype=float)
            arr = arr[np.isfinite(arr)]
            row[f"{f}_mean"] = float(arr.mean()) if arr.size else float("nan")
            row[f"{f}_se"] = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else float("nan")
        rows[m] = row
    return rows


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: dict
    records: list = field(default_factory=list)
    failures: int = 0

    def manifest(self) -> dict:
        return {
            "config": asdict(self.config),
            "failures": self.failures,
            "replicate_checksums": [r["checksum"] for r in self.records],
            "versions": {"hwglasso": __version__, "numpy": np.__version__, "python": platform.python_version()},
        }

    def write_table_csv(self, path) -> None:
        """Publication-style table: rates as percentages, one row per method."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            header = ["method", "replicates"]
            for f in METRIC_FIELDS:
                header += [f"{f}_mean", f"{f}_se"]
            w.writerow(header)
            for row in self.rows.values():
                line = [row["method"], row["replicates"]]
                for f in METRIC_FIELDS:
                    scale = 100.0 if f in ("tpr", "tnr") else 1.0
                    line += [f"{scale * row[f'{f}_mean']:.4f}", f"{scale * row[f'{f}_se']:.4f}"]
                w.writerow(line)

    def write_manifest(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.manifest(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _map(fn, items, n_jobs):
    if n_jobs == 1:
        return [fn(i) for i in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(i) for i in items)


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run all replicates and aggregate in replicate order.

    Raises
    ------
    ConvergenceError
        If more than 10% of replicates fail.
    """
    from functools import partial

    records = _map(partial(run_replicate, cfg), range(cfg.replicates), cfg.n_jobs)
    records.sort(key=lambda rec: rec["replicate"])
    failures = sum(1 for rec in records if rec["errors"])
    if failures:
        logger.warning("%d of %d replicates failed", failures, cfg.replicates)
    if failures > MAX_FAILURE_FRACTION * cfg.replicates:
        raise ConvergenceError(f"{failures} of {cfg.replicates} replicates failed")
    ok = [rec for rec in records if not rec["errors"]]
    return ExperimentResult(cfg, aggregate(ok, cfg.methods), records, failures)


def _rate_init(init, n, p):
    if init is not None:
        return init
    # the inverse is consistent once n > p; the fixed-shift ridge is not
    return "inverse" if n > p else "ridge"


def _rate_point(mechanism, p, n_list, seed, method, init, r):
    spec = netgen.generate_network(mechanism, p, seed, r)
    # one long sample per replicate; smaller n use its leading rows
    x_all = netgen.sample_replicate(spec, max(n_list))
    zero = np.triu(spec.theta0, 1) == 0
    zero &= np.triu(np.ones((p, p), dtype=bool), 1)
    hubs = true_hub_set(spec)
    out = []
    for n in n_list:
        s = linalg.sample_covariance(x_all[:n], center=False)
        theta = fit_methods(s, n, (method,), init=_rate_init(init, n, p), known_hubs=hubs)[method]
        rep = evaluate(theta, spec.theta0, hubs)
        tc_zero = float(np.mean(theta[zero] == 0)) if zero.any() else 1.0
        out.append((rep.frobenius_full, rep.frobenius_measure, tc_zero))
    return out


def rate_experiment(mechanism: str, p: int, n_list, replicates: int, seed: int, method: str = "hw_glasso",
                    init: str | None = None, n_jobs: int = 1) -> list[dict]:
    """Estimation error and exact-zero recovery on the true zero set, as ``n`` grows.

    Each replicate draws one network and one sample of size ``max(n_list)``;
    the fits at smaller ``n`` use its leading rows, so the comparison across
    ``n`` is paired. With ``init=None`` the initial estimate is the plain
    inverse when ``n > p`` and the ridge estimate otherwise.
    """
    n_list = [int(n) for n in n_list]
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise DataError("n_list must be strictly ascending")
    from functools import partial

    res = _map(partial(_rate_point, mechanism, p, n_list, seed, method, init), range(replicates), n_jobs)
    arr = np.array(res)  # replicates x len(n_list) x 3
    rows = []
    for k, n in enumerate(n_list):
        rows.append({
            "n": n,
            "frobenius_full_mean": float(arr[:, k, 0].mean()),
            "frobenius_measure_mean": float(arr[:, k, 1].mean()),
            "zero_recovery_mean": float(arr[:, k, 2].mean()),
            "replicates": replicates,
        })
    return rows
