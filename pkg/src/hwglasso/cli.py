"""Command-line interface: ``hwglasso <command> [options]``.

Exit codes: 0 success, 2 usage, 3 data error, 4 solver non-convergence,
5 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, linalg, netgen
from .exceptions import ConvergenceError

logger = logging.getLogger("hwglasso")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER, EXIT_INTERNAL = 0, 2, 3, 4, 5
OUT_ENV = "HWGLASSO_OUT"


class UsageError(Exception):
    pass


def write_json_atomic(path, obj) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    os.replace(tmp, path)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(type(o).__name__)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV)
    if not out:
        raise UsageError("--out is required (or set HWGLASSO_OUT)")
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _finish(args, out: Path, outputs: list, extra: dict | None = None) -> None:
    """Write the run manifest last, so its presence marks complete outputs."""
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    manifest = {
        "command": args.command,
        "config": config,
        "seed": args.seed,
        "outputs": [str(p) for p in outputs],
        "started": args._started,
        "finished": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "versions": {"hwglasso": __version__, "numpy": np.__version__, "python": platform.python_version()},
        **(extra or {}),
    }
    manifest["config"].pop("_started", None)
    write_json_atomic(out / "manifest.json", manifest)


def _read_data(path):
    x, labels = linalg.read_matrix_csv(path)
    return linalg.as_data_matrix(x, min_rows=2), labels


def _load_covariance(args):
    """``(s, n, labels, data)`` from ``--data`` or ``--cov`` with ``--n``."""
    if args.data and args.cov:
        raise UsageError("give either --data or --cov, not both")
    if args.data:
        x, labels = _read_data(args.data)
        return linalg.sample_covariance(x, center=not args.no_center), x.shape[0], labels, x
    if args.cov:
        s, labels = linalg.read_matrix_csv(args.cov, symmetric=True)
        if args.n is None:
            raise UsageError("--cov needs --n (sample size)")
        return s, args.n, labels, None
    raise UsageError("one of --data or --cov is required")


# -- simulate ---------------------------------------------------------------

def cmd_simulate(args) -> int:
    out = _out_dir(args)
    spec = netgen.generate_network(args.mechanism, args.p, args.seed, args.replicate)
    spec.save(out)
    outputs = [out / "adjacency.csv", out / "theta0.csv", out / "hubs.json", out / "seed.json"]
    if args.n:
        x = netgen.sample_replicate(spec, args.n)
        linalg.write_matrix_csv(out / "data.csv", x)
        outputs.append(out / "data.csv")
    _finish(args, out, outputs)
    return EXIT_OK


# -- fit / kkt --------------------------------------------------------------

def _grid_arg(text):
    if text is None:
        return None
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_fit(args) -> int:
    from .glasso import SolverConfig, write_edge_list
    from .selection import default_grid, select_lambda
    from .two_step import HubSet, fit_two_step
    from .weights import InitialEstimator, hw_weights, initial_estimate, uniform_weights, write_weights_csv

    out = _out_dir(args)
    s, n, labels, x = _load_covariance(args)
    if args.standardize:
        if x is None:
            raise UsageError("--standardize needs --data")
        s, _ = linalg.sample_correlation(x, labels)
    p = s.shape[0]
    cfg = SolverConfig(kkt_tol=args.kkt_tol)
    gamma2 = 0.0 if args.method == "ada" else args.gamma2
    init = InitialEstimator.parse(args.init)

    info = {}
    if args.method == "glasso":
        weights = uniform_weights(p)
    else:
        theta_tilde, info = initial_estimate(s, init, cfg, n=n)
        weights = hw_weights(theta_tilde, gamma1=args.gamma1, gamma2=gamma2)

    known = None
    if args.known_hubs:
        known = HubSet.from_json(Path(args.known_hubs).read_text()).validate(p)

    if args.method == "two-step":
        first = None
        if known is None:
            grid = _grid_arg(args.grid) or default_grid(s, weights, args.n_grid)
            first, _ = select_lambda(s, weights, grid, n, cfg)
        fit, hubs, report = fit_two_step(s, first, n, hub_method="known" if known else args.hub_method,
                                         cfg=cfg, known_hubs=known, k_percent=args.k_percent,
                                         n_grid=args.n_pair_grid)
        info["hubs"] = list(hubs.indices)
        penalty = _pair_penalty(hubs, report.chosen_lambda, p)
    else:
        grid = _grid_arg(args.grid) or default_grid(s, weights, args.n_grid)
        fit, report = select_lambda(s, weights, grid, n, cfg)
        from .glasso import PenaltyMatrix

        penalty = PenaltyMatrix.from_weights(report.chosen_lambda, weights)

    if not fit.converged:
        raise ConvergenceError(f"selected fit did not converge (kkt={fit.kkt_violation:.3g})")

    linalg.write_matrix_csv(out / "theta.csv", fit.theta, labels)
    write_weights_csv(out / "penalty.csv", penalty.rho, labels)
    write_edge_list(out / "edges.tsv", fit.theta, labels)
    (out / "selection.json").write_text(report.to_json() + "\n")
    report.write_path_csv(out / "path.csv")
    write_json_atomic(out / "fit.json", {**fit.summary(), "initial": info, "method": args.method,
                                          "standardized": args.standardize})
    outputs = [out / f for f in ("theta.csv", "penalty.csv", "edges.tsv", "selection.json", "path.csv", "fit.json")]
    _finish(args, out, outputs)
    print(json.dumps({"edges": fit.edge_count, "kkt": fit.kkt_violation, "lambda": report.chosen_lambda}))
    return EXIT_OK


def _pair_penalty(hubs, lams, p):
    from .two_step import two_step_weights

    return two_step_weights(hubs, lams[0], lams[1], p)


def cmd_kkt(args) -> int:
    from .glasso import PenaltyMatrix, kkt_residual
    from .weights import read_weights_csv

    s, _, _, _ = _load_covariance(args) if (args.data or args.cov) else (None,) * 4
    if s is None:
        raise UsageError("one of --data or --cov is required")
    theta, _ = linalg.read_matrix_csv(args.theta, symmetric=True)
    rho, _ = read_weights_csv(args.penalty)
    value = kkt_residual(s, theta, PenaltyMatrix(rho))
    ok = value <= args.kkt_tol
    print(json.dumps({"kkt_violation": value, "tolerance": args.kkt_tol, "ok": bool(ok)}))
    return EXIT_OK if ok else EXIT_SOLVER


# -- benchmark / stability / permtest ---------------------------------------

def cmd_benchmark(args) -> int:
    from .benchmark import METHODS, ExperimentConfig, run_experiment

    out = _out_dir(args)
    methods = tuple(args.methods.split(",")) if args.methods else METHODS
    cfg = ExperimentConfig(mechanism=args.mechanism, n=args.n, p=args.p, replicates=args.reps, methods=methods,
                           gamma1=args.gamma1, gamma2=args.gamma2, init=args.init, hub_method=args.hub_method,
                           seed=args.seed, n_jobs=args.jobs)
    res = run_experiment(cfg)
    stem = f"table_{args.mechanism}_n{args.n}_p{args.p}"
    res.write_table_csv(out / f"{stem}.csv")
    write_json_atomic(out / f"{stem}_replicates.json", res.records)
    _finish(args, out, [out / f"{stem}.csv", out / f"{stem}_replicates.json"], {"experiment": res.manifest()})
    return EXIT_OK


def _recipe(args):
    from .microbiome import HWGlassoRecipe

    return HWGlassoRecipe(gamma1=args.gamma1, gamma2=args.gamma2, init=args.init)


def cmd_stability(args) -> int:
    from .microbiome import AbundanceTable, bootstrap_stability, write_stable_network

    out = _out_dir(args)
    recipe = _recipe(args)
    if args.no_clr:
        data, labels = _read_data(args.data)
    else:
        data = AbundanceTable.read_csv(args.data)
        labels = data.taxa
    res = bootstrap_stability(data, recipe, B=args.B, threshold=args.threshold, seed=args.seed, n_jobs=args.jobs)
    res.labels = labels
    (out / "stability.json").write_text(res.to_json() + "\n")
    outputs = [out / "stability.json"]
    if args.network:
        from .microbiome import clr_transform

        x = data if args.no_clr else clr_transform(data)
        fit, _ = recipe.select(x)
        write_stable_network(out / "network.tsv", fit.theta, res, labels)
        outputs.append(out / "network.tsv")
    _finish(args, out, outputs, {"failures": res.failures})
    return EXIT_OK


def cmd_permtest(args) -> int:
    from .microbiome import STATISTICS, AbundanceTable, clr_transform, permutation_test

    out = _out_dir(args)

    def load(path):
        if args.no_clr:
            return _read_data(path)[0]
        return clr_transform(AbundanceTable.read_csv(path))

    stats = tuple(args.statistics.split(",")) if args.statistics else STATISTICS
    res = permutation_test(load(args.group_a), load(args.group_b), stats, R=args.R, seed=args.seed,
                           recipe=_recipe(args), reselect=args.reselect, n_jobs=args.jobs)
    (out / "permtest.json").write_text(res.to_json() + "\n")
    _finish(args, out, [out / "permtest.json"], {"failures": res.failures})
    print(json.dumps({k: v for k, v in res.to_dict()["p_values"].items() if not isinstance(v, list)}))
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _common(sp, out=True):
    sp.add_argument("--seed", type=int, required=True, help="master random seed")
    sp.add_argument("--config", help="JSON file whose keys supply option defaults")
    if out:
        sp.add_argument("--out", help=f"output directory (default: ${OUT_ENV})")


def _method_opts(sp):
    sp.add_argument("--gamma1", type=float, default=1.0)
    sp.add_argument("--gamma2", type=float, default=1.0)
    sp.add_argument("--init", default="ridge", help="ridge[:alpha] | glasso[:lam0] | inverse")


def _input_opts(sp):
    sp.add_argument("--data", help="samples x variables CSV (optional header row)")
    sp.add_argument("--cov", help="covariance CSV (requires --n)")
    sp.add_argument("--n", type=int, help="sample size when --cov is given")
    sp.add_argument("--no-center", action="store_true", help="do not centre data columns")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hwglasso", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="generate a synthetic hub network")
    _common(sp)
    sp.add_argument("--mechanism", choices=netgen.MECHANISMS, required=True)
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--replicate", type=int, default=0)
    sp.add_argument("--n", type=int, help="also draw n Gaussian samples into data.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("fit", help="fit a weighted graphical lasso with BIC tuning")
    _common(sp)
    _input_opts(sp)
    _method_opts(sp)
    sp.add_argument("--method", choices=("hw", "ada", "glasso", "two-step"), default="hw")
    sp.add_argument("--known-hubs", help="hubs.json with the hub indices (two-step)")
    sp.add_argument("--hub-method", choices=("threshold", "kmeans"), default="threshold")
    sp.add_argument("--k-percent", type=float, default=10.0)
    sp.add_argument("--grid", help="comma-separated descending lambda values")
    sp.add_argument("--n-grid", type=int, default=30)
    sp.add_argument("--n-pair-grid", type=int, default=10)
    sp.add_argument("--kkt-tol", type=float, default=1e-4)
    sp.add_argument("--standardize", action="store_true",
                    help="fit on the correlation matrix; theta.csv is then on the correlation scale")
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("kkt", help="check the optimality residual of a fitted precision matrix")
    _common(sp, out=False)
    _input_opts(sp)
    sp.add_argument("--theta", required=True)
    sp.add_argument("--penalty", required=True)
    sp.add_argument("--kkt-tol", type=float, default=1e-4)
    sp.set_defaults(func=cmd_kkt)

    sp = sub.add_parser("benchmark", help="simulation study over replicates")
    _common(sp)
    _method_opts(sp)
    sp.add_argument("--mechanism", choices=netgen.MECHANISMS, required=True)
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--p", type=int, default=50)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--methods", help="comma-separated subset of methods")
    sp.add_argument("--hub-method", choices=("threshold", "kmeans"), default="threshold")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_benchmark)

    sp = sub.add_parser("stability", help="bootstrap edge reproducibility")
    _common(sp)
    _method_opts(sp)
    sp.add_argument("--data", required=True, help="abundance CSV (sample id column, taxa header)")
    sp.add_argument("--no-clr", action="store_true", help="input is already a numeric data matrix")
    sp.add_argument("--B", type=int, default=100)
    sp.add_argument("--threshold", type=float, default=0.8)
    sp.add_argument("--network", action="store_true", help="also write the stable-edge network")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_stability)

    sp = sub.add_parser("permtest", help="permutation test for network differences between two groups")
    _common(sp)
    _method_opts(sp)
    sp.add_argument("--group-a", required=True)
    sp.add_argument("--group-b", required=True)
    sp.add_argument("--no-clr", action="store_true")
    sp.add_argument("--R", type=int, default=1000)
    sp.add_argument("--statistics", help="comma-separated statistics")
    sp.add_argument("--reselect", action="store_true", help="rerun BIC selection in every permutation")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_permtest)
    return ap


def parse_args(argv=None):
    ap = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = json.loads(Path(known.config).read_text())
        except (OSError, ValueError) as exc:
            ap.error(f"cannot read config {known.config}: {exc}")
        if not isinstance(cfg, dict):
            ap.error("config file must hold a JSON object")
        # config values become defaults, so explicit flags still win
        for sub in ap._subparsers._group_actions[0].choices.values():
            for action in sub._actions:
                if action.dest in cfg:
                    action.default = cfg[action.dest]
                    action.required = False
        args = ap.parse_args(argv)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        unknown = set(cfg) - {a.dest for a in sub._actions}
        if unknown:
            ap.error(f"unknown config keys: {sorted(unknown)}")
        return args
    return ap.parse_args(argv)


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    args._started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hwglasso: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"hwglasso: solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"hwglasso: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - last resort
        logger.exception("internal error")
        print(f"hwglasso: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
