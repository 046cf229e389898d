"""Command-line entry point ``macropeaks``.

Subcommands cover the individual modules (``check-conditions``,
``covariance``, ``simulate``, ``peaks``, ``dimension``, ``bounds``) and
the configured pipelines (``run``, ``suite``).  Exit codes: 0 success,
2 configuration error, 3 numeric failure, 4 unmet acceptance target.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, io
from .bounds import borell_tis_bound, estimate_mu, lopes_bound, lopes_constants, lower_tail_table
from .covariance import EquationSpec, Heat, Wave, correlation_function, covariance, variance
from .dimension import estimate_dim_bisection, estimate_dim_counting, thickness_test
from .errors import ConfigError, MacropeaksError, NonVanishingCorrelation
from .experiment import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, run_experiment, run_suite
from .fieldgen import FieldSample, sample_cholesky, sample_circulant_1d
from .peaks import GaugeParams, extract_spatial_peaks
from .spectral import check_dalang, check_reinforced, mixing_functional, model_from_config

log = logging.getLogger("macropeaks")


def _model(args):
    cfg = json.loads(args.correlation)
    if not isinstance(cfg, dict):
        raise ConfigError("correlation", "expected a JSON object")
    try:
        return model_from_config(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError("correlation", str(exc)) from exc


def _spec(args) -> EquationSpec:
    eq = Heat(args.alpha) if args.equation == "heat" else Wave()
    return EquationSpec(eq, _model(args))


def _emit(args, name: str, obj) -> None:
    text = io.dumps(obj)
    if args.out:
        path = io.atomic_write_text(Path(args.out) / f"{name}.json", text)
        log.info("wrote %s", path)
    sys.stdout.write(text)


def cmd_check_conditions(args) -> int:
    model = _model(args)
    reports = [check_dalang(model, args.alpha)]
    for eta in args.eta:
        reports.append(check_reinforced(model, args.alpha, eta))
    out = {"model": model.to_config(), "conditions": [r.as_dict() for r in reports]}
    if args.mixing:
        out["mixing"] = {str(z): mixing_functional(model, args.alpha, z) for z in args.mixing}
    _emit(args, "conditions", out)
    return EXIT_OK


def cmd_covariance(args) -> int:
    spec = _spec(args)
    if args.correlation_table:
        try:
            table = correlation_function(spec, args.time, max_lag=args.max_lag)
        except NonVanishingCorrelation as exc:
            log.warning("%s", exc)
            table = exc.table
        if args.out:
            table.to_csv(Path(args.out) / "correlation.csv")
        _emit(args, "covariance", {"lags": table.lags, "correlation": table.values, "monotone": table.monotone,
                                   "vanishing": table.vanishing})
        return EXIT_OK
    rows = [{"z": z, "covariance": covariance(spec, args.time, z).value} for z in args.lag]
    _emit(args, "covariance", {"t": args.time, "variance": variance(spec, args.time), "rows": rows})
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _model(args)
    if args.points:
        _, arr = io.read_csv_array(args.points)
        fld = sample_cholesky(model, arr, args.seed)
    else:
        fld = sample_circulant_1d(model, args.n_points, args.spacing, args.origin, args.seed)
    path = Path(args.out or ".") / "field.csv"
    fld.to_csv(path)
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_peaks(args) -> int:
    fld = FieldSample.from_csv(args.field)
    peaks = extract_spatial_peaks(fld, GaugeParams(args.gamma, args.variance))
    path = Path(args.out or ".") / "peaks.csv"
    peaks.to_csv(path)
    sys.stdout.write(f"{len(peaks)} peaks written to {path}\n")
    return EXIT_OK


def cmd_dimension(args) -> int:
    _, arr = io.read_csv_array(args.points)
    pts = arr[:, : args.d]
    out = {}
    if "counting" in args.method:
        out["counting"] = estimate_dim_counting(pts, (args.n_min, args.n_max), args.d).as_dict()
    if "bisection" in args.method:
        out["bisection"] = estimate_dim_bisection(pts, args.n_max, args.tolerance, args.d).as_dict()
    for theta in args.theta:
        out[f"thickness:{theta:g}"] = thickness_test(pts, theta, (args.n_min, args.n_max)).as_dict()
    _emit(args, "dimension", out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    if args.kind == "borell":
        model = _model(args)
        params = estimate_mu(model, [args.anchor] * model.d, args.mesh, args.replicates, args.seed)
        rows = [{"x": params.mu + s, "bound": borell_tis_bound(params.mu + s, params)} for s in (1.0, 2.0, 3.0)]
        _emit(args, "borell", {"mu": params.mu, "stderr": params.stderr, "rows": rows})
    else:
        params = lopes_constants(args.rho0, args.gamma0)
        table = lower_tail_table(args.n, args.rho0, args.gamma0, args.replicates, args.seed)
        rows = [{"n": e.n, "probability": e.probability, "stderr": e.stderr, "bound_C1": lopes_bound(e.n, params)}
                for e in table]
        _emit(args, "lopes", {"alpha0": params.alpha0, "beta0": params.beta0, "rows": rows})
    return EXIT_OK


def cmd_run(args) -> int:
    record = run_experiment(args.config, args.threads, args.out, args.seed)
    sys.stdout.write(io.dumps({"name": record.name, "passed": record.passed, "targets": record.targets,
                               "aggregates": record.aggregates}))
    return EXIT_OK if record.passed else EXIT_ACCEPTANCE


def cmd_suite(args) -> int:
    summary = run_suite(args.directory, args.threads, args.out, args.seed)
    for row in summary.rows:
        sys.stdout.write(f"{row['config']}: {row['status']} {row['detail']}\n")
    return summary.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="macropeaks", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=None, help="override the seed (default: config value or 0)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (MACROPEAKS_THREADS overrides)")
    parser.add_argument("--out", default=None, help="output directory for CSV/JSON artifacts")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    corr_help = 'correlation block as JSON, e.g. \'{"kind": "exponential", "lambda": 1}\''

    p = sub.add_parser("check-conditions", help="Dalang, reinforced and mixing checks")
    p.add_argument("--correlation", required=True, help=corr_help)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--eta", type=float, nargs="*", default=[])
    p.add_argument("--mixing", type=float, nargs="*", default=[], help="lags for the mixing functional")
    p.set_defaults(func=cmd_check_conditions)

    p = sub.add_parser("covariance", help="solution covariance or correlation table")
    p.add_argument("--correlation", required=True, help=corr_help)
    p.add_argument("--equation", choices=["heat", "wave"], default="heat")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--time", type=float, default=1.0)
    p.add_argument("--lag", type=float, nargs="*", default=[0.0])
    p.add_argument("--correlation-table", action="store_true")
    p.add_argument("--max-lag", type=float, default=100.0)
    p.set_defaults(func=cmd_covariance)

    p = sub.add_parser("simulate", help="draw a unit-variance field")
    p.add_argument("--correlation", required=True, help=corr_help)
    p.add_argument("--points", help="CSV of points for the Cholesky sampler (default: 1-D lattice)")
    p.add_argument("--n-points", type=int, default=1024)
    p.add_argument("--spacing", type=float, default=1.0)
    p.add_argument("--origin", type=float, default=3.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("peaks", help="extract tall peaks from a field CSV")
    p.add_argument("field")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--variance", type=float, default=1.0)
    p.set_defaults(func=cmd_peaks)

    p = sub.add_parser("dimension", help="estimate the dimension of a point set CSV")
    p.add_argument("points")
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--method", nargs="+", choices=["counting", "bisection"], default=["counting"])
    p.add_argument("--n-min", type=int, default=1)
    p.add_argument("--n-max", type=int, default=10)
    p.add_argument("--tolerance", type=float, default=0.02)
    p.add_argument("--theta", type=float, nargs="*", default=[])
    p.set_defaults(func=cmd_dimension)

    p = sub.add_parser("bounds", help="Borell-TIS or equicorrelated-maximum tables")
    p.add_argument("kind", choices=["borell", "lopes"])
    p.add_argument("--correlation", help=corr_help)
    p.add_argument("--anchor", type=float, default=5.0)
    p.add_argument("--mesh", type=int, default=17)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--rho0", type=float, default=0.3)
    p.add_argument("--gamma0", type=float, default=0.25)
    p.add_argument("--n", type=int, nargs="+", default=[256, 512, 1024])
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("suite", help="run every config in a directory")
    p.add_argument("directory")
    p.set_defaults(func=cmd_suite)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    env_threads = os.environ.get("MACROPEAKS_THREADS")
    if env_threads:
        try:
            args.threads = int(env_threads)
        except ValueError:
            sys.stderr.write(f"config error: MACROPEAKS_THREADS={env_threads!r} is not an integer\n")
            return EXIT_CONFIG
    if args.seed is None and args.command not in ("run", "suite"):
        args.seed = 0
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except json.JSONDecodeError as exc:
        sys.stderr.write(f"config error: correlation: {exc}\n")
        return EXIT_CONFIG
    except (MacropeaksError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"numeric failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
