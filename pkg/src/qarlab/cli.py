"""Command-line surface: simulate, fit, mc, empirical.

Machine-readable outputs are CSV; every output file gets a JSON manifest
sidecar (<file>.manifest.json) recording the subcommand, resolved
parameters, master seed, tool version, and wall time. Data files are
byte-reproducible for identical flags and seed; wall time lives only in
the manifest.

Exit codes: 0 success, 2 validation (bad flags or config), 3 ingestion,
4 solver failure, 1 other runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .dgp import DgpConfig, GaussianInnovations, StudentTInnovations, simulate
from .empirics import load_csv, render_table, report_to_csv, table1_report
from .errors import (
    IngestionError,
    InvalidConfigError,
    QarlabError,
    SolverFailureError,
)
from .estimators import (
    bootstrap_xy,
    estimate_sparsity,
    fit_ols,
    fit_quantile,
)
from .empirics import ReportRow, coef_tstat, linear_report_rows
from .limits import OLS, QUANTILE
from .montecarlo import (
    PURPOSE_LIMIT_LAW,
    ExperimentSpec,
    qq_data,
    run_experiment,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2
EXIT_INGESTION = 3
EXIT_SOLVER = 4

_PURPOSE_FLAGS = {
    "size": "size",
    "coverage": "coverage",
    "limit-law": "limit_law",
    "moments": "moment_check",
}


def _fmt(value) -> str:
    return repr(float(value))


def _default_seed() -> int:
    return int(os.environ.get("QARLAB_SEED", "0"))


def _write_manifest(out_path: str, command: str, args: argparse.Namespace,
                    seed: int, wall_time: float) -> None:
    params = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    manifest = {
        "tool": "qarlab",
        "version": __version__,
        "command": command,
        "parameters": {k: (v if isinstance(v, (int, float, bool, str, list)) else str(v))
                       for k, v in params.items()},
        "master_seed": seed,
        "wall_time_seconds": wall_time,
    }
    with open(out_path + ".manifest.json", "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _innovation(args: argparse.Namespace):
    if args.dist == "gaussian":
        return GaussianInnovations(sigma=args.sigma)
    if args.df is None:
        raise InvalidConfigError("--dist student-t requires --df")
    return StudentTInnovations(df=args.df, scale=args.scale)


def _add_dgp_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--n", type=int, required=True, help="sample length")
    sub.add_argument("--c", type=float, required=True, help="persistence coefficient")
    sub.add_argument("--gamma", type=float, default=0.5, help="exponent rate in (0, 1]")
    sub.add_argument("--mu", type=float, default=0.0, help="intercept")
    sub.add_argument("--dist", choices=("gaussian", "student-t"), default="gaussian")
    sub.add_argument("--sigma", type=float, default=1.0, help="gaussian standard deviation")
    sub.add_argument("--df", type=float, default=None, help="student-t degrees of freedom")
    sub.add_argument("--scale", type=float, default=1.0, help="student-t scale")


def _read_sample_csv(path: str) -> np.ndarray:
    try:
        handle = open(path, newline="")
    except OSError as err:
        raise IngestionError(f"cannot open {path}: {err}") from None
    with handle:
        reader = csv.DictReader(handle)
        if not reader.fieldnames or "y" not in reader.fieldnames:
            raise IngestionError(f"{path}: expected a CSV header with a 'y' column")
        values = []
        for line, row in enumerate(reader, start=2):
            cell = (row.get("y") or "").strip()
            try:
                values.append(float(cell))
            except ValueError:
                raise IngestionError(
                    f"{path} row {line}: y cell {cell!r} is not a number"
                ) from None
    return np.asarray(values)


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    config = DgpConfig(n=args.n, c=args.c, gamma=args.gamma, mu=args.mu,
                       innovation=_innovation(args), seed=args.seed)
    sample = simulate(config)
    with open(args.out, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "y"])
        for t, value in enumerate(sample.values):
            writer.writerow([t, _fmt(value)])
    _write_manifest(args.out, "simulate", args, args.seed, time.perf_counter() - start)
    print(f"wrote {len(sample.values)} values to {args.out} "
          f"(rho={config.rho!r}, k_n={config.k_n!r})")
    return EXIT_OK


def _fit_rows(values: np.ndarray, args: argparse.Namespace) -> list[ReportRow]:
    rows: list[ReportRow] = []
    x, y = values[:-1], values[1:]
    if args.ols:
        rows.extend(linear_report_rows(x, y, args.intercept))
    for tau in args.tau or []:
        fit = fit_quantile(values, tau, include_intercept=args.intercept)
        if args.bootstrap > 0:
            boot = bootstrap_xy(values, tau, n_boot=args.bootstrap, seed=args.seed,
                                include_intercept=args.intercept)
            se_mu, se_rho = boot.se_mu, boot.se_rho
        else:
            sparsity = estimate_sparsity(fit.residuals, tau)
            centered = x - x.mean()
            scale = float(np.sqrt(centered @ centered))
            se_rho = float(np.sqrt(tau * (1 - tau)) / (sparsity.value * scale))
            se_mu = float(np.sqrt(tau * (1 - tau)) / sparsity.value
                          * np.sqrt(1 / len(x) + x.mean() ** 2 / scale**2))
        if args.intercept:
            rows.append(ReportRow("qr", tau, True, "mu", fit.mu_hat, se_mu,
                                  coef_tstat(fit.mu_hat, se_mu)))
        rows.append(ReportRow("qr", tau, args.intercept, "rho", fit.rho_hat, se_rho,
                              coef_tstat(fit.rho_hat, se_rho)))
    return rows


def cmd_fit(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    if not args.ols and not args.tau:
        raise InvalidConfigError("nothing to fit: pass --ols and/or --tau LEVEL")
    values = _read_sample_csv(args.input)
    rows = _fit_rows(values, args)
    print(render_table(rows, name=os.path.basename(args.input)))
    if args.out:
        with open(args.out, "w", newline="") as handle:
            report_to_csv(rows, handle)
        _write_manifest(args.out, "fit", args, args.seed, time.perf_counter() - start)
    return EXIT_OK


def cmd_mc(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    config = DgpConfig(n=args.n, c=args.c, gamma=args.gamma, mu=args.mu,
                       innovation=_innovation(args), seed=args.seed)
    include = {"auto": None, "yes": True, "no": False}[args.intercept]
    spec = ExperimentSpec(
        dgp=config,
        estimator=QUANTILE if args.estimator == "quantile" else OLS,
        tau=args.tau if args.estimator == "quantile" else None,
        replications=args.reps,
        purpose=_PURPOSE_FLAGS[args.purpose],
        include_intercept=include,
        alpha=args.alpha,
        level=args.level,
    )
    if args.qq_out and spec.purpose != PURPOSE_LIMIT_LAW:
        raise InvalidConfigError("--qq-out needs --purpose limit-law")
    report = run_experiment(spec, threads=args.threads)

    summary = [
        ("purpose", args.purpose),
        ("estimator", args.estimator),
        ("tau", "" if spec.tau is None else _fmt(spec.tau)),
        ("n", str(config.n)),
        ("c", _fmt(config.c)),
        ("gamma", _fmt(config.gamma)),
        ("mu", _fmt(config.mu)),
        ("replications", str(spec.replications)),
        ("master_seed", str(args.seed)),
        ("include_intercept", str(report.details["include_intercept"]).lower()),
        ("redraws", str(report.details["redraws"])),
        ("sample_mean", _fmt(report.sample_mean)),
        ("sample_variance", _fmt(report.sample_variance)),
    ]
    if report.empirical_size is not None:
        summary.append(("empirical_size", _fmt(report.empirical_size)))
        summary.append(("critical_value", _fmt(report.details["critical_value"])))
    if report.coverage is not None:
        summary.append(("coverage", _fmt(report.coverage)))
    if report.ks_distance is not None:
        summary.append(("ks_distance", _fmt(report.ks_distance)))
    for key in ("target", "drift_mean", "min_stat"):
        if key in report.details:
            summary.append((key, _fmt(report.details[key])))

    for key, value in summary:
        print(f"{key}={value}")

    if args.out:
        with open(args.out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["field", "value"])
            writer.writerows(summary)
        _write_manifest(args.out, "mc", args, args.seed, time.perf_counter() - start)
    if args.stats_out:
        with open(args.stats_out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["rank", "stat"])
            for rank, stat in enumerate(report.stats, start=1):
                writer.writerow([rank, _fmt(stat)])
        _write_manifest(args.stats_out, "mc", args, args.seed,
                        time.perf_counter() - start)
    if args.qq_out:
        reference = spec.reference
        if reference is None:
            from .montecarlo import _auto_reference, _resolve
            reference = _auto_reference(spec, _resolve(spec), args.seed)
        pairs = qq_data(report.stats, reference)
        with open(args.qq_out, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(["theoretical", "empirical"])
            for theo, emp in pairs:
                writer.writerow([_fmt(theo), _fmt(emp)])
        _write_manifest(args.qq_out, "mc", args, args.seed, time.perf_counter() - start)
    return EXIT_OK


def cmd_empirical(args: argparse.Namespace) -> int:
    start = time.perf_counter()
    taus = [float(part) for part in args.taus.split(",") if part.strip()]
    series = load_csv(args.input, date_column=args.date_column,
                      price_column=args.price_column, name=args.name)
    rows = table1_report(series, taus=taus, n_boot=args.bootstrap, seed=args.seed,
                         log_prices=args.log)
    print(render_table(rows, name=series.name))
    if args.out:
        with open(args.out, "w", newline="") as handle:
            report_to_csv(rows, handle)
        _write_manifest(args.out, "empirical", args, args.seed,
                        time.perf_counter() - start)
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qarlab",
        description="Quantile autoregression laboratory for moderate deviations "
                    "from the unit root",
    )
    parser.add_argument("--version", action="version", version=f"qarlab {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="simulate one series to a t,y CSV")
    _add_dgp_flags(sim)
    sim.add_argument("--seed", type=int, default=_default_seed())
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(func=cmd_simulate)

    fit = commands.add_parser("fit", help="fit OLS and/or quantile AR to a t,y CSV")
    fit.add_argument("--in", dest="input", required=True, help="input sample CSV")
    fit.add_argument("--tau", type=float, action="append",
                     help="quantile level; repeatable")
    fit.add_argument("--ols", action="store_true", help="include the linear fit")
    fit.add_argument("--intercept", action="store_true", help="fit with an intercept")
    fit.add_argument("--bootstrap", type=int, default=0,
                     help="xy bootstrap resamples for QR standard errors "
                          "(0 = analytic sparsity-based)")
    fit.add_argument("--seed", type=int, default=_default_seed())
    fit.add_argument("--out", help="also write the report CSV here")
    fit.set_defaults(func=cmd_fit)

    mc = commands.add_parser("mc", help="run a Monte Carlo experiment")
    mc.add_argument("--purpose", required=True, choices=tuple(_PURPOSE_FLAGS))
    mc.add_argument("--estimator", choices=("ols", "quantile"), default="ols")
    mc.add_argument("--tau", type=float, default=0.5, help="quantile level")
    _add_dgp_flags(mc)
    mc.add_argument("--reps", type=int, default=1000, help="replications (>= 100)")
    mc.add_argument("--threads", type=int, default=1, help="worker processes")
    mc.add_argument("--alpha", type=float, default=0.05, help="test size")
    mc.add_argument("--level", type=float, default=0.95, help="confidence level")
    mc.add_argument("--intercept", choices=("auto", "yes", "no"), default="auto")
    mc.add_argument("--seed", type=int, default=_default_seed())
    mc.add_argument("--out", help="summary CSV (field,value)")
    mc.add_argument("--stats-out", dest="stats_out", help="per-replication stats CSV")
    mc.add_argument("--qq-out", dest="qq_out",
                    help="QQ data CSV against the reference law (limit-law only)")
    mc.set_defaults(func=cmd_mc)

    emp = commands.add_parser("empirical", help="estimation report for a price CSV")
    emp.add_argument("--in", dest="input", required=True, help="date,price CSV")
    emp.add_argument("--taus", default="0.05,0.5,0.95",
                     help="comma-separated quantile levels")
    emp.add_argument("--bootstrap", type=int, default=1000,
                     help="xy bootstrap resamples")
    emp.add_argument("--seed", type=int, default=_default_seed())
    emp.add_argument("--log", action="store_true", help="fit log prices")
    emp.add_argument("--date-column", default="date")
    emp.add_argument("--price-column", default="price")
    emp.add_argument("--name", default=None, help="series label")
    emp.add_argument("--out", help="report CSV path")
    emp.set_defaults(func=cmd_empirical)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IngestionError as err:
        print(f"qarlab: ingestion error: {err}", file=sys.stderr)
        return EXIT_INGESTION
    except InvalidConfigError as err:
        print(f"qarlab: invalid configuration: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverFailureError as err:
        print(f"qarlab: solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except QarlabError as err:
        print(f"qarlab: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
