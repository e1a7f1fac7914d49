"""Command-line interface.

Every reporting subcommand writes its delimited/JSON outputs into the output
directory (--out-dir, else $FEEDERLOAD_OUT_DIR, else the working directory)
and renders a matching PNG figure unless --no-plot is given.  Subcommands
whose pipelines draw random subsets take an explicit --seed so reruns are
byte-identical, and flags override anything they duplicate in a config file.

Exit codes: 0 on success, 1 on data or numerical errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io, plots
from .errors import DegenerateDataError, FeederLoadError
from .feeder import group_by_device
from .forecaster import (
    cross_validate_order,
    fit_shape_varx,
    fit_total_arx,
    forecast_day,
    one_step_forecasts,
)
from .residuals import residual_report, sweep_normality
from .scaling import build_agg_curve, cv, fit_scaling_law
from .synth import SynthConfig, synth_population
from .tailmodel import compute_tail_diagnostics, fit_gpd_mle

OUT_DIR_ENV = "FEEDERLOAD_OUT_DIR"

SW_MIN, SW_MAX = 3, 5000


def _out_dir(args) -> Path:
    out = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_levels(text: str) -> list:
    try:
        return [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"levels must be comma-separated integers, got {text!r}"
        )


def _load_population(args):
    if args.population is not None:
        return io.read_population(args.population)
    config = SynthConfig.from_dict(io.read_json(args.synth))
    return synth_population(config)


def _add_population_args(sub) -> None:
    sub.add_argument("population", nargs="?", metavar="POPULATION_DIR",
                     help="population directory written by the synth command")
    sub.add_argument("--synth", metavar="CONFIG_JSON",
                     help="generate the population from a synth config instead")
    sub.add_argument("--levels", type=_parse_levels, required=True,
                     metavar="L1,L2,...", help="aggregation levels (customers)")
    sub.add_argument("--replicates", type=int, default=20,
                     help="subsets per level (default 20)")
    sub.add_argument("--seed", type=int, required=True,
                     help="seed for subset sampling")
    sub.add_argument("--k-total", type=int, default=2,
                     help="total-model order (default 2)")
    sub.add_argument("--k-shape", type=int, default=1,
                     help="shape-model order (default 1)")
    sub.add_argument("--train-frac", type=float, default=0.7,
                     help="fraction of days used for fitting (default 0.7)")
    sub.add_argument("--n-jobs", type=int, default=1,
                     help="worker threads across (level, replicate) cells")


def _check_population_source(parser, args) -> None:
    if (args.population is None) == (args.synth is None):
        parser.error("give a population directory or --synth CONFIG_JSON "
                     "(exactly one)")


def _add_common(sub) -> None:
    sub.add_argument("--out-dir", default=None,
                     help=f"output directory (default ${OUT_DIR_ENV} or .)")
    sub.add_argument("--no-plot", action="store_true",
                     help="skip the PNG figure")


def cmd_fit_gpd(args) -> int:
    values = io.read_loads_csv(args.loads)
    fit = fit_gpd_mle(values, theta=args.theta)
    diag = compute_tail_diagnostics(values,
                                    min_exceedances=args.min_exceedances)
    out = _out_dir(args)
    if args.format == "json":
        io.write_json(io.gpd_fit_to_dict(fit), out / "gpd_fit.json")
    else:
        io.write_gpd_fit_csv(fit, out / "gpd_fit.csv")
    io.write_tail_diagnostics_csvs(diag, out)
    if not args.no_plot:
        plots.plot_tail_diagnostics(diag, out / "gpd_fit.png", fit=fit)
    print(fit.summary())
    print(f"n={values.size} mean_excess_points={diag.mean_excess.shape[0]}")
    return 0


def cmd_group_feeder(args) -> int:
    tree = io.read_tree_csv(args.tree, root_load=args.root_load)
    groups = group_by_device(tree)
    out = _out_dir(args)
    io.write_groups_csv(groups, out / "groups.csv")
    if not args.no_plot:
        plots.plot_groups(groups, out / "groups.png")
    print(f"vertices={len(tree.vertices)} groups={len(groups)} "
          f"total_kwh={tree.total_load()!r}")
    return 0


def cmd_forecast(args) -> int:
    history = io.read_history_csv(args.history)
    if args.k == "cv":
        result = cross_validate_order(history, args.candidates,
                                      n_folds=args.folds)
        k_total = result.best_k
        scores = ", ".join(f"{k}: {v:.6g}"
                           for k, v in sorted(result.scores.items()))
        print(f"selected K={k_total} by cross-validation (scores: {scores})")
        for k, reason in result.skipped:
            print(f"skipped K={k}: {reason}")
    else:
        try:
            k_total = int(args.k)
        except ValueError:
            raise FeederLoadError(
                f"--k must be an integer or 'cv', got {args.k!r}"
            )
    total_model = fit_total_arx(history, k_total)
    shape_model = fit_shape_varx(history, args.k_shape)

    out = _out_dir(args)
    io.write_model_json(total_model, out / "total_model.json")
    io.write_model_json(shape_model, out / "shape_model.json")

    n_train = max(int(args.train_frac * history.n_days),
                  max(k_total, args.k_shape))
    if n_train < history.n_days:
        pred = one_step_forecasts(history, total_model, shape_model, n_train)
        actual = history.loads[n_train:]
        dates = (history.dates[n_train:history.n_days]
                 if history.dates is not None
                 else [f"day{d}" for d in range(n_train, history.n_days)])
        io.write_residuals_csv(dates, actual, pred, out / "residuals.csv")
        print(f"eval_days={history.n_days - n_train} "
              f"cv_pct={cv(actual, pred)!r}")
        _write_residual_report(actual - pred, out)

    profile = forecast_day(total_model, shape_model, history)
    io.write_forecast_csv(profile, out / "forecast.csv")
    if not args.no_plot:
        plots.plot_forecast(history, profile, out / "forecast.png")
    print(f"forecast_total_kwh={float(np.sum(profile))!r}")
    return 0


def _write_residual_report(residuals, out: Path) -> None:
    flat = np.asarray(residuals, dtype=float).ravel()
    if not SW_MIN <= flat.size <= SW_MAX:
        print(f"residual report skipped: {flat.size} residuals outside "
              f"the [{SW_MIN}, {SW_MAX}] normality-test range")
        return
    try:
        report = residual_report(flat, max_lag=min(24, flat.size - 1))
    except DegenerateDataError as exc:
        print(f"residual report skipped: {exc}")
        return
    io.write_json(io.residual_report_to_dict(report),
                  out / "residual_report.json")
    print(f"gamma={report.gamma!r} gamma_thresholded="
          f"{report.gamma_thresholded!r} sw_pass={report.sw_pass}")


def cmd_synth(args) -> int:
    raw = io.read_json(args.config)
    if not isinstance(raw, dict):
        raise FeederLoadError(f"{args.config}: expected a JSON object")
    for key in ("n_customers", "n_days", "seed"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    config = SynthConfig.from_dict(raw)
    population = synth_population(config)
    out = _out_dir(args)
    paths = io.write_population(population, out)
    print(f"customers={population.n_customers} days={population.n_days} "
          f"files={', '.join(str(p) for p in paths.values())}")
    return 0


def cmd_agg_curve(args) -> int:
    population = _load_population(args)
    curve = build_agg_curve(population, args.levels, args.replicates,
                            args.seed, k_total=args.k_total,
                            k_shape=args.k_shape, train_frac=args.train_frac,
                            n_jobs=args.n_jobs)
    law = fit_scaling_law(curve, p=args.p)
    out = _out_dir(args)
    io.write_agg_curve_csv(curve, out / "agg_curve.csv")
    io.write_json(io.scaling_law_to_dict(law), out / "scaling_law.json")
    if not args.no_plot:
        plots.plot_agg_curve(curve, out / "agg_curve.png", law=law)
    for level, reason in curve.skipped:
        print(f"skipped level {level}: {reason}")
    w_star = io.scaling_law_to_dict(law)["w_star"]
    print(f"points={len(curve.points)} beta0={law.beta0!r} "
          f"beta1={law.beta1!r} w_star={w_star!r} "
          f"irreducible_pct={law.irreducible_pct!r}")
    return 0


def cmd_residual_sweep(args) -> int:
    population = _load_population(args)
    result = sweep_normality(population, args.levels, args.replicates,
                             args.seed, alpha=args.alpha,
                             max_lag=args.max_lag, k_total=args.k_total,
                             k_shape=args.k_shape, train_frac=args.train_frac,
                             n_jobs=args.n_jobs)
    out = _out_dir(args)
    io.write_sweep_csv(result, out / "sweep.csv")
    io.write_json(io.sweep_meta_to_dict(result), out / "sweep_meta.json")
    if not args.no_plot:
        plots.plot_sweep(result, out / "sweep.png")
    for level, n, pf, g, gt in result.table:
        print(f"level={int(level)} pass_fraction={float(pf)!r} "
              f"mean_gamma={float(g)!r} "
              f"mean_gamma_thresholded={float(gt)!r}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feederload",
        description="Heavy-tailed feeder load modeling, day-ahead "
                    "forecasting, and aggregation-error scaling.",
    )
    parser.add_argument("--log-level", default="WARNING",
                        help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit-gpd",
                       help="fit the generalized Pareto model and emit "
                            "the tail diagnostics")
    p.add_argument("loads", help="CSV of load values (load_kwh)")
    p.add_argument("--theta", type=float, default=None,
                   help="fixed location (default: sample-minimum policy)")
    p.add_argument("--min-exceedances", type=int, default=10)
    p.add_argument("--format", choices=("json", "csv"), default="json",
                   help="fit artifact format (diagnostics are always CSV)")
    _add_common(p)
    p.set_defaults(func=cmd_fit_gpd)

    p = sub.add_parser("group-feeder", help="device groups of a feeder tree")
    p.add_argument("tree",
                   help="edge-list CSV (parent,child,device,child_load_kwh)")
    p.add_argument("--root-load", type=float, default=0.0)
    _add_common(p)
    p.set_defaults(func=cmd_group_feeder)

    p = sub.add_parser("forecast", help="day-ahead forecast from a history CSV")
    p.add_argument("history", help="history CSV (date,hour,load_kwh,temp_c)")
    p.add_argument("--k", default="2",
                   help="total-model order, or 'cv' to select it (default 2)")
    p.add_argument("--k-shape", type=int, default=1)
    p.add_argument("--candidates", type=_parse_levels, default=[1, 2, 3, 7],
                   metavar="K1,K2,...", help="orders tried when --k cv")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--train-frac", type=float, default=0.7,
                   help="split for the residual report (default 0.7)")
    _add_common(p)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--config", required=True, help="synth config JSON")
    p.add_argument("--out", dest="out_dir", default=None,
                   help="output directory (alias of --out-dir)")
    p.add_argument("--out-dir", dest="out_dir", default=None,
                   help=argparse.SUPPRESS)
    p.add_argument("--n-customers", type=int, default=None,
                   help="override the config's n_customers")
    p.add_argument("--n-days", type=int, default=None,
                   help="override the config's n_days")
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("agg-curve",
                       help="forecast-error cv vs aggregate size, plus law fit")
    _add_population_args(p)
    p.add_argument("--p", type=float, default=1.0,
                   help="scaling-law exponent (default 1)")
    _add_common(p)
    p.set_defaults(func=cmd_agg_curve)

    p = sub.add_parser("residual-sweep",
                       help="normality and correlation sweep over levels")
    _add_population_args(p)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--max-lag", type=int, default=24)
    _add_common(p)
    p.set_defaults(func=cmd_residual_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command in ("agg-curve", "residual-sweep"):
        _check_population_source(parser, args)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(),
                                      logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FeederLoadError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
