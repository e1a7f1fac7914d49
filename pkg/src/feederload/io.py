"""Delimited and JSON serialization for every pipeline artifact.

Writers are atomic (temp file in the target directory, then os.replace) so a
crash never leaves a half-written artifact, and floats are rendered with
repr, the shortest form that parses back to the identical double.  Together
with fixed row ordering this makes rerunning a seeded pipeline byte-identical.

Schemas (headers are required and exact):

* load values:   load_kwh                          (header optional)
* feeder tree:   parent,child,device,child_load_kwh
* device groups: group_edge,total_load_kwh,n_vertices
* load history:  date,hour,load_kwh,temp_c        (empty load = forecast day)
* forecast:      hour,load_kwh
* residuals:     date,hour,actual_kwh,predicted_kwh,residual_kwh
* agg curve:     level,replicate,W_kwh,cv_pct
* sweep:         level,n_customers,pass_fraction,mean_gamma
* mean excess:   threshold_kwh,mean_excess_kwh
* zipf:          log_rank,log_load
* log survival:  log_load,log_survival

The thresholded correlation energies travel in the sweep's JSON sidecar, and
fitted models round-trip through JSON that records the order, every
coefficient array and the lag orientation.
"""

from __future__ import annotations

import csv
import datetime
import json
import os
from pathlib import Path

import numpy as np

from .errors import DomainError, SchemaError
from .feeder import FeederTree, edge_label
from .forecaster import HOURS, ArxModel, LoadHistory, VectorArxModel
from .residuals import ResidualReport, SweepResult
from .scaling import AggregationPoint, ScalingLaw
from .synth import Population, SynthConfig
from .tailmodel import GpdFit, TailDiagnostics

__all__ = [
    "read_loads_csv",
    "write_loads_csv",
    "read_tree_csv",
    "write_tree_csv",
    "write_groups_csv",
    "read_history_csv",
    "write_history_csv",
    "write_forecast_csv",
    "write_residuals_csv",
    "read_agg_curve_csv",
    "write_agg_curve_csv",
    "write_sweep_csv",
    "write_json",
    "read_json",
    "write_model_json",
    "read_model_json",
    "gpd_fit_to_dict",
    "write_gpd_fit_csv",
    "scaling_law_to_dict",
    "residual_report_to_dict",
    "sweep_meta_to_dict",
    "write_tail_diagnostics_csvs",
    "write_population",
    "read_population",
]

_FALLBACK_START_DATE = "2000-01-01"


def _fmt(value: float) -> str:
    """Shortest decimal text that round-trips to the same float."""
    return repr(float(value))


def _atomic_write_text(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_csv(path, header: list, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _read_rows(path, expected_header: list, header_optional: bool = False):
    """Yield (line_number, row) after validating the header."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    rows = [(i + 1, row) for i, row in enumerate(reader) if row]
    if not rows:
        raise SchemaError(f"{path}: file is empty")
    first = [c.strip() for c in rows[0][1]]
    if first == expected_header:
        return rows[1:]
    if header_optional:
        return rows
    raise SchemaError(
        f"{path}: expected header {','.join(expected_header)!r}, "
        f"got {','.join(first)!r}"
    )


def _parse_float(path, lineno: int, text: str, column: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise SchemaError(
            f"{path}: line {lineno}: {column} value {text!r} is not a number"
        ) from exc


def _parse_int(path, lineno: int, text: str, column: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise SchemaError(
            f"{path}: line {lineno}: {column} value {text!r} is not an integer"
        ) from exc


# ---------------------------------------------------------------------------
# Plain load values


def read_loads_csv(path) -> np.ndarray:
    """One load per line; a leading 'load_kwh' header line is allowed."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise SchemaError(f"{path}: file is empty")
    start = 0
    if lines[0] == "load_kwh":
        start = 1
    elif not _is_number(lines[0]):
        raise SchemaError(
            f"{path}: expected a 'load_kwh' header or a number, got {lines[0]!r}"
        )
    values = [_parse_float(path, i + 1, ln, "load_kwh")
              for i, ln in enumerate(lines[start:], start=start)]
    if not values:
        raise SchemaError(f"{path}: no load values after the header")
    return np.array(values, dtype=float)


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def write_loads_csv(values, path) -> None:
    _write_csv(path, ["load_kwh"], ([_fmt(v)] for v in np.asarray(values).ravel()))


# ---------------------------------------------------------------------------
# Feeder trees and device groups


def read_tree_csv(path, root_load: float = 0.0) -> FeederTree:
    """Edge list with header parent,child,device,child_load_kwh.

    The device field is 'fuse', 'switch' or empty.  The root vertex never
    appears as a child, so its load is taken from root_load.
    """
    rows = _read_rows(path, ["parent", "child", "device", "child_load_kwh"])
    edges = []
    for lineno, row in rows:
        if len(row) != 4:
            raise SchemaError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
        parent, child, device, load = (c.strip() for c in row)
        edges.append((parent, child, device or None,
                      _parse_float(path, lineno, load, "child_load_kwh")))
    return FeederTree.from_edges(edges, root_load=root_load)


def write_tree_csv(tree: FeederTree, path) -> None:
    rows = ([p, c, device or "", _fmt(load)]
            for p, c, device, load in tree.to_edges())
    _write_csv(path, ["parent", "child", "device", "child_load_kwh"], rows)


def write_groups_csv(groups, path) -> None:
    """Device groups with the residual 'root' group last."""
    rows = ([edge_label(g.edge), _fmt(g.total_load_kwh), str(g.n_vertices)]
            for g in groups)
    _write_csv(path, ["group_edge", "total_load_kwh", "n_vertices"], rows)


# ---------------------------------------------------------------------------
# Load history


def read_history_csv(path) -> LoadHistory:
    """Hourly history with header date,hour,load_kwh,temp_c.

    Every date must carry all 24 hours.  An empty load_kwh marks the
    forecast day: only the last date may have it, and then for all of its
    hours.  Rows may arrive in any order.
    """
    rows = _read_rows(path, ["date", "hour", "load_kwh", "temp_c"])
    per_date: dict = {}
    for lineno, row in rows:
        if len(row) != 4:
            raise SchemaError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
        date, hour_s, load_s, temp_s = (c.strip() for c in row)
        hour = _parse_int(path, lineno, hour_s, "hour")
        if not 0 <= hour < HOURS:
            raise SchemaError(f"{path}: line {lineno}: hour {hour} outside 0..23")
        load = None if load_s == "" else _parse_float(path, lineno, load_s, "load_kwh")
        temp = _parse_float(path, lineno, temp_s, "temp_c")
        slot = per_date.setdefault(date, {})
        if hour in slot:
            raise SchemaError(f"{path}: line {lineno}: duplicate hour {hour} on {date}")
        slot[hour] = (load, temp)

    dates = sorted(per_date)
    loads = []
    temps = []
    for di, date in enumerate(dates):
        slot = per_date[date]
        if sorted(slot) != list(range(HOURS)):
            raise SchemaError(f"{path}: date {date} does not cover hours 0..23")
        day_loads = [slot[h][0] for h in range(HOURS)]
        temps.append([slot[h][1] for h in range(HOURS)])
        missing = sum(v is None for v in day_loads)
        if missing == 0:
            loads.append(day_loads)
        elif missing == HOURS and di == len(dates) - 1:
            pass  # forecast-day row: temps only
        else:
            raise SchemaError(
                f"{path}: date {date} mixes empty and numeric loads "
                "(only the final date may omit loads, and then for all hours)"
            )
    if not loads:
        raise SchemaError(f"{path}: no complete load days")
    return LoadHistory(loads=np.array(loads, dtype=float),
                       temps=np.array(temps, dtype=float),
                       dates=tuple(dates))


def _history_dates(history: LoadHistory) -> tuple:
    if history.dates is not None:
        return history.dates
    start = datetime.date.fromisoformat(_FALLBACK_START_DATE)
    return tuple((start + datetime.timedelta(days=d)).isoformat()
                 for d in range(history.temps.shape[0]))


def write_history_csv(history: LoadHistory, path) -> None:
    dates = _history_dates(history)

    def rows():
        for d, date in enumerate(dates):
            for h in range(HOURS):
                load = _fmt(history.loads[d, h]) if d < history.n_days else ""
                yield [date, str(h), load, _fmt(history.temps[d, h])]

    _write_csv(path, ["date", "hour", "load_kwh", "temp_c"], rows())


def write_forecast_csv(profile, path) -> None:
    profile = np.asarray(profile, dtype=float).ravel()
    _write_csv(path, ["hour", "load_kwh"],
               ([str(h), _fmt(profile[h])] for h in range(profile.size)))


def write_residuals_csv(dates, actual, predicted, path) -> None:
    """Evaluation-window residuals, one row per (date, hour)."""
    actual = np.asarray(actual, dtype=float)
    predicted = np.asarray(predicted, dtype=float)

    def rows():
        for d, date in enumerate(dates):
            for h in range(HOURS):
                a, p = actual[d, h], predicted[d, h]
                yield [date, str(h), _fmt(a), _fmt(p), _fmt(a - p)]

    _write_csv(path, ["date", "hour", "actual_kwh", "predicted_kwh",
                      "residual_kwh"], rows())


# ---------------------------------------------------------------------------
# Aggregation curve and sweep tables


def write_agg_curve_csv(points, path) -> None:
    """Curve points (an AggCurve or AggregationPoint sequence) as CSV."""
    if hasattr(points, "points"):
        points = points.points
    rows = ([str(pt.n_customers), str(pt.replicate), _fmt(pt.w_kwh),
             _fmt(pt.cv_pct)] for pt in points)
    _write_csv(path, ["level", "replicate", "W_kwh", "cv_pct"], rows)


def read_agg_curve_csv(path) -> tuple:
    """Curve CSV back as a tuple of AggregationPoint."""
    rows = _read_rows(path, ["level", "replicate", "W_kwh", "cv_pct"])
    out = []
    for lineno, row in rows:
        if len(row) != 4:
            raise SchemaError(f"{path}: line {lineno}: expected 4 fields, got {len(row)}")
        out.append(AggregationPoint(
            n_customers=_parse_int(path, lineno, row[0].strip(), "level"),
            replicate=_parse_int(path, lineno, row[1].strip(), "replicate"),
            w_kwh=_parse_float(path, lineno, row[2].strip(), "W_kwh"),
            cv_pct=_parse_float(path, lineno, row[3].strip(), "cv_pct"),
        ))
    return tuple(out)


def write_sweep_csv(result: SweepResult, path) -> None:
    rows = ([str(int(level)), str(int(n)), _fmt(pf), _fmt(g)]
            for level, n, pf, g, _ in result.table)
    _write_csv(path, ["level", "n_customers", "pass_fraction", "mean_gamma"],
               rows)


# ---------------------------------------------------------------------------
# JSON payloads


def write_json(obj, path) -> None:
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from exc


def write_model_json(model, path) -> None:
    """Serialize a fitted ArxModel or VectorArxModel."""
    write_json(model.to_dict(), path)


def read_model_json(path):
    """Load a model written by write_model_json; the type tag picks the class."""
    data = read_json(path)
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    kind = data.get("model")
    classes = {"arx": ArxModel, "vector_arx": VectorArxModel}
    if kind not in classes:
        raise SchemaError(
            f"{path}: unknown model type {kind!r}; expected one of "
            f"{sorted(classes)}"
        )
    required = {
        "arx": {"k", "lag_orientation", "a", "b", "intercept"},
        "vector_arx": {"k", "lag_orientation", "c", "h", "intercept"},
    }[kind]
    missing = sorted(required - set(data))
    if missing:
        raise SchemaError(f"{path}: missing model keys: {', '.join(missing)}")
    return classes[kind].from_dict(data)


def gpd_fit_to_dict(fit: GpdFit) -> dict:
    return {
        "kappa": fit.params.kappa,
        "sigma": fit.params.sigma,
        "theta": fit.params.theta,
        "ci_kappa": list(fit.ci_kappa),
        "ci_sigma": list(fit.ci_sigma),
        "log_likelihood": fit.log_likelihood,
        "n": fit.n_samples,
    }


def write_gpd_fit_csv(fit: GpdFit, path) -> None:
    header = ["kappa", "kappa_lo", "kappa_hi", "sigma", "sigma_lo", "sigma_hi",
              "theta", "log_likelihood", "n"]
    row = [_fmt(fit.params.kappa), _fmt(fit.ci_kappa[0]), _fmt(fit.ci_kappa[1]),
           _fmt(fit.params.sigma), _fmt(fit.ci_sigma[0]), _fmt(fit.ci_sigma[1]),
           _fmt(fit.params.theta), _fmt(fit.log_likelihood), str(fit.n_samples)]
    _write_csv(path, header, [row])


def scaling_law_to_dict(law: ScalingLaw) -> dict:
    try:
        w_star = law.crossover_w()
    except DomainError:
        w_star = None
    return {
        "beta0": law.beta0,
        "beta1": law.beta1,
        "p": law.p,
        "w_star": w_star,
        "irreducible_pct": law.irreducible_pct,
        "sse": law.sse,
    }


def residual_report_to_dict(report: ResidualReport) -> dict:
    return {
        "rho": [float(r) for r in report.rho],
        "gamma": report.gamma,
        "gamma_thresholded": report.gamma_thresholded,
        "sw_stat": report.sw_stat,
        "sw_p": report.sw_p,
        "sw_pass": bool(report.sw_pass),
        "n": report.n,
        "alpha": report.alpha,
    }


def sweep_meta_to_dict(result: SweepResult) -> dict:
    return {
        "alpha": result.alpha,
        "reference_pass_rate": result.reference_pass_rate,
        "replicates": result.replicates,
        "max_lag": result.max_lag,
        "seed": result.seed,
        "levels": [int(lv) for lv in result.table[:, 0]],
        "mean_gamma_thresholded": [float(g) for g in result.table[:, 4]],
        "skipped": [{"level": int(lv), "reason": reason}
                    for lv, reason in result.skipped],
    }


# ---------------------------------------------------------------------------
# Tail diagnostics


def write_tail_diagnostics_csvs(diag: TailDiagnostics, out_dir) -> dict:
    """Write the three diagnostic tables; returns {name: path}."""
    out_dir = Path(out_dir)
    paths = {}

    path = out_dir / "mean_excess.csv"
    _write_csv(path, ["threshold_kwh", "mean_excess_kwh"],
               ([_fmt(u), _fmt(e)] for u, e in diag.mean_excess))
    paths["mean_excess"] = path

    path = out_dir / "zipf.csv"
    _write_csv(path, ["log_rank", "log_load"],
               ([_fmt(lr), _fmt(lx)] for lr, lx in diag.zipf))
    paths["zipf"] = path

    path = out_dir / "log_survival.csv"
    _write_csv(path, ["log_load", "log_survival"],
               ([_fmt(lx), _fmt(ls)] for lx, ls in diag.log_survival))
    paths["log_survival"] = path
    return paths


# ---------------------------------------------------------------------------
# Populations


def write_population(population: Population, out_dir) -> dict:
    """Write meta.json, temps.csv, loads.csv into out_dir; returns paths.

    loads.csv is long format (customer,date,hour,load_kwh); it grows as
    customers x days x 24 rows, so use modest configs when persisting.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dates = population.dates()
    paths = {}

    meta = {
        "config": population.config.to_dict(),
        "sizes_kwh": [float(s) for s in population.sizes],
    }
    paths["meta"] = out_dir / "meta.json"
    write_json(meta, paths["meta"])

    paths["temps"] = out_dir / "temps.csv"
    _write_csv(
        paths["temps"], ["date", "hour", "temp_c"],
        ([dates[d], str(h), _fmt(population.temps[d, h])]
         for d in range(population.temps.shape[0]) for h in range(HOURS)),
    )

    paths["loads"] = out_dir / "loads.csv"
    _write_csv(
        paths["loads"], ["customer", "date", "hour", "load_kwh"],
        ([str(c), dates[d], str(h), _fmt(population.loads[c, d, h])]
         for c in range(population.n_customers)
         for d in range(population.n_days) for h in range(HOURS)),
    )
    return paths


def read_population(in_dir) -> Population:
    """Inverse of write_population."""
    in_dir = Path(in_dir)
    meta = read_json(in_dir / "meta.json")
    if not isinstance(meta, dict) or "config" not in meta or "sizes_kwh" not in meta:
        raise SchemaError(f"{in_dir / 'meta.json'}: expected config and sizes_kwh")
    config = SynthConfig.from_dict(meta["config"])
    sizes = np.array([float(s) for s in meta["sizes_kwh"]], dtype=float)

    date_index = {}
    temps_rows = _read_rows(in_dir / "temps.csv", ["date", "hour", "temp_c"])
    temps = np.full((config.n_days + 1, HOURS), np.nan)
    for lineno, row in temps_rows:
        if len(row) != 3:
            raise SchemaError(f"{in_dir / 'temps.csv'}: line {lineno}: "
                              f"expected 3 columns, got {len(row)}")
        date, hour_s, temp_s = (c.strip() for c in row)
        d = date_index.setdefault(date, len(date_index))
        if d > config.n_days:
            raise SchemaError(f"{in_dir / 'temps.csv'}: more dates than n_days + 1")
        h = _parse_int(in_dir / "temps.csv", lineno, hour_s, "hour")
        temps[d, h] = _parse_float(in_dir / "temps.csv", lineno, temp_s, "temp_c")
    if np.any(~np.isfinite(temps)):
        raise SchemaError(f"{in_dir / 'temps.csv'}: incomplete temperature grid")

    loads = np.full((sizes.size, config.n_days, HOURS), np.nan)
    loads_rows = _read_rows(in_dir / "loads.csv",
                            ["customer", "date", "hour", "load_kwh"])
    for lineno, row in loads_rows:
        if len(row) != 4:
            raise SchemaError(f"{in_dir / 'loads.csv'}: line {lineno}: "
                              f"expected 4 columns, got {len(row)}")
        cust_s, date, hour_s, load_s = (c.strip() for c in row)
        c = _parse_int(in_dir / "loads.csv", lineno, cust_s, "customer")
        if date not in date_index or date_index[date] >= config.n_days:
            raise SchemaError(f"{in_dir / 'loads.csv'}: line {lineno}: "
                              f"unknown load date {date!r}")
        if not 0 <= c < sizes.size:
            raise SchemaError(f"{in_dir / 'loads.csv'}: line {lineno}: "
                              f"customer {c} out of range")
        h = _parse_int(in_dir / "loads.csv", lineno, hour_s, "hour")
        loads[c, date_index[date], h] = _parse_float(
            in_dir / "loads.csv", lineno, load_s, "load_kwh"
        )
    if np.any(~np.isfinite(loads)):
        raise SchemaError(f"{in_dir / 'loads.csv'}: incomplete load grid")
    return Population(loads=loads, temps=temps, sizes=sizes, config=config)
