"""Report figures rendered next to the delimited outputs.

Every function takes data already computed elsewhere, draws one PNG with the
non-interactive Agg backend, and returns the path.  Figures are a reporting
convenience; the CSV/JSON files remain the canonical outputs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .feeder import edge_label
from .forecaster import HOURS, LoadHistory
from .residuals import SweepResult
from .scaling import ScalingLaw
from .tailmodel import GpdFit, TailDiagnostics, gpd_cdf

__all__ = [
    "plot_tail_diagnostics",
    "plot_groups",
    "plot_forecast",
    "plot_agg_curve",
    "plot_sweep",
]

_RC = {
    "figure.dpi": 110,
    "savefig.dpi": 150,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    # Pin the metadata so a rerun writes byte-identical bytes.
    fig.savefig(path, metadata={"Software": "feederload"})
    plt.close(fig)
    return path


def plot_tail_diagnostics(diag: TailDiagnostics, path,
                          fit: GpdFit = None) -> Path:
    """Mean excess, Zipf rank plot, and log survival in one row.

    When a fit is given, its survival curve is overlaid on the empirical
    log-survival points.
    """
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.2))

        ax = axes[0]
        ax.plot(diag.mean_excess[:, 0], diag.mean_excess[:, 1], "o", ms=3)
        ax.set_xlabel("threshold u [kWh]")
        ax.set_ylabel("mean excess e(u) [kWh]")
        ax.set_title("mean excess")

        ax = axes[1]
        ax.plot(diag.zipf[:, 0], diag.zipf[:, 1], ".", ms=2)
        ax.set_xlabel("log rank")
        ax.set_ylabel("log load")
        ax.set_title("Zipf rank plot")

        ax = axes[2]
        ax.plot(diag.log_survival[:, 0], diag.log_survival[:, 1], ".", ms=2,
                label="empirical")
        if fit is not None:
            xs = np.exp(np.linspace(diag.log_survival[:, 0].min(),
                                    diag.log_survival[:, 0].max(), 200))
            sf = 1.0 - gpd_cdf(xs, fit.params)
            keep = sf > 0.0
            ax.plot(np.log(xs[keep]), np.log(sf[keep]), "-", lw=1.2,
                    label="fitted GPD")
            ax.legend()
        ax.set_xlabel("log load")
        ax.set_ylabel("log survival")
        ax.set_title("survival")
        return _save(fig, path)


def plot_groups(groups, path) -> Path:
    """Per-group energies, sorted descending, on a log scale."""
    labels = [edge_label(g.edge) for g in groups]
    totals = np.array([g.total_load_kwh for g in groups])
    order = np.argsort(totals)[::-1]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(max(4.0, 0.45 * len(groups)), 3.2))
        ax.bar(range(len(groups)), totals[order])
        positive = totals[totals > 0]
        if positive.size and positive.max() / positive.min() > 50.0:
            ax.set_yscale("log")
        ax.set_xticks(range(len(groups)))
        ax.set_xticklabels([labels[i] for i in order], rotation=60, ha="right")
        ax.set_ylabel("group energy [kWh]")
        ax.set_title("device group totals")
        return _save(fig, path)


def plot_forecast(history: LoadHistory, profile, path,
                  context_days: int = 3) -> Path:
    """Recent actual hours followed by the forecast profile."""
    profile = np.asarray(profile, dtype=float).ravel()
    shown = min(context_days, history.n_days)
    actual = history.loads[-shown:].ravel()
    hours = np.arange(actual.size)
    fhours = actual.size + np.arange(profile.size)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(7.0, 3.0))
        ax.plot(hours, actual, "-", lw=1.0, label=f"last {shown} days")
        ax.plot(fhours, profile, "-", lw=1.4, label="forecast")
        ax.axvline(actual.size - 0.5, color="k", lw=0.8, ls=":")
        ax.set_xlabel("hour")
        ax.set_ylabel("load [kWh]")
        ax.set_title("day-ahead forecast")
        ax.legend()
        return _save(fig, path)


def plot_agg_curve(points, path, law: ScalingLaw = None) -> Path:
    """cv against aggregate size, with the fitted scaling law overlaid.

    Accepts an AggCurve or any sequence of AggregationPoint.
    """
    points = getattr(points, "points", points)
    w = np.array([pt.w_kwh for pt in points], dtype=float)
    cv_pct = np.array([pt.cv_pct for pt in points], dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.loglog(w, cv_pct, "o", ms=3, alpha=0.6, label="replicates")
        if law is not None:
            ws = np.logspace(np.log10(w.min()), np.log10(w.max()), 200)
            ax.loglog(ws, law.cv_at(ws), "-", lw=1.4, label="fitted law")
            if law.beta1 > 0.0:
                ax.axhline(law.irreducible_pct, color="gray", lw=0.9, ls="--",
                           label="irreducible")
                ax.axvline(law.crossover_w(), color="gray", lw=0.9, ls=":",
                           label="W*")
            ax.legend(fontsize=8)
        ax.set_xlabel("aggregate size W [kWh]")
        ax.set_ylabel("cv [%]")
        ax.set_title("forecast error vs aggregate size")
        return _save(fig, path)


def plot_sweep(result: SweepResult, path) -> Path:
    """Shapiro-Wilk pass fraction and correlation energy per level."""
    table = result.table
    with plt.rc_context(_RC):
        fig, axes = plt.subplots(1, 2, figsize=(8.0, 3.2))

        ax = axes[0]
        ax.semilogx(table[:, 0], table[:, 2], "o-", ms=4)
        ax.axhline(result.reference_pass_rate, color="gray", lw=0.9, ls="--",
                   label=f"{result.reference_pass_rate:.2f} reference")
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("aggregation level [customers]")
        ax.set_ylabel("pass fraction")
        ax.set_title("normality pass rate")
        ax.legend(fontsize=8)

        ax = axes[1]
        ax.semilogx(table[:, 0], table[:, 3], "o-", ms=4, label="literal")
        ax.semilogx(table[:, 0], table[:, 4], "s-", ms=4, label="thresholded")
        ax.set_xlabel("aggregation level [customers]")
        ax.set_ylabel("mean correlation energy")
        ax.set_title("residual correlation")
        ax.legend(fontsize=8)
        return _save(fig, path)
