"""Forecast-error scaling with aggregate size.

Day-ahead error for an aggregate of customers is summarized by the
coefficient of variation in percent, cv = 100 * RMSE / mean(actual).  Across
aggregates of mean hourly load W the error follows

    CV(W) = sqrt(beta0 / W**p + beta1)        [percent]

with a size-driven term that decays like W^-p and an irreducible floor
sqrt(beta1).  The curve crosses over at W* = (beta0 / beta1)**(1/p), the
size beyond which aggregating further buys little accuracy.

For fixed p the law is linear in (beta0, beta1) on the squared scale, so the
p = 1 route solves a non-negative least-squares problem in closed form.  The
general route refines on the cv scale with a Gauss-Newton iteration in a
squared reparameterization that keeps both coefficients non-negative.  The
reported sum of squared errors is on the cv scale for both routes so fits
are comparable.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import (
    ConvergenceError,
    DegenerateDataError,
    DomainError,
    InsufficientDataError,
    InvalidParameterError,
)
from .forecaster import fit_shape_varx, fit_total_arx, one_step_forecasts
from .synth import Population, subset_indices

__all__ = [
    "AggregationPoint",
    "AggCurve",
    "ScalingLaw",
    "cv",
    "build_agg_curve",
    "fit_scaling_law",
    "critical_load",
    "irreducible_error",
    "eval_scaling",
]

logger = logging.getLogger(__name__)

_GN_MAX_ITER = 200
_GN_SSE_RTOL = 1e-12
_GN_MAX_HALVINGS = 30


def cv(actual, predicted) -> float:
    """Coefficient of variation of the forecast error, in percent.

    cv = 100 * RMSE(actual - predicted) / mean(actual).  Arrays are compared
    elementwise and may have any common shape.  A non-positive actual mean
    leaves the ratio undefined and raises DegenerateDataError.
    """
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.size == 0:
        raise DegenerateDataError("empty sample")
    if a.size != p.size:
        raise InvalidParameterError(
            f"actual and predicted differ in length: {a.size} vs {p.size}"
        )
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(p))):
        raise DegenerateDataError("cv inputs contain non-finite values")
    mean = float(np.mean(a))
    if mean <= 0.0:
        raise DegenerateDataError(f"mean of actual values must be positive, got {mean}")
    rmse = math.sqrt(float(np.mean((a - p) ** 2)))
    return 100.0 * rmse / mean


@dataclass(frozen=True)
class AggregationPoint:
    """One (aggregate size, forecast error) observation on the curve."""

    n_customers: int
    replicate: int
    w_kwh: float             # mean hourly aggregate load over the eval window
    cv_pct: float

    def __post_init__(self):
        if self.n_customers < 1 or self.replicate < 0:
            raise InvalidParameterError(
                f"need n_customers >= 1 and replicate >= 0, got "
                f"{self.n_customers} and {self.replicate}"
            )
        if not (math.isfinite(self.w_kwh) and self.w_kwh > 0.0):
            raise InvalidParameterError(f"W must be positive, got {self.w_kwh}")
        if not (math.isfinite(self.cv_pct) and self.cv_pct >= 0.0):
            raise InvalidParameterError(f"cv must be >= 0, got {self.cv_pct}")


@dataclass(frozen=True)
class AggCurve:
    """Forecast cv against aggregate size over sampled customer subsets."""

    points: tuple            # AggregationPoint per (level, replicate)
    skipped: tuple           # (level, reason) records

    def w_values(self) -> np.ndarray:
        return np.array([pt.w_kwh for pt in self.points])

    def cv_values(self) -> np.ndarray:
        return np.array([pt.cv_pct for pt in self.points])


@dataclass(frozen=True)
class ScalingLaw:
    """Fitted CV(W) = sqrt(beta0 / W**p + beta1), cv in percent."""

    beta0: float
    beta1: float
    p: float
    sse: float               # sum of squared residuals on the cv scale

    def cv_at(self, w):
        """Predicted cv in percent at aggregate size w (kWh); w must be > 0."""
        arr = np.asarray(w, dtype=float)
        if np.any(arr <= 0.0):
            raise DomainError("aggregate size must be positive")
        out = np.sqrt(self.beta0 / arr**self.p + self.beta1)
        if arr.ndim == 0:
            return float(out)
        return out

    @property
    def irreducible_pct(self) -> float:
        """Error floor sqrt(beta1) approached as W grows."""
        return math.sqrt(self.beta1)

    def crossover_w(self) -> float:
        """Size W* where the decaying term equals the floor.

        W* = (beta0 / beta1)**(1/p), which reduces to beta0 / beta1 at the
        default exponent.  Undefined when beta1 = 0 (the curve never
        flattens); raises DomainError then.
        """
        if self.beta1 <= 0.0:
            raise DomainError("crossover is undefined when beta1 is zero")
        return (self.beta0 / self.beta1) ** (1.0 / self.p)


def critical_load(law: ScalingLaw) -> float:
    """Crossover size W* of a fitted law; see ScalingLaw.crossover_w."""
    return law.crossover_w()


def irreducible_error(law: ScalingLaw) -> float:
    """Error floor sqrt(beta1) of a fitted law, in percent."""
    return law.irreducible_pct


def eval_scaling(law: ScalingLaw, w):
    """Law value CV(w) in percent; scalar in, scalar out."""
    return law.cv_at(w)


def _squared_scale_fit(w: np.ndarray, cv_obs: np.ndarray, p: float) -> tuple:
    """Non-negative least squares of cv^2 on (W^-p, 1)."""
    design = np.column_stack([w**-p, np.ones_like(w)])
    coef, _ = optimize.nnls(design, cv_obs**2)
    return float(coef[0]), float(coef[1])


def _cv_scale_sse(w, cv_obs, beta0, beta1, p) -> float:
    return float(np.sum((cv_obs - np.sqrt(beta0 / w**p + beta1)) ** 2))


def _points_to_xy(points) -> tuple:
    if isinstance(points, AggCurve):
        points = points.points
    pts = list(points)
    if not all(isinstance(pt, AggregationPoint) for pt in pts):
        raise InvalidParameterError(
            "fit_scaling_law expects AggregationPoint values or an AggCurve"
        )
    w = np.array([pt.w_kwh for pt in pts])
    cv_obs = np.array([pt.cv_pct for pt in pts])
    return w, cv_obs


def fit_scaling_law(points, p: float = 1.0) -> ScalingLaw:
    """Fit (beta0, beta1) to curve points at fixed exponent p.

    points is an AggCurve or a sequence of AggregationPoint; at least three
    points covering more than one W are required (two coefficients plus one
    residual degree of freedom).  p = 1 uses the squared-scale closed form
    alone, matching how the law is usually reported.  Other exponents start
    from that closed form and refine on the cv scale by Gauss-Newton in
    g = sqrt(beta), stopping when the relative SSE change drops below 1e-12
    (ConvergenceError after 200 iterations).
    """
    w, cv_obs = _points_to_xy(points)
    if w.size < 3:
        raise InsufficientDataError(
            f"need at least 3 curve points, got {w.size}"
        )
    if np.unique(w).size < 2:
        raise DegenerateDataError(
            "all points share one aggregate size; the law is unidentifiable"
        )
    if not (math.isfinite(p) and p > 0.0):
        raise InvalidParameterError(f"exponent p must be positive, got {p}")

    beta0, beta1 = _squared_scale_fit(w, cv_obs, p)
    if p == 1.0:
        return ScalingLaw(beta0, beta1, p, _cv_scale_sse(w, cv_obs, beta0, beta1, p))

    # Gauss-Newton on the cv scale; g**2 = beta keeps coefficients valid.
    g = np.sqrt(np.maximum([beta0, beta1], 1e-30))
    sse = _cv_scale_sse(w, cv_obs, g[0]**2, g[1]**2, p)
    wp = w**-p
    for _ in range(_GN_MAX_ITER):
        model = np.sqrt(g[0]**2 * wp + g[1]**2)
        safe = np.maximum(model, 1e-30)
        jac = np.column_stack([g[0] * wp / safe, g[1] / safe])
        resid = cv_obs - model
        step, *_ = np.linalg.lstsq(jac, resid, rcond=None)
        scale = 1.0
        for _ in range(_GN_MAX_HALVINGS):
            cand = g + scale * step
            cand_sse = _cv_scale_sse(w, cv_obs, cand[0]**2, cand[1]**2, p)
            if cand_sse <= sse:
                break
            scale *= 0.5
        else:
            cand, cand_sse = g, sse
        done = sse - cand_sse <= _GN_SSE_RTOL * max(sse, 1e-30)
        g, sse = cand, cand_sse
        if done:
            return ScalingLaw(float(g[0]**2), float(g[1]**2), p, sse)
    raise ConvergenceError(
        "scaling-law refinement did not converge",
        diagnostics={"iterations": _GN_MAX_ITER, "sse": sse,
                     "beta0": float(g[0]**2), "beta1": float(g[1]**2), "p": p},
    )


def build_agg_curve(population: Population, levels, replicates: int, seed: int,
                    k_total: int = 2, k_shape: int = 1,
                    train_frac: float = 0.7, n_jobs: int = 1) -> AggCurve:
    """Sample customer subsets per level, forecast each aggregate, collect cv.

    For every aggregation level L and replicate, a subset of L customers is
    drawn (disjoint within a level while the population allows), the
    decomposed forecaster is fitted on the first train_frac of days, and cv
    is computed over one-step forecasts on the remaining days.  W is the
    subset's mean hourly load over that evaluation window.  Levels above the
    population size are skipped with a warning and recorded.

    Cells are independent: each (level, replicate) uses its own derived
    random stream, so n_jobs > 1 fans the work out over threads without
    changing any output.
    """
    levels = sorted({int(lv) for lv in levels})
    if not levels or levels[0] < 1:
        raise InvalidParameterError(f"levels must be positive integers, got {levels}")
    if replicates < 1:
        raise InvalidParameterError(f"replicates must be >= 1, got {replicates}")
    if not 0.0 < train_frac < 1.0:
        raise InvalidParameterError(f"train_frac must lie in (0, 1), got {train_frac}")
    n_train = int(train_frac * population.n_days)
    if n_train < 1 or n_train >= population.n_days:
        raise InsufficientDataError(
            f"train_frac={train_frac} leaves no usable split of "
            f"{population.n_days} days"
        )

    kept = []
    skipped = []
    for level in levels:
        if level > population.n_customers:
            reason = (f"level {level} exceeds population size "
                      f"{population.n_customers}")
            logger.warning("skipping aggregation level: %s", reason)
            skipped.append((level, reason))
        else:
            kept.append(level)

    def run_cell(cell: tuple) -> AggregationPoint:
        level, rep = cell
        idx = subset_indices(population.n_customers, level, rep, seed)
        history = population.aggregate(idx)
        train = history.head(n_train)
        total_model = fit_total_arx(train, k_total)
        shape_model = fit_shape_varx(train, k_shape)
        pred = one_step_forecasts(history, total_model, shape_model, n_train)
        actual = history.loads[n_train:]
        return AggregationPoint(
            n_customers=level,
            replicate=rep,
            w_kwh=float(np.mean(actual)),
            cv_pct=cv(actual, pred),
        )

    cells = [(level, rep) for level in kept for rep in range(replicates)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            points = list(pool.map(run_cell, cells))
    else:
        points = [run_cell(cell) for cell in cells]
    return AggCurve(points=tuple(points), skipped=tuple(skipped))
