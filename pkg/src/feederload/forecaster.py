"""Decomposed day-ahead load forecasting.

An hourly profile x in R^24 is split into the daily total p = sum(x) and the
normalized shape u = x / p (u sums to 1).  Each part gets its own day-ahead
model and the forecast is recomposed as x_hat = p_hat * u_hat:

* total: scalar ARX with K autoregressive lags plus K+1 daily-mean
  temperatures, the forecast day's included;
* shape: vector ARX with K matrix lags C_k in R^(24x24) plus K+1 hourly
  temperature blocks h_r, again including the forecast day.

Coefficients are stored in lag order: index 0 multiplies the most recent
day, and exogenous index 0 multiplies the forecast day itself.  Data windows
are passed chronologically, oldest day first.  So with a = (0.5, 0.25) and a
total window (4, 8), the autoregressive part is 0.5 * 8 + 0.25 * 4 = 5.

Both fits are ordinary least squares through a column-pivoted QR; an exactly
collinear design raises SingularFitError naming the dependent columns.  The
shape model omits the intercept by default: shape inputs sum to one, so each
lag block already spans the constant column and an intercept would be
exactly collinear.  Model order is chosen by rolling-origin cross-validation
on the last quarter of the history.

The composed forecast keeps the identity sum(x_hat) = p_hat: the shape is a
simplex point (clamped and renormalized) while the total passes through
unclamped, so the identity holds to roundoff even for a pathological fit
that predicts a negative total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import (
    DegenerateDataError,
    InsufficientDataError,
    InvalidParameterError,
    SingularFitError,
)

__all__ = [
    "HOURS",
    "LoadHistory",
    "ArxModel",
    "VectorArxModel",
    "CvResult",
    "decompose_day",
    "fit_total_arx",
    "predict_total",
    "fit_shape_varx",
    "fit_vector_arx",
    "predict_shape",
    "forecast_day",
    "one_step_forecasts",
    "cross_validate_order",
]

HOURS = 24

# Relative threshold on |diag R| below which a pivoted column counts as
# linearly dependent.
_RANK_RTOL = 1e-10

# Tag written into serialized models; predict() expects windows oldest-first
# and flips them so coefficient index 0 meets the most recent day.
LAG_ORIENTATION = "most_recent_first"

_UNIFORM_SHAPE = np.full(HOURS, 1.0 / HOURS)


@dataclass(frozen=True)
class LoadHistory:
    """Hourly load and temperature history for one customer or aggregate.

    loads has shape (n_days, 24) in kWh.  temps has 24 hourly values per row
    and either n_days rows or n_days + 1: the optional extra row holds the
    forecast-day temperatures needed to predict the day after the history
    ends.  dates, when given, label the temp rows (ISO strings).
    """

    loads: np.ndarray
    temps: np.ndarray
    dates: tuple = None

    def __post_init__(self):
        loads = np.asarray(self.loads, dtype=float)
        temps = np.asarray(self.temps, dtype=float)
        object.__setattr__(self, "loads", loads)
        object.__setattr__(self, "temps", temps)
        if loads.ndim != 2 or loads.shape[1] != HOURS:
            raise InvalidParameterError(
                f"loads must have shape (n_days, {HOURS}), got {loads.shape}"
            )
        if temps.ndim != 2 or temps.shape[1] != HOURS:
            raise InvalidParameterError(
                f"temps must have shape (n_days[+1], {HOURS}), got {temps.shape}"
            )
        if temps.shape[0] not in (loads.shape[0], loads.shape[0] + 1):
            raise InvalidParameterError(
                f"temps must cover every load day plus at most one forecast day: "
                f"{loads.shape[0]} load days vs {temps.shape[0]} temp days"
            )
        if not np.all(np.isfinite(loads)) or not np.all(np.isfinite(temps)):
            raise DegenerateDataError("history contains non-finite values")
        if np.any(loads < 0.0):
            raise InvalidParameterError("loads must be non-negative")
        if self.dates is not None:
            dates = tuple(str(d) for d in self.dates)
            if len(dates) != temps.shape[0]:
                raise InvalidParameterError(
                    f"need one date per temp row: {len(dates)} dates, "
                    f"{temps.shape[0]} temp rows"
                )
            object.__setattr__(self, "dates", dates)

    @property
    def n_days(self) -> int:
        return self.loads.shape[0]

    @property
    def has_forecast_temps(self) -> bool:
        return self.temps.shape[0] == self.n_days + 1

    def totals(self) -> np.ndarray:
        return self.loads.sum(axis=1)

    def shapes(self) -> np.ndarray:
        """Per-day shapes; a zero-energy day maps to the uniform shape."""
        totals = self.totals()
        out = np.tile(_UNIFORM_SHAPE, (self.n_days, 1))
        pos = totals > 0.0
        out[pos] = self.loads[pos] / totals[pos, None]
        return out

    def daily_mean_temps(self) -> np.ndarray:
        return self.temps.mean(axis=1)

    def head(self, n_days: int) -> "LoadHistory":
        """First n_days of the history (temps truncated to the same days)."""
        if not 0 < n_days <= self.n_days:
            raise InvalidParameterError(
                f"n_days must lie in [1, {self.n_days}], got {n_days}"
            )
        dates = None if self.dates is None else self.dates[:n_days]
        return LoadHistory(self.loads[:n_days], self.temps[:n_days], dates)


def decompose_day(profile) -> tuple:
    """Split one hourly profile into (total, shape) with profile = total*shape.

    At least one hour must be positive; an all-zero day has no shape and
    raises DegenerateDataError.
    """
    x = np.asarray(profile, dtype=float).ravel()
    if x.size != HOURS:
        raise InvalidParameterError(f"profile must have {HOURS} values, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DegenerateDataError("profile contains non-finite values")
    if np.any(x < 0.0):
        raise InvalidParameterError("profile must be non-negative")
    total = float(np.sum(x))
    if total == 0.0:
        raise DegenerateDataError("all-zero day has no defined shape")
    return total, x / total


def _normalize_shape(raw) -> np.ndarray:
    """Clamp negatives to zero and renormalize to the simplex."""
    u = np.maximum(np.asarray(raw, dtype=float).ravel(), 0.0)
    s = float(np.sum(u))
    if s == 0.0:
        return _UNIFORM_SHAPE.copy()
    return u / s


def _lstsq_pivoted(design: np.ndarray, target: np.ndarray, names: list) -> np.ndarray:
    """Least squares via column-pivoted QR with an explicit rank check."""
    q, r, piv = linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = _RANK_RTOL * (float(diag.max()) if diag.size else 0.0)
    rank = int(np.sum(diag > tol))
    if rank < design.shape[1]:
        bad = tuple(names[j] for j in piv[rank:])
        raise SingularFitError(
            f"design matrix is rank deficient (rank {rank} of {design.shape[1]}); "
            f"dependent columns: {', '.join(bad)}",
            columns=bad,
        )
    coef_pivoted = linalg.solve_triangular(r, q.T @ target, lower=False)
    coef = np.empty_like(coef_pivoted)
    coef[piv] = coef_pivoted
    return coef


def _check_order(k) -> int:
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise InvalidParameterError(f"model order must be an integer >= 1, got {k!r}")
    return int(k)


@dataclass(frozen=True)
class ArxModel:
    """Scalar ARX model for the daily total, coefficients in lag order."""

    a: np.ndarray            # (k,); a[0] multiplies yesterday's total
    b: np.ndarray            # (k+1,); b[0] multiplies the forecast-day mean temp
    intercept: float         # 0.0 when fitted without intercept
    k: int = field(init=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "k", a.size)
        if a.size < 1 or b.size != a.size + 1:
            raise InvalidParameterError(
                f"need len(b) == len(a) + 1 >= 2, got {a.size} and {b.size}"
            )

    def predict(self, totals_window, mean_temps_window) -> float:
        """One-step total forecast.

        totals_window holds the last k daily totals and mean_temps_window the
        matching k+1 daily mean temperatures, both chronological (oldest
        first); the last temperature is the forecast day's.
        """
        p = np.asarray(totals_window, dtype=float).ravel()
        t = np.asarray(mean_temps_window, dtype=float).ravel()
        if p.size != self.k or t.size != self.k + 1:
            raise InvalidParameterError(
                f"ARX({self.k}) expects windows of {self.k} totals and "
                f"{self.k + 1} temps, got {p.size} and {t.size}"
            )
        return float(self.intercept + self.a @ p[::-1] + self.b @ t[::-1])

    def to_dict(self) -> dict:
        """Plain-data form for JSON round trips."""
        return {
            "model": "arx",
            "k": int(self.k),
            "lag_orientation": LAG_ORIENTATION,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "intercept": float(self.intercept),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArxModel":
        _check_model_dict(data, "arx")
        model = cls(a=data["a"], b=data["b"], intercept=float(data["intercept"]))
        if model.k != int(data["k"]):
            raise InvalidParameterError(
                f"stated order {data['k']} does not match {model.k} lag coefficients"
            )
        return model


@dataclass(frozen=True)
class VectorArxModel:
    """Vector ARX model for the daily shape, coefficients in lag order."""

    c: np.ndarray            # (k, 24, 24); c[0] multiplies yesterday's shape
    h: np.ndarray            # (k+1, 24, 24); h[0] multiplies forecast-day temps
    intercept: np.ndarray    # (24,); zeros when fitted without intercept
    k: int = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        h = np.asarray(self.h, dtype=float)
        intercept = np.asarray(self.intercept, dtype=float).ravel()
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "intercept", intercept)
        object.__setattr__(self, "k", c.shape[0] if c.ndim == 3 else 0)
        if c.ndim != 3 or c.shape[1:] != (HOURS, HOURS) or c.shape[0] < 1:
            raise InvalidParameterError(
                f"c must have shape (k, {HOURS}, {HOURS}), got {c.shape}"
            )
        if h.shape != (c.shape[0] + 1, HOURS, HOURS):
            raise InvalidParameterError(
                f"h must have shape (k+1, {HOURS}, {HOURS}), got {h.shape}"
            )
        if intercept.size != HOURS:
            raise InvalidParameterError(
                f"intercept must have {HOURS} values, got {intercept.size}"
            )

    def predict(self, shapes_window, temps_window) -> np.ndarray:
        """Raw one-step shape forecast (may leave the simplex).

        shapes_window is (k, 24) and temps_window (k+1, 24), chronological;
        the last temperature row is the forecast day's.
        """
        u = np.asarray(shapes_window, dtype=float)
        t = np.asarray(temps_window, dtype=float)
        if u.shape != (self.k, HOURS) or t.shape != (self.k + 1, HOURS):
            raise InvalidParameterError(
                f"VARX({self.k}) expects windows of shape ({self.k}, {HOURS}) and "
                f"({self.k + 1}, {HOURS}), got {u.shape} and {t.shape}"
            )
        out = self.intercept.copy()
        for lag in range(self.k):
            out += self.c[lag] @ u[self.k - 1 - lag]
        for lag in range(self.k + 1):
            out += self.h[lag] @ t[self.k - lag]
        return out

    def predict_shape(self, shapes_window, temps_window) -> np.ndarray:
        """Simplex forecast: negatives clamped to zero, then renormalized."""
        return _normalize_shape(self.predict(shapes_window, temps_window))

    def to_dict(self) -> dict:
        """Plain-data form for JSON round trips."""
        return {
            "model": "vector_arx",
            "k": int(self.k),
            "lag_orientation": LAG_ORIENTATION,
            "c": self.c.tolist(),
            "h": self.h.tolist(),
            "intercept": self.intercept.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VectorArxModel":
        _check_model_dict(data, "vector_arx")
        model = cls(c=data["c"], h=data["h"], intercept=data["intercept"])
        if model.k != int(data["k"]):
            raise InvalidParameterError(
                f"stated order {data['k']} does not match {model.k} lag matrices"
            )
        return model


def _check_model_dict(data: dict, expected: str) -> None:
    kind = data.get("model")
    if kind != expected:
        raise InvalidParameterError(f"expected a {expected!r} model, got {kind!r}")
    orientation = data.get("lag_orientation")
    if orientation != LAG_ORIENTATION:
        raise InvalidParameterError(
            f"unsupported lag orientation {orientation!r}; "
            f"expected {LAG_ORIENTATION!r}"
        )


def predict_total(model: ArxModel, totals_window, mean_temps_window) -> float:
    """One-step total forecast; see ArxModel.predict for window conventions."""
    return model.predict(totals_window, mean_temps_window)


def predict_shape(model: VectorArxModel, shapes_window, temps_window) -> np.ndarray:
    """One-step simplex shape forecast; windows as in VectorArxModel.predict."""
    return model.predict_shape(shapes_window, temps_window)


def fit_total_arx(history: LoadHistory, k: int, intercept: bool = True,
                  exog: bool = True) -> ArxModel:
    """Least-squares fit of the scalar total model with k lags.

    exog=False drops the temperature terms (b is returned as zeros), which
    reproduces a pure autoregression.  The history must span at least
    2(2k + 2) days so the regressors carry a factor-two margin.
    """
    k = _check_order(k)
    required = 2 * (2 * k + 2)
    if history.n_days < required:
        raise InsufficientDataError(
            f"total ARX({k}) needs at least {required} days, got {history.n_days}"
        )
    totals = history.totals()
    tbar = history.daily_mean_temps()

    rows = history.n_days - k
    n_exog = k + 1 if exog else 0
    n_cols = k + n_exog + (1 if intercept else 0)
    names = [f"p_lag{j}" for j in range(1, k + 1)]
    design = np.empty((rows, n_cols))
    target = np.empty(rows)
    for i, day in enumerate(range(k, history.n_days)):
        design[i, :k] = totals[day - k:day][::-1]
        if exog:
            design[i, k:2 * k + 1] = tbar[day - k:day + 1][::-1]
        target[i] = totals[day]
    if exog:
        names += [f"t_lag{j}" for j in range(0, k + 1)]
    if intercept:
        names.append("intercept")
        design[:, -1] = 1.0

    coef = _lstsq_pivoted(design, target, names)
    return ArxModel(
        a=coef[:k],
        b=coef[k:2 * k + 1] if exog else np.zeros(k + 1),
        intercept=float(coef[-1]) if intercept else 0.0,
    )


def fit_vector_arx(sequence: np.ndarray, temps: np.ndarray, k: int,
                   intercept: bool = False, exog: bool = True) -> VectorArxModel:
    """Fit the 24-row vector ARX on raw day-indexed sequences.

    sequence is (n_days, 24); temps is (n_days, 24) hourly values aligned to
    the same days (only rows 0..n_days-1 are used).  This is the low-level
    entry behind fit_shape_varx: it accepts sequences off the simplex, so
    planted-coefficient round trips can use it directly.  The only data
    requirement is a solvable design (rows >= columns).

    All 24 output rows share one design matrix, so a single pivoted QR
    factorization yields exactly the 24 independent row regressions.
    """
    k = _check_order(k)
    u_seq = np.asarray(sequence, dtype=float)
    t_seq = np.asarray(temps, dtype=float)
    if u_seq.ndim != 2 or u_seq.shape[1] != HOURS:
        raise InvalidParameterError(
            f"sequence must have shape (n_days, {HOURS}), got {u_seq.shape}"
        )
    if t_seq.ndim != 2 or t_seq.shape[1] != HOURS or t_seq.shape[0] < u_seq.shape[0]:
        raise InvalidParameterError(
            f"temps must have shape (>= {u_seq.shape[0]}, {HOURS}), got {t_seq.shape}"
        )
    n_days = u_seq.shape[0]
    n_exog = (k + 1) * HOURS if exog else 0
    n_cols = k * HOURS + n_exog + (1 if intercept else 0)
    rows = n_days - k
    if rows < n_cols:
        raise InsufficientDataError(
            f"vector ARX({k}) needs at least {k + n_cols} days, got {n_days}"
        )

    names = [f"u_lag{j}_h{h}" for j in range(1, k + 1) for h in range(HOURS)]
    design = np.empty((rows, n_cols))
    target = np.empty((rows, HOURS))
    for i, day in enumerate(range(k, n_days)):
        past_u = u_seq[day - k:day][::-1]             # lag order
        design[i, :k * HOURS] = past_u.ravel()
        if exog:
            past_t = t_seq[day - k:day + 1][::-1]
            design[i, k * HOURS:(2 * k + 1) * HOURS] = past_t.ravel()
        target[i] = u_seq[day]
    if exog:
        names += [f"t_lag{j}_h{h}" for j in range(0, k + 1) for h in range(HOURS)]
    if intercept:
        names.append("intercept")
        design[:, -1] = 1.0

    coef = _lstsq_pivoted(design, target, names)
    c = np.empty((k, HOURS, HOURS))
    for lag in range(k):
        c[lag] = coef[lag * HOURS:(lag + 1) * HOURS].T
    h = np.zeros((k + 1, HOURS, HOURS))
    if exog:
        for lag in range(k + 1):
            h[lag] = coef[(k + lag) * HOURS:(k + lag + 1) * HOURS].T
    return VectorArxModel(
        c=c,
        h=h,
        intercept=np.array(coef[-1], dtype=float) if intercept else np.zeros(HOURS),
    )


def fit_shape_varx(history: LoadHistory, k: int, intercept: bool = False,
                   exog: bool = True) -> VectorArxModel:
    """Least-squares fit of the vector shape model with k matrix lags.

    The data margin mirrors fit_total_arx scaled by the 24-hour dimension:
    the history must span at least 2((2k + 1) * 24 + 2) days.  intercept
    defaults to off; see the module note on simplex collinearity.
    """
    k = _check_order(k)
    required = 2 * ((2 * k + 1) * HOURS + 2)
    if history.n_days < required:
        raise InsufficientDataError(
            f"shape ARX({k}) needs at least {required} days, got {history.n_days}"
        )
    return fit_vector_arx(history.shapes(), history.temps, k,
                          intercept=intercept, exog=exog)


def forecast_day(total_model: ArxModel, shape_model: VectorArxModel,
                 history: LoadHistory) -> np.ndarray:
    """Forecast the 24-hour profile for the day after the history ends.

    Requires the extra forecast-day temperature row.  The result is the
    elementwise product of the total forecast with the simplex shape
    forecast, so its hourly sum reproduces the total forecast to roundoff.
    """
    if not history.has_forecast_temps:
        raise InsufficientDataError(
            "history lacks the forecast-day temperature row"
        )
    d = history.n_days
    kt, ks = total_model.k, shape_model.k
    if d < max(kt, ks):
        raise InsufficientDataError(
            f"need at least {max(kt, ks)} days of history, got {d}"
        )
    tbar = history.daily_mean_temps()
    p_hat = total_model.predict(history.totals()[d - kt:], tbar[d - kt:])
    u_hat = shape_model.predict_shape(history.shapes()[d - ks:],
                                      history.temps[d - ks:])
    return p_hat * u_hat


def one_step_forecasts(history: LoadHistory, total_model: ArxModel,
                       shape_model: VectorArxModel, start: int,
                       stop: int = None) -> np.ndarray:
    """One-step-ahead profile forecasts for days start..stop-1.

    Each day is predicted from the actual preceding days (rolling one-step
    evaluation) and the actual same-day temperatures, standing in for a
    day-ahead weather forecast.
    """
    stop = history.n_days if stop is None else stop
    lag = max(total_model.k, shape_model.k)
    if not lag <= start < stop <= history.n_days:
        raise InvalidParameterError(
            f"need {lag} <= start < stop <= {history.n_days}, "
            f"got start={start}, stop={stop}"
        )
    totals = history.totals()
    shapes = history.shapes()
    tbar = history.daily_mean_temps()
    kt, ks = total_model.k, shape_model.k
    out = np.empty((stop - start, HOURS))
    for i, day in enumerate(range(start, stop)):
        p_hat = total_model.predict(totals[day - kt:day], tbar[day - kt:day + 1])
        u_hat = shape_model.predict_shape(shapes[day - ks:day],
                                          history.temps[day - ks:day + 1])
        out[i] = p_hat * u_hat
    return out


@dataclass(frozen=True)
class CvResult:
    """Outcome of rolling-origin order selection."""

    best_k: int
    scores: dict              # candidate k -> validation MSE
    skipped: tuple            # (candidate k, reason) pairs
    target: str
    n_folds: int


def cross_validate_order(history: LoadHistory, candidates, n_folds: int = 5,
                         val_fraction: float = 0.25, target: str = "total",
                         k_shape: int = 1) -> CvResult:
    """Pick the autoregressive order by rolling-origin cross-validation.

    The last val_fraction of days forms n_folds consecutive validation
    blocks; each fold trains on everything before its block and scores
    one-step forecasts inside it by mean squared error (the ranking is the
    same as for RMSE-over-mean since all candidates share the actuals).
    target "total" scores the daily total alone; "profile" fits the shape
    model too (order k_shape) and scores the full 24-hour forecast.
    Candidates that cannot be fitted on some fold (too few training days,
    singular design) are skipped and reported.  Ties prefer the smaller
    order.
    """
    if target not in ("total", "profile"):
        raise InvalidParameterError(f"target must be 'total' or 'profile', got {target!r}")
    ks = sorted({int(k) for k in candidates})
    if not ks:
        raise InvalidParameterError("need at least one candidate order")
    if any(k < 1 for k in ks):
        raise InvalidParameterError(f"candidate orders must be >= 1, got {ks}")
    if n_folds < 1:
        raise InvalidParameterError(f"n_folds must be >= 1, got {n_folds}")
    if not 0.0 < val_fraction < 1.0:
        raise InvalidParameterError(
            f"val_fraction must lie in (0, 1), got {val_fraction}"
        )

    d = history.n_days
    n_val = max(int(math.ceil(val_fraction * d)), n_folds)
    if n_val >= d:
        raise InsufficientDataError(
            f"validation window of {n_val} days leaves no training data ({d} days)"
        )
    val_start = d - n_val
    edges = np.linspace(val_start, d, n_folds + 1).astype(int)

    scores: dict = {}
    skipped: list = []
    for k in ks:
        sq_sum = 0.0
        count = 0
        try:
            for f in range(n_folds):
                lo, hi = int(edges[f]), int(edges[f + 1])
                if lo == hi:
                    continue
                train = history.head(lo)
                total_model = fit_total_arx(train, k)
                if target == "total":
                    totals = history.totals()
                    tbar = history.daily_mean_temps()
                    for day in range(lo, hi):
                        pred = total_model.predict(totals[day - k:day],
                                                   tbar[day - k:day + 1])
                        sq_sum += (pred - totals[day]) ** 2
                        count += 1
                else:
                    shape_model = fit_shape_varx(train, k_shape)
                    pred = one_step_forecasts(history, total_model, shape_model,
                                              lo, hi)
                    err = pred - history.loads[lo:hi]
                    sq_sum += float(np.sum(err**2))
                    count += err.size
        except (InsufficientDataError, SingularFitError) as exc:
            skipped.append((k, str(exc)))
            continue
        scores[k] = sq_sum / count

    if not scores:
        raise InsufficientDataError(
            "no candidate order could be fitted; "
            + "; ".join(f"K={k}: {r}" for k, r in skipped)
        )
    best_k = min(scores, key=lambda k: (scores[k], k))
    return CvResult(best_k=best_k, scores=scores, skipped=tuple(skipped),
                    target=target, n_folds=n_folds)
