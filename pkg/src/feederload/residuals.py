"""Residual diagnostics: autocorrelation energy and a normality sweep.

Whiteness is summarized by the normalized autocorrelation

    rho[m] = sum_n e[n + m] * e[n] / sum_n e[n]**2,     rho[0] = 1,

deliberately without mean subtraction (forecast residuals should already be
centred; a bias shows up as correlation, which is the point).  The scalar
correlation energy

    gamma = sum_{m=1..M} |rho[m]| / sum_{m=0..M} |rho[m]|

is the fraction of autocorrelation mass beyond lag zero.  Its literal form
never reaches zero on finite samples (every empirical |rho[m]| is O(1/sqrt(N))
but positive, so with M = 24 and N ~ 1000 white noise still scores about a
third).  The thresholded variant counts only lags with |rho[m]| above a
significance threshold, conventionally the two-sided normal band
1.96/sqrt(N), in the numerator; white noise then scores near zero while
genuine correlation structure keeps its mass.

Normality of hourly residuals is tested with the Shapiro-Wilk W statistic
using Royston's 1995 approximation (valid for 3 <= n <= 5000), implemented
here from the published polynomial smoothings.  The sweep fits the
day-ahead forecaster to aggregates of sampled customer subsets and reports,
per aggregation level, the fraction of replicates whose residuals pass the
test at level alpha, alongside mean correlation energies.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import (
    DegenerateDataError,
    DomainError,
    InsufficientDataError,
    InvalidParameterError,
)
from .forecaster import fit_shape_varx, fit_total_arx, one_step_forecasts
from .synth import Population, subset_indices

__all__ = [
    "SwResult",
    "ResidualReport",
    "SweepResult",
    "autocorr",
    "correlation_energy",
    "significance_threshold",
    "shapiro_wilk",
    "residual_report",
    "sweep_normality",
]

logger = logging.getLogger(__name__)

SW_MIN_N = 3
SW_MAX_N = 5000

# Royston's polynomial smoothings (highest power first, as numpy.polyval
# expects): weight corrections c1/c2 in 1/sqrt(n), null moments of the
# transformed statistic in n (c3/c4, small samples) or log n (c5/c6).
_C1 = [-2.706056, 4.434685, -2.07119, -0.147981, 0.221157, 0.0]
_C2 = [-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0]
_C3 = [-0.0006714, 0.025054, -0.39978, 0.544]
_C4 = [-0.0020322, 0.062767, -0.77857, 1.3822]
_C5 = [0.0038915, -0.083751, -0.31082, -1.5861]
_C6 = [0.0030302, -0.082676, -0.4803]
_G = [0.459, -2.273]


def _as_series(x, min_size: int, what: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size < min_size:
        raise InsufficientDataError(
            f"{what} needs at least {min_size} observations, got {arr.size}"
        )
    if not np.all(np.isfinite(arr)):
        raise DegenerateDataError(f"{what} input contains non-finite values")
    return arr


def autocorr(residuals, max_lag: int = 24,
             mean_subtract: bool = False) -> np.ndarray:
    """Normalized autocorrelation rho[0..max_lag] with rho[0] = 1.

    The denominator is the full sum of squares, so |rho[m]| <= 1 and the
    sequence decays automatically as overlap shrinks.  max_lag must be below
    the series length.  mean_subtract centres the series first for callers
    who want the classical estimator.
    """
    if max_lag < 1:
        raise InvalidParameterError(f"max_lag must be >= 1, got {max_lag}")
    e = _as_series(residuals, 2, "autocorr")
    if max_lag >= e.size:
        raise InsufficientDataError(
            f"max_lag={max_lag} requires a series longer than that, got {e.size}"
        )
    if mean_subtract:
        e = e - e.mean()
    denom = float(np.dot(e, e))
    if denom == 0.0:
        raise DegenerateDataError("residuals are identically zero")
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for m in range(1, max_lag + 1):
        rho[m] = float(np.dot(e[m:], e[:-m])) / denom
    return rho


def significance_threshold(n: int) -> float:
    """Two-sided 95% band 1.96/sqrt(n) for an empirical autocorrelation."""
    if n < 2:
        raise InvalidParameterError(f"need a series of length >= 2, got {n}")
    return 1.96 / math.sqrt(n)


def correlation_energy(rho, threshold: float = None) -> float:
    """Fraction of autocorrelation mass beyond lag zero, in [0, 1).

    rho is the autocorr output (rho[0] must be 1).  With threshold=None the
    literal ratio sum|rho[1:]| / sum|rho| is returned; a threshold tau keeps
    only lags with |rho[m]| > tau in the numerator (denominator unchanged),
    which calibrates the score to near zero on white noise.  Pass
    significance_threshold(len(series)) for the conventional band.
    """
    r = np.asarray(rho, dtype=float).ravel()
    if r.size == 0:
        raise InvalidParameterError("rho must be non-empty")
    if not np.all(np.isfinite(r)):
        raise DegenerateDataError("rho contains non-finite values")
    if abs(r[0] - 1.0) > 1e-9:
        raise InvalidParameterError(f"rho[0] must be 1, got {r[0]}")
    tail = np.abs(r[1:])
    kept = tail if threshold is None else tail[tail > threshold]
    return float(np.sum(kept) / (1.0 + np.sum(tail)))


@dataclass(frozen=True)
class SwResult:
    """Shapiro-Wilk test outcome; passed means p_value > alpha."""

    statistic: float
    p_value: float
    n: int
    alpha: float

    @property
    def passed(self) -> bool:
        return self.p_value > self.alpha


def shapiro_wilk(samples, alpha: float = 0.05) -> SwResult:
    """Shapiro-Wilk normality test, Royston's approximation.

    Valid for 3 <= n <= 5000.  Returns the W statistic, the upper-tail
    p-value (small p means the sample is unlikely to be Gaussian) and the
    pass verdict at level alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    x = np.sort(_as_series(samples, SW_MIN_N, "shapiro_wilk"))
    n = x.size
    if n > SW_MAX_N:
        raise DomainError(f"shapiro_wilk supports n <= {SW_MAX_N}, got {n}")
    if x[0] == x[-1]:
        raise DegenerateDataError("sample is constant")

    # Expected normal order statistics (Blom) and the weight vector.
    m = ndtri((np.arange(1, n + 1) - 0.375) / (n + 0.25))
    ssm = float(np.dot(m, m))
    a = np.empty(n)
    if n == 3:
        a[0], a[1], a[2] = -math.sqrt(0.5), 0.0, math.sqrt(0.5)
    else:
        u = 1.0 / math.sqrt(n)
        a_n = m[-1] / math.sqrt(ssm) + np.polyval(_C1, u)
        if n > 5:
            a_n1 = m[-2] / math.sqrt(ssm) + np.polyval(_C2, u)
            phi = (ssm - 2.0 * m[-1]**2 - 2.0 * m[-2]**2) / \
                  (1.0 - 2.0 * a_n**2 - 2.0 * a_n1**2)
            a[2:-2] = m[2:-2] / math.sqrt(phi)
            a[-2], a[1] = a_n1, -a_n1
        else:
            phi = (ssm - 2.0 * m[-1]**2) / (1.0 - 2.0 * a_n**2)
            a[1:-1] = m[1:-1] / math.sqrt(phi)
        a[-1], a[0] = a_n, -a_n

    xbar = float(np.mean(x))
    ssx = float(np.dot(x - xbar, x - xbar))
    if ssx <= 0.0:
        raise DegenerateDataError("sample is constant")
    sax = float(np.dot(a, x))
    ssa = float(np.dot(a, a))
    # W = sax^2 / (ssa * ssx); computing 1 - W via the factored difference
    # keeps precision when W is close to 1.
    norm = math.sqrt(ssa * ssx)
    w1 = (norm - sax) * (norm + sax) / (ssa * ssx)
    w = 1.0 - w1

    if n == 3:
        p = 6.0 / math.pi * (math.asin(math.sqrt(max(min(w, 1.0), 0.75)))
                             - math.asin(math.sqrt(0.75)))
        return SwResult(statistic=w, p_value=min(max(p, 0.0), 1.0), n=n,
                        alpha=alpha)
    if w1 <= 0.0:
        # W rounded to 1: a numerically perfect straight line on the
        # normal plot, which no level rejects.
        return SwResult(statistic=w, p_value=1.0, n=n, alpha=alpha)
    if n <= 11:
        gamma = np.polyval(_G, n)
        if gamma - math.log(w1) <= 0.0:
            return SwResult(statistic=w, p_value=0.0, n=n, alpha=alpha)
        w_ln = -math.log(gamma - math.log(w1))
        mu = np.polyval(_C3, n)
        sigma = math.exp(np.polyval(_C4, n))
    else:
        w_ln = math.log(w1)
        y = math.log(n)
        mu = np.polyval(_C5, y)
        sigma = math.exp(np.polyval(_C6, y))
    z = (w_ln - mu) / sigma
    return SwResult(statistic=w, p_value=float(ndtr(-z)), n=n, alpha=alpha)


@dataclass(frozen=True)
class ResidualReport:
    """All residual diagnostics for one series in one record."""

    rho: np.ndarray
    gamma: float
    gamma_thresholded: float
    sw_stat: float
    sw_p: float
    sw_pass: bool
    n: int
    alpha: float


def residual_report(residuals, max_lag: int = 24,
                    alpha: float = 0.05) -> ResidualReport:
    """Autocorrelation, both correlation energies and the normality verdict."""
    e = _as_series(residuals, SW_MIN_N, "residual_report")
    rho = autocorr(e, max_lag=max_lag)
    sw = shapiro_wilk(e, alpha=alpha)
    return ResidualReport(
        rho=rho,
        gamma=correlation_energy(rho),
        gamma_thresholded=correlation_energy(
            rho, threshold=significance_threshold(e.size)
        ),
        sw_stat=sw.statistic,
        sw_p=sw.p_value,
        sw_pass=sw.passed,
        n=e.size,
        alpha=alpha,
    )


@dataclass(frozen=True)
class SweepResult:
    """Per-level residual diagnostics over sampled aggregates.

    table columns: level, n_customers, pass_fraction, mean_gamma,
    mean_gamma_thresholded.  reference_pass_rate = 1 - alpha is the line a
    well-calibrated test should track when residuals really are Gaussian.
    """

    table: np.ndarray
    skipped: tuple
    alpha: float
    replicates: int
    max_lag: int
    seed: int

    @property
    def reference_pass_rate(self) -> float:
        return 1.0 - self.alpha


def sweep_normality(population: Population, levels, replicates: int = 20,
                    seed: int = 0, alpha: float = 0.05, max_lag: int = 24,
                    k_total: int = 2, k_shape: int = 1,
                    train_frac: float = 0.7, n_jobs: int = 1) -> SweepResult:
    """Fit, forecast and test residuals across aggregation levels.

    For each level and replicate a customer subset is drawn, the decomposed
    forecaster is fitted on the first train_frac of days, and the hourly
    one-step residuals from the remaining days feed Shapiro-Wilk (pass means
    p > alpha) and both correlation energies.  Levels beyond the population
    size are skipped and recorded.  Cells run on independent derived random
    streams, so n_jobs > 1 fans them out over threads without changing any
    output.
    """
    levels = sorted({int(lv) for lv in levels})
    if not levels or levels[0] < 1:
        raise InvalidParameterError(f"levels must be positive integers, got {levels}")
    if replicates < 1:
        raise InvalidParameterError(f"replicates must be >= 1, got {replicates}")
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie in (0, 1), got {alpha}")
    n_train = int(train_frac * population.n_days)
    if not 0 < n_train < population.n_days:
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
            logger.warning("skipping sweep level: %s", reason)
            skipped.append((level, reason))
        else:
            kept.append(level)

    def run_cell(cell: tuple) -> tuple:
        level, rep = cell
        idx = subset_indices(population.n_customers, level, rep, seed)
        history = population.aggregate(idx)
        train = history.head(n_train)
        total_model = fit_total_arx(train, k_total)
        shape_model = fit_shape_varx(train, k_shape)
        pred = one_step_forecasts(history, total_model, shape_model, n_train)
        resid = (history.loads[n_train:] - pred).ravel()
        rho = autocorr(resid, max_lag=max_lag)
        return (
            shapiro_wilk(resid, alpha=alpha).passed,
            correlation_energy(rho),
            correlation_energy(rho, threshold=significance_threshold(resid.size)),
        )

    cells = [(level, rep) for level in kept for rep in range(replicates)]
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]

    rows = []
    for i, level in enumerate(kept):
        block = results[i * replicates:(i + 1) * replicates]
        passes, gammas, gammas_thr = zip(*block)
        rows.append((
            float(level),
            float(level),
            float(np.mean(passes)),
            float(np.mean(gammas)),
            float(np.mean(gammas_thr)),
        ))
    return SweepResult(
        table=np.array(rows, dtype=float).reshape(-1, 5),
        skipped=tuple(skipped),
        alpha=alpha,
        replicates=replicates,
        max_lag=max_lag,
        seed=seed,
    )
