"""Synthetic customer populations with known ground truth.

Each customer has a daily energy scale drawn from the generalized Pareto
size distribution, a shared base shape, and a linear temperature response:

    load[c, d, h] = size_c * (1 + a * (tbar_d - T0))
                           * (base_h + b * (temp_dh - tbar_d)) + noise

with tbar_d the day's mean temperature.  The form is deliberately inside
the decomposed forecaster's model class: the daily total is affine in the
daily mean temperature and the shape is affine in the hourly deviations, so
with enough data the forecaster's residuals reduce to the injected noise.
That is what makes the population useful for calibrating residual tests.

Noise is homoscedastic per customer (standard deviation proportional to the
customer's hourly mean), Gaussian or centered-exponential, optionally AR(1)
along the customer's full hourly time line.  Loads are clamped at zero;
under default settings the clamp sits several noise standard deviations
below the signal and never binds.

Subset sampling is deterministic given (seed, level, replicate) and does not
depend on which other subsets are drawn.  Within one level, replicates carve
disjoint chunks out of a level-specific permutation for as long as the
population lasts, then fall back to independent draws.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import signal

from .errors import InvalidParameterError, SchemaError
from .forecaster import HOURS, LoadHistory
from .tailmodel import GpdParams, gpd_sample

__all__ = [
    "NOISE_KINDS",
    "SynthConfig",
    "Population",
    "synth_population",
    "subset_indices",
    "default_base_shape",
]

NOISE_KINDS = ("gaussian", "exponential")

# Relative hourly weights of a residential double-peak day (evening peak
# around hour 18, morning shoulder around 7); normalized to sum to 1.
_BASE_SHAPE = np.array([
    0.030, 0.027, 0.025, 0.025, 0.026, 0.030,
    0.038, 0.046, 0.044, 0.040, 0.038, 0.039,
    0.041, 0.039, 0.037, 0.038, 0.044, 0.054,
    0.062, 0.060, 0.055, 0.048, 0.040, 0.034,
])
_BASE_SHAPE = _BASE_SHAPE / _BASE_SHAPE.sum()

# Intraday temperature swing, coolest at 03:00, warmest at 15:00.
_DIURNAL_PATTERN = -np.cos(2.0 * np.pi * (np.arange(HOURS) - 3.0) / HOURS)

_DEFAULT_SIZE_DIST = GpdParams(kappa=0.58, sigma=74.28, theta=0.25)


def default_base_shape() -> np.ndarray:
    """Copy of the built-in normalized base shape."""
    return _BASE_SHAPE.copy()


@dataclass(frozen=True)
class SynthConfig:
    """Everything needed to generate one population deterministically.

    base_shape holds 24 relative hourly weights; they are normalized to sum
    to 1 at generation time so size stays the expected daily energy.
    """

    n_customers: int
    n_days: int
    seed: int
    size_dist: GpdParams = _DEFAULT_SIZE_DIST
    base_shape: tuple = tuple(_BASE_SHAPE)
    temp_mean_c: float = 14.0
    temp_seasonal_amp_c: float = 8.0
    temp_diurnal_amp_c: float = 4.0
    temp_noise_c: float = 1.0
    temp_phase_days: float = -80.0
    daily_response_per_c: float = 0.01
    hourly_response_per_c: float = 0.002
    noise_kind: str = "gaussian"
    noise_scale: float = 0.05
    ar1_phi: float = 0.0
    start_date: str = "2021-01-01"

    def __post_init__(self):
        if self.n_customers < 1:
            raise InvalidParameterError(
                f"n_customers must be >= 1, got {self.n_customers}"
            )
        if self.n_days < 30:
            raise InvalidParameterError(f"n_days must be >= 30, got {self.n_days}")
        if self.seed < 0:
            raise InvalidParameterError(f"seed must be >= 0, got {self.seed}")
        if not isinstance(self.size_dist, GpdParams):
            raise InvalidParameterError(
                f"size_dist must be GpdParams, got {type(self.size_dist).__name__}"
            )
        shape = tuple(float(v) for v in self.base_shape)
        object.__setattr__(self, "base_shape", shape)
        if len(shape) != HOURS:
            raise InvalidParameterError(
                f"base_shape must have {HOURS} weights, got {len(shape)}"
            )
        if not all(math.isfinite(v) and v >= 0.0 for v in shape):
            raise InvalidParameterError(
                "base_shape weights must be finite and non-negative"
            )
        if sum(shape) <= 0.0:
            raise InvalidParameterError("base_shape must not be all zero")
        if self.noise_kind not in NOISE_KINDS:
            raise InvalidParameterError(
                f"noise_kind must be one of {NOISE_KINDS}, got {self.noise_kind!r}"
            )
        if self.noise_scale < 0.0:
            raise InvalidParameterError(
                f"noise_scale must be >= 0, got {self.noise_scale}"
            )
        if not 0.0 <= self.ar1_phi < 1.0:
            raise InvalidParameterError(
                f"ar1_phi must lie in [0, 1), got {self.ar1_phi}"
            )
        if self.temp_noise_c < 0.0:
            raise InvalidParameterError(
                f"temp_noise_c must be >= 0, got {self.temp_noise_c}"
            )
        try:
            datetime.date.fromisoformat(self.start_date)
        except (TypeError, ValueError) as exc:
            raise InvalidParameterError(
                f"start_date must be an ISO date (YYYY-MM-DD): {exc}"
            ) from None

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        """Build a config from parsed JSON; unknown keys raise SchemaError."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SchemaError(f"unknown synth config keys: {', '.join(unknown)}")
        missing = sorted({"n_customers", "n_days", "seed"} - set(data))
        if missing:
            raise SchemaError(f"missing synth config keys: {', '.join(missing)}")
        data = dict(data)
        if "size_dist" in data and isinstance(data["size_dist"], dict):
            extra = sorted(set(data["size_dist"]) - {"kappa", "sigma", "theta"})
            if extra:
                raise SchemaError(f"unknown size_dist keys: {', '.join(extra)}")
            data["size_dist"] = GpdParams(**data["size_dist"])
        return cls(**data)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["base_shape"] = list(out["base_shape"])
        return out


@dataclass(frozen=True)
class Population:
    """Generated loads (customers x days x hours) plus shared temperatures."""

    loads: np.ndarray        # (n_customers, n_days, 24) kWh
    temps: np.ndarray        # (n_days + 1, 24) degrees C, last row = forecast day
    sizes: np.ndarray        # (n_customers,) daily energy scale, kWh/day
    config: SynthConfig

    @property
    def n_customers(self) -> int:
        return self.loads.shape[0]

    @property
    def n_days(self) -> int:
        return self.loads.shape[1]

    def dates(self) -> tuple:
        start = datetime.date.fromisoformat(self.config.start_date)
        return tuple(
            (start + datetime.timedelta(days=int(d))).isoformat()
            for d in range(self.temps.shape[0])
        )

    def aggregate(self, indices) -> LoadHistory:
        """Load history of the summed loads over the given customer indices."""
        idx = np.asarray(indices, dtype=int).ravel()
        if idx.size == 0:
            raise InvalidParameterError("need at least one customer index")
        if np.any(idx < 0) or np.any(idx >= self.n_customers):
            raise InvalidParameterError(
                f"customer indices must lie in [0, {self.n_customers}), "
                f"got range [{idx.min()}, {idx.max()}]"
            )
        if np.unique(idx).size != idx.size:
            raise InvalidParameterError("customer indices must be distinct")
        return LoadHistory(
            loads=self.loads[idx].sum(axis=0),
            temps=self.temps,
            dates=self.dates(),
        )

    def customer(self, index: int) -> LoadHistory:
        return self.aggregate([index])


def _ar1_filter(white: np.ndarray, phi: float) -> np.ndarray:
    """Unit-variance AR(1) colouring along the last axis.

    e[0] = w[0], e[n] = phi * e[n-1] + sqrt(1 - phi^2) * w[n]; the marginal
    variance stays 1 from the first sample on.
    """
    if phi == 0.0:
        return white
    scale = math.sqrt(1.0 - phi * phi)
    first = white[..., :1]
    rest, _ = signal.lfilter([scale], [1.0, -phi], white[..., 1:],
                             axis=-1, zi=phi * first)
    return np.concatenate([first, rest], axis=-1)


def synth_population(config: SynthConfig) -> Population:
    """Generate a population; byte-identical for identical configs.

    The generator stream is consumed in a fixed order (sizes, temperature
    noise, load noise), so every array is reproducible from the seed alone.
    """
    c, d = config.n_customers, config.n_days
    rng = np.random.default_rng(config.seed)

    sizes = gpd_sample(config.size_dist, c, rng)
    base = np.asarray(config.base_shape, dtype=float)
    base = base / base.sum()

    days = np.arange(d + 1, dtype=float)
    seasonal = config.temp_mean_c + config.temp_seasonal_amp_c * np.sin(
        2.0 * np.pi * (days + config.temp_phase_days) / 365.25
    )
    temps = (
        seasonal[:, None]
        + config.temp_diurnal_amp_c * _DIURNAL_PATTERN[None, :]
        + config.temp_noise_c * rng.standard_normal((d + 1, HOURS))
    )

    tbar = temps[:d].mean(axis=1)
    deviation = temps[:d] - tbar[:, None]
    day_gain = 1.0 + config.daily_response_per_c * (tbar - config.temp_mean_c)
    hour_profile = base[None, :] + config.hourly_response_per_c * deviation
    det = sizes[:, None, None] * (day_gain[:, None] * hour_profile)[None, :, :]

    if config.noise_kind == "gaussian":
        white = rng.standard_normal((c, d * HOURS))
    else:
        white = rng.exponential(1.0, (c, d * HOURS)) - 1.0
    noise = _ar1_filter(white, config.ar1_phi)
    hourly_sd = config.noise_scale * sizes / HOURS
    loads = np.maximum(det + (hourly_sd[:, None] * noise).reshape(c, d, HOURS), 0.0)

    return Population(loads=loads, temps=temps, sizes=sizes, config=config)


def subset_indices(n_customers: int, level: int, replicate: int,
                   seed: int) -> np.ndarray:
    """Deterministic customer subset for one (level, replicate) cell.

    While (replicate + 1) * level fits in the population, replicates slice
    consecutive chunks of a permutation seeded by (seed, level), so they are
    mutually disjoint.  Later replicates draw independently without
    replacement from a stream seeded by (seed, level, replicate).
    """
    if level < 1:
        raise InvalidParameterError(f"level must be >= 1, got {level}")
    if level > n_customers:
        raise InvalidParameterError(
            f"level {level} exceeds population size {n_customers}"
        )
    if replicate < 0:
        raise InvalidParameterError(f"replicate must be >= 0, got {replicate}")
    if seed < 0:
        raise InvalidParameterError(f"seed must be >= 0, got {seed}")
    if (replicate + 1) * level <= n_customers:
        perm = np.random.default_rng([seed, level]).permutation(n_customers)
        return np.sort(perm[replicate * level:(replicate + 1) * level])
    rng = np.random.default_rng([seed, level, replicate])
    return np.sort(rng.choice(n_customers, size=level, replace=False))
