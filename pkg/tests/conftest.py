"""Shared fixtures and hypothesis configuration."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from feederload import Population, SynthConfig, synth_population

settings.register_profile(
    "feederload",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("feederload")


@pytest.fixture(scope="session")
def small_population() -> Population:
    """Sixty customers over 240 days: enough for the default forecaster split
    (168 training days clears the 148-day shape-model margin) while staying
    fast to generate and aggregate."""
    return synth_population(SynthConfig(n_customers=60, n_days=240, seed=7))


@pytest.fixture(scope="session")
def small_history(small_population):
    """Whole-population aggregate history with the forecast-day temp row."""
    return small_population.aggregate(np.arange(small_population.n_customers))
