"""Shared fixtures: small hand-checkable clouds and traces, and the bundled scenario corpus."""

from __future__ import annotations

import numpy as np
import pytest

from src.model import CloudConfig, PriceTrace, WorkloadTrace
from src.predictor import PredictionMode, PredictionModel
from src.synthesizer import scenario_corpus

SEED = 7


@pytest.fixture
def two_dc_cloud() -> CloudConfig:
    """Two data centers, capacity 10 each, migration rate 0.5 both ways, D = 2."""
    return CloudConfig.uniform(2, capacity=10.0, migration_rate=0.5, horizon=2, names=("east", "west"))


@pytest.fixture
def two_dc_prices() -> PriceTrace:
    beta = np.array([
        [5.0, 4.0, 1.0, 6.0, 6.0, 2.0],
        [3.0, 6.0, 2.0, 5.0, 1.0, 7.0],
    ])
    history = {offset: np.tile(beta, (1, 2)) for offset in (1, 2, 7)}
    return PriceTrace(beta, history, locations=("east", "west"))


@pytest.fixture
def two_dc_work() -> WorkloadTrace:
    return WorkloadTrace(np.array([4.0, 6.0, 3.0, 5.0, 2.0, 1.0]))


@pytest.fixture
def oracle_model() -> PredictionModel:
    return PredictionModel(rng_seed=SEED, mode=PredictionMode.ORACLE)


@pytest.fixture(scope="session")
def corpus():
    return scenario_corpus(SEED)
