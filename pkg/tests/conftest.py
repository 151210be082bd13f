"""Shared builders for the test suite.

Networks come in three sizes: `tiny_network` (K=2, L=2, M=2) for exact /
oracle comparisons, `default_network` (the package defaults) for behavioral
checks, and `bench_network` (the two-sensor heterogeneous instance used by
the acceptance suite) for full solver + simulator runs.
"""

from __future__ import annotations

import numpy as np
import pytest

from wsnpower import ExperimentConfig, build_network
from wsnpower.network import NetworkModel

TINY_OVERRIDES = {
    "network": {"n": 1, "p_tot_mw": 2.0},
    "energy": {"capacity_K": 2, "levels_cells": [0, 1]},
    "channel": {"quantizer": {"levels": 2}},
}

# Two heterogeneous sensors: per-sensor quantizer boundaries, fading scale,
# Doppler, and harvest persistence; shared battery and budget.
BENCH_OVERRIDES = {
    "network": {"n": 2, "p_tot_mw": 5.0, "eta": 0.9},
    "energy": {
        "capacity_K": 6,
        "cell_energy_J": 5e-4,
        "rho": [0.4, 0.5],
        "levels_cells": [0, 2, 4, 6],
    },
    "channel": {
        "mean_square_gain": [1.0, 1.5],
        "doppler_product": 0.04,
        "quantizer": {
            "method": "explicit",
            "boundaries": [[0.0, 0.3, 2.5, 4.7], [0.0, 0.2, 1.4, 3.6]],
        },
    },
}


def config_with(overrides: dict | None = None) -> ExperimentConfig:
    return ExperimentConfig.from_dict(overrides or {})


def tiny_config(extra: dict | None = None) -> ExperimentConfig:
    merged = {k: dict(v) for k, v in TINY_OVERRIDES.items()}
    for section, table in (extra or {}).items():
        merged.setdefault(section, {}).update(table)
    return ExperimentConfig.from_dict(merged)


@pytest.fixture(scope="session")
def tiny_network() -> NetworkModel:
    """One sensor, 12 local states, 3 spend levels."""
    return build_network(tiny_config())


@pytest.fixture(scope="session")
def default_network() -> NetworkModel:
    """One sensor at the package defaults (112 local states)."""
    return build_network(config_with({"network": {"n": 1}}))


@pytest.fixture(scope="session")
def default_network_n2() -> NetworkModel:
    return build_network(config_with({"network": {"n": 2}}))


@pytest.fixture(scope="session")
def bench_config() -> ExperimentConfig:
    return ExperimentConfig.from_dict(BENCH_OVERRIDES)


@pytest.fixture(scope="session")
def bench_network(bench_config) -> NetworkModel:
    """The heterogeneous two-sensor benchmark instance."""
    return build_network(bench_config)


def random_mdp(
    rng: np.random.Generator, n_states: int, n_actions: int, *, mask_frac: float = 0.0
) -> tuple[np.ndarray, np.ndarray]:
    """Random dense MDP: row-stochastic kernels and bounded rewards.

    `mask_frac` disables roughly that fraction of (state, action) pairs with
    -inf rewards, always keeping action 0 available everywhere.
    """
    kernels = rng.gamma(1.0, 1.0, size=(n_actions, n_states, n_states))
    kernels /= kernels.sum(axis=2, keepdims=True)
    rewards = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    if mask_frac > 0.0:
        mask = rng.random((n_states, n_actions)) < mask_frac
        mask[:, 0] = False
        rewards[mask] = -np.inf
    return kernels, rewards
