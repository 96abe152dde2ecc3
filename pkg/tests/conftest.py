"""Shared fixtures: hand-checkable mini models and the 5x3 benchmark."""
from __future__ import annotations

import numpy as np
import pytest

from pqlearn import TabularMdp, random_mdp, uniform_distribution

# The 5x3 benchmark instance used by the empirical convergence checks:
# uniform sampling, gamma = 0.9, sparse branching for value spread.
BENCHMARK_SEED = 20311
BENCHMARK_BRANCHING = 3


def benchmark_mdp() -> TabularMdp:
    return random_mdp(BENCHMARK_SEED, 5, 3, 0.9, BENCHMARK_BRANCHING)


@pytest.fixture(scope="session")
def bench_mdp() -> TabularMdp:
    return benchmark_mdp()


@pytest.fixture(scope="session")
def bench_dist():
    return uniform_distribution(5, 3)


@pytest.fixture
def chain_mdp() -> TabularMdp:
    """Two states, one action: s0 -> s1 -> s1, reward 1 everywhere,
    gamma = 0.5. Every value quantity is 2 = 1/(1 - gamma)."""
    transitions = np.array([[[0.0, 1.0], [0.0, 1.0]]])
    rewards = np.ones((2, 1))
    return TabularMdp(2, 1, transitions, rewards, 0.5)


@pytest.fixture
def single_cell_mdp() -> TabularMdp:
    """One state, one action, reward 1, gamma = 0.5: Q* = 2 exactly."""
    return TabularMdp(1, 1, np.ones((1, 1, 1)), np.ones((1, 1)), 0.5)


def zero_gamma_mdp(seed: int = 0, num_states: int = 3, num_actions: int = 2) -> TabularMdp:
    """Structurally valid model with gamma = 0 for the discount-free
    edge-case contracts (gamma = 0 fails full validation on purpose)."""
    base = random_mdp(seed, num_states, num_actions, 0.5, num_states)
    return TabularMdp(num_states, num_actions, base.transitions, base.rewards, 0.0)
