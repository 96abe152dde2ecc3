"""Mean-squared Bellman error subproblem: objective, gradient, and the
single-sample stochastic gradient.

With a frozen target table q_t, the subproblem is

    F(q) = 1/2 * sum_{s,a} d(s,a) * ((T q_t)(s,a) - q(s,a))^2,

a quadratic with constant diagonal Hessian D = diag(d). Its strong
convexity and smoothness constants are therefore exactly c_min and l_max
of the sampling distribution. A sampled transition touches a single
coordinate, so the stochastic gradient is one-hot.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bellman import apply_bellman
from .mdp import SamplingDistribution, TabularMdp


@dataclass(frozen=True)
class TransitionSample:
    """One draw (s, a) ~ d, s' ~ P_a(s, .) with its deterministic reward."""

    s: int
    a: int
    s_next: int
    reward: float


@dataclass(frozen=True)
class OneHotGradient:
    """Stochastic gradient: value at coordinate (s, a), zero elsewhere."""

    s: int
    a: int
    value: float

    def to_dense(self, num_states: int, num_actions: int) -> np.ndarray:
        out = np.zeros((num_states, num_actions))
        out[self.s, self.a] = self.value
        return out


def loss(
    q: np.ndarray,
    q_target: np.ndarray,
    mdp: TabularMdp,
    d: SamplingDistribution,
) -> float:
    """F(q) = 1/2 ||T q_target - q||_D^2. Zero exactly at q = T q_target."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != mdp.rewards.shape:
        raise ValueError(f"q has shape {q.shape}, expected {mdp.rewards.shape}")
    diff = apply_bellman(q_target, mdp) - q
    return 0.5 * float(np.sum(d.probs * diff * diff))


def exact_gradient(
    q: np.ndarray,
    q_target: np.ndarray,
    mdp: TabularMdp,
    d: SamplingDistribution,
) -> np.ndarray:
    """Gradient of the subproblem: -d(s,a) * ((T q_target)(s,a) - q(s,a)).

    The target term includes the discount, consistent with the objective
    (the gradient is the derivative of `loss`, so the two always pair).
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != mdp.rewards.shape:
        raise ValueError(f"q has shape {q.shape}, expected {mdp.rewards.shape}")
    return -d.probs * (apply_bellman(q_target, mdp) - q)


def stochastic_gradient(
    sample: TransitionSample,
    q: np.ndarray,
    q_target: np.ndarray,
    gamma: float,
) -> OneHotGradient:
    """Single-sample estimate of the gradient at coordinate (s, a).

    g = -(r + gamma * max_a' q_target(s', a') - q(s, a)), i.e. minus the
    TD error of the sample against the frozen target. Averaging over
    (s, a) ~ d and s' ~ P recovers exact_gradient; the max over actions
    uses numpy's argmax order so tied values pick the lowest index
    (the max value itself is unaffected).
    """
    target_row = np.asarray(q_target)[sample.s_next]
    td_error = sample.reward + gamma * float(target_row.max()) - float(q[sample.s, sample.a])
    return OneHotGradient(s=sample.s, a=sample.a, value=-td_error)
