"""Norms and error functionals shared by the runner, the tests, and the
service. All functions are per-realization; expectations over seeds are
taken by whoever owns the replicas."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bellman import apply_bellman, greedy_policy, policy_evaluation
from .mdp import SamplingDistribution, TabularMdp


@dataclass(frozen=True)
class ErrorReport:
    """Error measurements of a table against a reference.

    q_inf_error and q_l2_error are the max- and Euclidean norms of the
    difference; d_norm_sq_error is the squared distribution-weighted norm
    sum d(s,a) * diff^2. v_gap and epsilon_k are filled only where a
    policy evaluation or an inner-iteration residual was actually taken.
    """

    q_inf_error: float
    q_l2_error: float
    d_norm_sq_error: float
    v_gap: float | None = None
    epsilon_k: float | None = None


def norms(q: np.ndarray, ref: np.ndarray, d: SamplingDistribution) -> ErrorReport:
    """Max-norm, 2-norm, and squared D-norm of q - ref."""
    q = np.asarray(q, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if q.shape != ref.shape or q.shape != d.probs.shape:
        raise ValueError(f"shape mismatch: q {q.shape}, ref {ref.shape}, d {d.probs.shape}")
    diff = q - ref
    sq = diff * diff
    return ErrorReport(
        q_inf_error=float(np.max(np.abs(diff))),
        q_l2_error=float(np.sqrt(np.sum(sq))),
        d_norm_sq_error=float(np.sum(d.probs * sq)),
    )


def policy_gap(mdp: TabularMdp, q: np.ndarray, q_star: np.ndarray) -> float:
    """||V^{pi_q} - V*||_inf: how suboptimal the greedy policy of q is.

    The greedy policy is extracted from q, evaluated exactly, and compared
    with V* = max_a q_star(., a). Invariant under any perturbation of q
    that preserves the per-state argmax.
    """
    pi = greedy_policy(q)
    _, v_pi = policy_evaluation(mdp, pi)
    v_star = np.asarray(q_star).max(axis=1)
    return float(np.max(np.abs(v_pi - v_star)))


def inner_residual(q_new: np.ndarray, q_target: np.ndarray, mdp: TabularMdp) -> float:
    """Squared 2-norm residual ||q_new - T q_target||_2^2 of one
    synchronization step (per seed; averaging happens upstream)."""
    diff = np.asarray(q_new, dtype=np.float64) - apply_bellman(q_target, mdp)
    return float(np.sum(diff * diff))
