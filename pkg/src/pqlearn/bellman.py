"""Exact Bellman operator, greedy policies, and fixed-point oracles.

Q-tables are plain (S, A) float64 arrays. The operator

    (T q)(s, a) = r(s, a) + gamma * sum_s' P_a(s, s') max_a' q(s', a')

is a gamma-contraction in the max-norm; its unique fixed point is the
optimal table Q*, with ||Q*||_inf <= 1 / (1 - gamma) for rewards in
[-1, 1]. Everything here is deterministic and serves as the reference
against which the stochastic learner is measured, so the solvers certify
their accuracy rather than just iterating a fixed number of times.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mdp import SamplingDistribution, TabularMdp

logger = logging.getLogger(__name__)

DEFAULT_ORACLE_TOL = 1e-10
POLICY_EVAL_RESIDUAL = 1e-10


def q_bound(gamma: float) -> float:
    """Max-norm bound 1/(1-gamma) satisfied by Q* and by compliant inits."""
    return 1.0 / (1.0 - gamma)


def apply_bellman(q: np.ndarray, mdp: TabularMdp) -> np.ndarray:
    """One exact application of the Bellman operator.

    Rows of P are stochastic, so the reward term factors out of the sum:
    T q = r + gamma * P @ max_a' q. With gamma = 0 the output is exactly
    the rewards matrix.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.shape != mdp.rewards.shape:
        raise ValueError(f"q has shape {q.shape}, expected {mdp.rewards.shape}")
    m = q.max(axis=1)  # (S,)
    next_vals = mdp.transitions @ m  # (A, S)
    return mdp.rewards + mdp.gamma * next_vals.T


def greedy_policy(q: np.ndarray) -> np.ndarray:
    """Per-state argmax over actions; ties break to the lowest action
    index so identical tables always yield identical policies."""
    return np.argmax(q, axis=1)


def value_iteration(mdp: TabularMdp, tol: float = DEFAULT_ORACLE_TOL) -> np.ndarray:
    """Iterate T from zeros until the returned table is certified within
    tol of Q* in max-norm.

    Stops once the pre-update residual ||T q - q||_inf drops below
    tol * (1 - gamma) / (2 gamma) and returns the post-update iterate T q;
    by the contraction this guarantees ||T q - Q*||_inf <= tol / 2.
    """
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    gamma = mdp.gamma
    threshold = np.inf if gamma == 0.0 else tol * (1.0 - gamma) / (2.0 * gamma)
    q = np.zeros_like(mdp.rewards)
    sweeps = 0
    while True:
        tq = apply_bellman(q, mdp)
        residual = float(np.max(np.abs(tq - q)))
        q = tq
        sweeps += 1
        if residual <= threshold:
            break
    logger.debug("value_iteration: %d sweeps, final residual %.3e", sweeps, residual)
    if float(np.max(np.abs(q))) > q_bound(gamma) + tol:
        raise AssertionError("optimal table exceeded the 1/(1-gamma) bound")
    return q


def policy_evaluation(mdp: TabularMdp, pi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact action values of a deterministic policy.

    Solves the (S*A)-dimensional linear system q = r + gamma * P_pi q
    directly, applying iterative refinement until the residual is below
    POLICY_EVAL_RESIDUAL (the system is nonsingular for gamma < 1).
    Returns (Q^pi as an (S, A) table, V^pi with V^pi(s) = Q^pi(s, pi(s))).
    """
    pi = np.asarray(pi, dtype=np.int64)
    if pi.shape != (mdp.num_states,):
        raise ValueError(f"policy has shape {pi.shape}, expected {(mdp.num_states,)}")
    if np.any(pi < 0) or np.any(pi >= mdp.num_actions):
        raise ValueError("policy contains out-of-range actions")
    s_count, a_count = mdp.num_states, mdp.num_actions
    n = s_count * a_count
    # Row-major flat index (s, a) -> s * A + a. Column block for next pair
    # (s', pi(s')) receives the transition mass P_a(s, s').
    k = mdp.transitions.transpose(1, 0, 2).reshape(n, s_count)
    p_pi = np.zeros((n, n))
    p_pi[:, np.arange(s_count) * a_count + pi] = k
    system = np.eye(n) - mdp.gamma * p_pi
    r_flat = mdp.rewards.reshape(n)
    q_flat = np.linalg.solve(system, r_flat)
    for _ in range(3):
        residual = r_flat - system @ q_flat
        if float(np.max(np.abs(residual))) <= POLICY_EVAL_RESIDUAL:
            break
        q_flat = q_flat + np.linalg.solve(system, residual)
    q = q_flat.reshape(s_count, a_count)
    v = q[np.arange(s_count), pi]
    return q, v


@dataclass(frozen=True)
class MatrixForms:
    """Dense matrix representation of the operator, in action-major layout:
    flat index (s, a) -> a * S + s, so block a holds the column q(:, a).

    Assembling r + gamma * p @ (pi_mat @ q_flat) with pi the greedy policy
    of q reproduces apply_bellman. This is a verification surface, not the
    runtime path.
    """

    p: np.ndarray  # (S*A, S): vertical stack of the per-action kernels
    r: np.ndarray  # (S*A,)
    d_diag: np.ndarray  # (S*A, S*A) diagonal of sampling probabilities
    pi_mat: np.ndarray  # (S, S*A): row s selects the pair (s, pi(s))


def flatten_action_major(table: np.ndarray) -> np.ndarray:
    """(S, A) table -> length S*A vector stacking columns (action blocks)."""
    return np.asarray(table).flatten(order="F")


def unflatten_action_major(vec: np.ndarray, num_states: int, num_actions: int) -> np.ndarray:
    return np.asarray(vec).reshape((num_states, num_actions), order="F")


def matrix_forms(
    mdp: TabularMdp,
    d: SamplingDistribution,
    pi: np.ndarray,
) -> MatrixForms:
    """Assemble the dense operator pieces for a fixed deterministic policy."""
    pi = np.asarray(pi, dtype=np.int64)
    if pi.shape != (mdp.num_states,):
        raise ValueError(f"policy has shape {pi.shape}, expected {(mdp.num_states,)}")
    if d.probs.shape != mdp.rewards.shape:
        raise ValueError("distribution shape does not match the model")
    s_count = mdp.num_states
    p = mdp.transitions.reshape(s_count * mdp.num_actions, s_count)
    r = flatten_action_major(mdp.rewards)
    d_diag = np.diag(flatten_action_major(d.probs))
    pi_mat = np.zeros((s_count, s_count * mdp.num_actions))
    pi_mat[np.arange(s_count), pi * s_count + np.arange(s_count)] = 1.0
    return MatrixForms(p=p, r=r, d_diag=d_diag, pi_mat=pi_mat)
