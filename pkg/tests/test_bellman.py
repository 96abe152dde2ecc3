import itertools

import numpy as np
import pytest

from pqlearn import (
    apply_bellman,
    flatten_action_major,
    greedy_policy,
    make_distribution,
    matrix_forms,
    policy_evaluation,
    q_bound,
    random_mdp,
    unflatten_action_major,
    uniform_distribution,
    value_iteration,
)
from conftest import zero_gamma_mdp


def brute_force_v_star(mdp):
    """Independent oracle: enumerate every deterministic policy and solve
    its S-dimensional evaluation system directly."""
    s_count, a_count = mdp.num_states, mdp.num_actions
    best = np.full(s_count, -np.inf)
    for actions in itertools.product(range(a_count), repeat=s_count):
        pi = np.array(actions)
        p_pi = mdp.transitions[pi, np.arange(s_count), :]
        r_pi = mdp.rewards[np.arange(s_count), pi]
        v = np.linalg.solve(np.eye(s_count) - mdp.gamma * p_pi, r_pi)
        best = np.maximum(best, v)
    return best


class TestApplyBellman:
    def test_zero_gamma_returns_rewards_exactly(self):
        mdp = zero_gamma_mdp()
        q = np.random.default_rng(0).normal(size=(3, 2))
        assert np.array_equal(apply_bellman(q, mdp), mdp.rewards)

    def test_chain_hand_evaluation(self, chain_mdp):
        # q = 0: out(s, a) = 1 + 0.5 * 0 = 1 at every cell
        out = apply_bellman(np.zeros((2, 1)), chain_mdp)
        assert np.array_equal(out, np.ones((2, 1)))
        # q = 1 everywhere: out = 1 + 0.5 * 1 = 1.5
        out = apply_bellman(np.ones((2, 1)), chain_mdp)
        assert np.array_equal(out, np.full((2, 1), 1.5))

    def test_fixed_point_of_oracle(self):
        mdp = random_mdp(13, 6, 3, 0.9, 3)
        q_star = value_iteration(mdp, tol=1e-10)
        assert np.max(np.abs(apply_bellman(q_star, mdp) - q_star)) <= 1e-10

    def test_shape_mismatch(self, chain_mdp):
        with pytest.raises(ValueError, match="shape"):
            apply_bellman(np.zeros((3, 1)), chain_mdp)

    @pytest.mark.parametrize("seed", range(5))
    def test_contraction_on_random_pairs(self, seed):
        mdp = random_mdp(seed, 5, 3, 0.9, 3)
        rng = np.random.default_rng(seed + 100)
        for _ in range(200):
            q1 = rng.uniform(-10, 10, size=(5, 3))
            q2 = rng.uniform(-10, 10, size=(5, 3))
            lhs = np.max(np.abs(apply_bellman(q1, mdp) - apply_bellman(q2, mdp)))
            rhs = mdp.gamma * np.max(np.abs(q1 - q2))
            assert lhs <= rhs + 1e-12


class TestGreedyPolicy:
    def test_all_equal_row_breaks_to_zero(self):
        assert greedy_policy(np.zeros((3, 4))).tolist() == [0, 0, 0]

    def test_unique_max(self):
        assert greedy_policy(np.array([[0.1, 0.9, 0.3]])).tolist() == [1]

    def test_matches_brute_force_optimum(self):
        for seed in range(10):
            mdp = random_mdp(seed, 2, 3, 0.8, 2)
            q_star = value_iteration(mdp, tol=1e-12)
            pi = greedy_policy(q_star)
            _, v_pi = policy_evaluation(mdp, pi)
            assert np.max(np.abs(v_pi - brute_force_v_star(mdp))) <= 1e-8


class TestValueIteration:
    def test_zero_gamma_one_sweep(self):
        mdp = zero_gamma_mdp(seed=4)
        assert np.array_equal(value_iteration(mdp), mdp.rewards)

    def test_single_cell_geometric_series(self, single_cell_mdp):
        mdp = single_cell_mdp
        mdp = type(mdp)(1, 1, mdp.transitions, mdp.rewards, 0.9)
        q = value_iteration(mdp, tol=1e-10)
        assert q[0, 0] == pytest.approx(10.0, abs=1e-10)

    def test_residual_postcondition(self):
        for seed in range(5):
            mdp = random_mdp(seed, 6, 4, 0.95, 3)
            tol = 1e-10
            q = value_iteration(mdp, tol=tol)
            assert np.max(np.abs(apply_bellman(q, mdp) - q)) <= tol

    def test_monotone_residual_along_iteration(self):
        mdp = random_mdp(2, 5, 3, 0.9, 3)
        q = np.zeros((5, 3))
        prev = None
        for _ in range(30):
            tq = apply_bellman(q, mdp)
            resid = np.max(np.abs(tq - q))
            if prev is not None:
                assert resid <= mdp.gamma * prev + 1e-15
            prev = resid
            q = tq

    def test_optimal_table_bounded(self):
        for seed, gamma in [(0, 0.5), (1, 0.9), (2, 0.99)]:
            mdp = random_mdp(seed, 5, 3, gamma, 3)
            q_star = value_iteration(mdp)
            assert np.max(np.abs(q_star)) <= q_bound(gamma)

    def test_bad_tol(self, chain_mdp):
        with pytest.raises(ValueError, match="tol"):
            value_iteration(chain_mdp, tol=0.0)


class TestPolicyEvaluation:
    def test_zero_gamma_gives_rewards(self):
        mdp = zero_gamma_mdp(seed=9)
        q, v = policy_evaluation(mdp, np.zeros(3, dtype=int))
        assert np.allclose(q, mdp.rewards, atol=1e-14)
        assert np.allclose(v, mdp.rewards[:, 0], atol=1e-14)

    def test_chain_constant_value(self, chain_mdp):
        q, v = policy_evaluation(chain_mdp, np.zeros(2, dtype=int))
        assert np.allclose(q, 2.0, atol=1e-12)
        assert np.allclose(v, 2.0, atol=1e-12)

    def test_greedy_of_oracle_recovers_optimal_values(self):
        tol = 1e-10
        for seed in range(8):
            mdp = random_mdp(seed, 7, 3, 0.9, 3)
            q_star = value_iteration(mdp, tol=tol)
            _, v_pi = policy_evaluation(mdp, greedy_policy(q_star))
            v_star = q_star.max(axis=1)
            assert np.max(np.abs(v_pi - v_star)) <= 10 * tol

    def test_residual_contract(self):
        mdp = random_mdp(17, 8, 4, 0.99, 4)
        pi = np.random.default_rng(0).integers(0, 4, size=8)
        q, _ = policy_evaluation(mdp, pi)
        k = mdp.transitions.transpose(1, 0, 2).reshape(32, 8)
        p_pi = np.zeros((32, 32))
        p_pi[:, np.arange(8) * 4 + pi] = k
        resid = mdp.rewards.reshape(-1) - (np.eye(32) - mdp.gamma * p_pi) @ q.reshape(-1)
        assert np.max(np.abs(resid)) <= 1e-10

    def test_invalid_policy(self, chain_mdp):
        with pytest.raises(ValueError, match="out-of-range"):
            policy_evaluation(chain_mdp, np.array([0, 5]))
        with pytest.raises(ValueError, match="shape"):
            policy_evaluation(chain_mdp, np.array([0]))


class TestMatrixForms:
    def test_policy_rows_one_hot(self):
        mdp = random_mdp(3, 4, 3, 0.9, 2)
        d = uniform_distribution(4, 3)
        pi = np.array([2, 0, 1, 1])
        forms = matrix_forms(mdp, d, pi)
        assert np.array_equal(forms.pi_mat.sum(axis=1), np.ones(4))
        assert set(np.unique(forms.pi_mat)) <= {0.0, 1.0}
        for s in range(4):
            assert forms.pi_mat[s, pi[s] * 4 + s] == 1.0

    def test_policy_transition_row_stochastic(self):
        mdp = random_mdp(5, 4, 3, 0.9, 3)
        d = uniform_distribution(4, 3)
        pi = np.array([0, 2, 1, 0])
        forms = matrix_forms(mdp, d, pi)
        p_pi = forms.p @ forms.pi_mat
        assert p_pi.shape == (12, 12)
        assert np.allclose(p_pi.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(p_pi >= 0)

    def test_assembly_reproduces_operator(self):
        mdp = random_mdp(21, 3, 2, 0.85, 3)
        d = make_distribution(
            np.random.default_rng(1).dirichlet(np.ones(6)).reshape(3, 2)
        )
        q = np.random.default_rng(2).uniform(-5, 5, size=(3, 2))
        pi = greedy_policy(q)
        forms = matrix_forms(mdp, d, pi)
        q_flat = flatten_action_major(q)
        assembled = forms.r + mdp.gamma * (forms.p @ (forms.pi_mat @ q_flat))
        direct = apply_bellman(q, mdp)
        assert np.max(np.abs(unflatten_action_major(assembled, 3, 2) - direct)) <= 1e-12

    def test_d_diagonal_layout(self):
        mdp = random_mdp(4, 3, 2, 0.9, 2)
        d = make_distribution(
            np.random.default_rng(5).dirichlet(np.ones(6)).reshape(3, 2)
        )
        forms = matrix_forms(mdp, d, np.zeros(3, dtype=int))
        assert np.array_equal(np.diag(forms.d_diag), flatten_action_major(d.probs))

    def test_flatten_round_trip(self):
        table = np.arange(12, dtype=float).reshape(4, 3)
        flat = flatten_action_major(table)
        # action-major: block a holds column a
        assert np.array_equal(flat[:4], table[:, 0])
        assert np.array_equal(unflatten_action_major(flat, 4, 3), table)


class TestOracleCrossChecks:
    def test_value_iteration_vs_policy_evaluation(self):
        # all desk-scale shapes with |S| * |A| <= 50
        for seed, (s_count, a_count) in enumerate([(5, 3), (10, 5), (8, 4), (25, 2)]):
            mdp = random_mdp(seed, s_count, a_count, 0.9, max(1, s_count // 2))
            q_star = value_iteration(mdp, tol=1e-10)
            _, v_pi = policy_evaluation(mdp, greedy_policy(q_star))
            assert np.max(np.abs(v_pi - q_star.max(axis=1))) <= 2e-10

    def test_brute_force_policy_enumeration(self):
        # |A|^|S| <= 256 keeps full enumeration exact and fast
        cases = [(4, 4, 0.9), (8, 2, 0.8), (5, 3, 0.95), (2, 4, 0.99)]
        for seed, (s_count, a_count, gamma) in enumerate(cases):
            mdp = random_mdp(seed + 50, s_count, a_count, gamma, max(1, s_count // 2))
            q_star = value_iteration(mdp, tol=1e-10)
            v_star = q_star.max(axis=1)
            assert np.max(np.abs(v_star - brute_force_v_star(mdp))) <= 1e-8
