import json

import numpy as np
import pytest

from pqlearn import (
    TabularMdp,
    load_mdp_file,
    make_distribution,
    mdp_from_dict,
    mdp_to_dict,
    random_mdp,
    save_mdp_file,
    uniform_distribution,
    validate_mdp,
)


def identity_mdp(gamma=0.9, num_states=3, num_actions=2):
    transitions = np.stack([np.eye(num_states)] * num_actions)
    rewards = np.zeros((num_states, num_actions))
    return TabularMdp(num_states, num_actions, transitions, rewards, gamma)


class TestValidateMdp:
    def test_identity_self_loops_valid(self):
        assert validate_mdp(identity_mdp()) is None

    def test_row_sum_violation(self):
        mdp = identity_mdp()
        transitions = mdp.transitions.copy()
        transitions[1, 2, 2] = 0.99
        bad = TabularMdp(3, 2, transitions, mdp.rewards, 0.9)
        violation = validate_mdp(bad)
        assert violation is not None
        assert violation.kind == "row_sum"
        assert violation.where == (1, 2)
        assert "0.99" in violation.detail

    def test_reward_bound_violation(self):
        mdp = identity_mdp()
        rewards = mdp.rewards.copy()
        rewards[0, 1] = 1.5
        bad = TabularMdp(3, 2, mdp.transitions, rewards, 0.9)
        violation = validate_mdp(bad)
        assert violation.kind == "reward_bound"
        assert violation.where == (0, 1)

    def test_negative_transition_violation(self):
        mdp = identity_mdp()
        transitions = mdp.transitions.copy()
        transitions[0, 0, 0] = -0.5
        transitions[0, 0, 1] = 1.5
        bad = TabularMdp(3, 2, transitions, mdp.rewards, 0.9)
        assert validate_mdp(bad).kind == "negative_transition"

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.2, 1.5])
    def test_gamma_range_violation(self, gamma):
        mdp = identity_mdp()
        bad = TabularMdp(3, 2, mdp.transitions, mdp.rewards, gamma)
        assert validate_mdp(bad).kind == "gamma_range"

    def test_shape_errors_raise_at_construction(self):
        with pytest.raises(ValueError, match="transitions"):
            TabularMdp(3, 2, np.zeros((3, 3, 3)), np.zeros((3, 2)), 0.9)
        with pytest.raises(ValueError, match="rewards"):
            TabularMdp(3, 2, np.stack([np.eye(3)] * 2), np.zeros((2, 3)), 0.9)


class TestRandomMdp:
    def test_same_seed_bit_identical(self):
        a = random_mdp(7, 5, 3, 0.9, 2)
        b = random_mdp(7, 5, 3, 0.9, 2)
        assert np.array_equal(a.transitions, b.transitions)
        assert np.array_equal(a.rewards, b.rewards)

    def test_different_seeds_differ(self):
        a = random_mdp(7, 5, 3, 0.9, 2)
        b = random_mdp(8, 5, 3, 0.9, 2)
        assert not np.array_equal(a.transitions, b.transitions)
        assert not np.array_equal(a.rewards, b.rewards)

    @pytest.mark.parametrize("seed", range(10))
    def test_output_passes_validation(self, seed):
        mdp = random_mdp(seed, 6, 3, 0.95, 4)
        assert validate_mdp(mdp) is None

    def test_branching_support_size(self):
        mdp = random_mdp(3, 8, 2, 0.9, 3)
        nonzeros = (mdp.transitions > 0).sum(axis=2)
        assert np.all(nonzeros == 3)

    def test_rewards_stay_in_bounds_at_scale(self):
        # one large draw gives 10,000 reward samples in a single instance
        big = random_mdp(11, 100, 100, 0.9, 1)
        assert np.all(np.abs(big.rewards) <= 1.0)
        for seed in range(50):
            small = random_mdp(seed, 4, 3, 0.8, 2)
            assert np.all(np.abs(small.rewards) <= 1.0)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError, match="branching"):
            random_mdp(0, 3, 2, 0.9, 4)
        with pytest.raises(ValueError, match="gamma"):
            random_mdp(0, 3, 2, 1.0, 2)
        with pytest.raises(ValueError, match="positive"):
            random_mdp(0, 0, 2, 0.9, 1)


class TestMakeDistribution:
    def test_uniform_extremes_exact(self):
        d = uniform_distribution(5, 3)
        assert d.c_min == 1 / 15
        assert d.l_max == 1 / 15

    def test_min_max_two_by_two(self):
        d = make_distribution(np.array([[0.4, 0.1], [0.3, 0.2]]))
        assert d.c_min == 0.1
        assert d.l_max == 0.4

    def test_zero_entry_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            make_distribution(np.array([[0.5, 0.0], [0.3, 0.2]]))

    def test_negative_entry_rejected(self):
        with pytest.raises(ValueError, match="strictly positive"):
            make_distribution(np.array([[0.6, -0.1], [0.3, 0.2]]))

    def test_bad_sum_rejected(self):
        with pytest.raises(ValueError, match="sum"):
            make_distribution(np.array([[0.4, 0.1], [0.3, 0.1]]))

    def test_renormalizes_within_tolerance(self):
        probs = np.full((2, 2), 0.25) * (1 + 2e-10)
        d = make_distribution(probs)
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("seed", range(20))
    def test_extremes_bracket_uniform_mass(self, seed):
        rng = np.random.default_rng(seed)
        shape = (rng.integers(1, 7), rng.integers(1, 5))
        probs = rng.dirichlet(np.ones(shape[0] * shape[1])).reshape(shape)
        if np.any(probs <= 0):
            pytest.skip("degenerate draw")
        d = make_distribution(probs)
        n = shape[0] * shape[1]
        assert d.c_min * n <= 1.0 + 1e-12
        assert d.l_max * n >= 1.0 - 1e-12


class TestFileFormat:
    def test_round_trip_bit_identical(self, tmp_path):
        mdp = random_mdp(5, 4, 3, 0.87, 2)
        d = make_distribution(np.random.default_rng(2).dirichlet(np.ones(12)).reshape(4, 3))
        path = tmp_path / "model.json"
        save_mdp_file(path, mdp, d)
        loaded, loaded_d = load_mdp_file(path)
        assert loaded.gamma == mdp.gamma
        assert np.array_equal(loaded.transitions, mdp.transitions)
        assert np.array_equal(loaded.rewards, mdp.rewards)
        # the distribution re-runs exact renormalization on load, which can
        # shift entries by one ulp; the model itself is bit-identical
        assert np.max(np.abs(loaded_d.probs - d.probs)) < 1e-15

    def test_distribution_optional(self, tmp_path):
        mdp = random_mdp(5, 2, 2, 0.5, 2)
        path = tmp_path / "model.json"
        save_mdp_file(path, mdp)
        _, loaded_d = load_mdp_file(path)
        assert loaded_d is None

    def test_unknown_field_rejected(self):
        doc = mdp_to_dict(random_mdp(1, 2, 2, 0.9, 2))
        doc["extra_field"] = 1
        with pytest.raises(ValueError, match="extra_field"):
            mdp_from_dict(doc)

    def test_missing_field_rejected(self):
        doc = mdp_to_dict(random_mdp(1, 2, 2, 0.9, 2))
        del doc["rewards"]
        with pytest.raises(ValueError, match="rewards"):
            mdp_from_dict(doc)

    def test_invalid_model_rejected(self):
        doc = mdp_to_dict(random_mdp(1, 2, 2, 0.9, 2))
        doc["rewards"][0][0] = 2.0
        with pytest.raises(ValueError, match="reward_bound"):
            mdp_from_dict(doc)

    def test_bad_json_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ValueError, match="JSON"):
            load_mdp_file(path)

    def test_distribution_shape_checked(self):
        doc = mdp_to_dict(random_mdp(1, 2, 2, 0.9, 2))
        doc["distribution"] = [[0.5, 0.5]]
        with pytest.raises(ValueError, match="distribution"):
            mdp_from_dict(doc)

    def test_immutable_arrays(self):
        mdp = random_mdp(0, 2, 2, 0.9, 2)
        with pytest.raises(ValueError):
            mdp.transitions[0, 0, 0] = 0.5
