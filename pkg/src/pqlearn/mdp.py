"""Tabular discounted MDPs and fixed state-action sampling distributions.

A model is the tuple (S, A, P, r, gamma) with a dense transition tensor
P[a, s, s'], a reward matrix r[s, a] bounded in [-1, 1], and a discount
factor gamma in (0, 1). Rewards are deterministic functions of (s, a).
Samples are drawn i.i.d. from a fixed state-action distribution d[s, a]
that must be strictly positive everywhere.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Row-stochasticity tolerance. Generators normalize by exact division, so
# double-precision row sums of a few hundred terms stay well inside this.
STOCHASTIC_TOL = 1e-12

# Looser tolerance for user-supplied distributions; entries are renormalized
# by exact division after the check passes.
DISTRIBUTION_SUM_TOL = 1e-9


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=np.float64)
    if out is arr:
        out = arr.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TabularMdp:
    """Dense tabular model. Construction checks shapes only; semantic
    invariants (stochastic rows, reward bounds, gamma range) are reported
    by :func:`validate_mdp` so malformed instances can be inspected."""

    num_states: int
    num_actions: int
    transitions: np.ndarray  # (A, S, S), entry [a, s, s'] = P_a(s, s')
    rewards: np.ndarray  # (S, A)
    gamma: float

    def __post_init__(self):
        if self.num_states < 1 or self.num_actions < 1:
            raise ValueError("num_states and num_actions must be positive")
        t = np.asarray(self.transitions, dtype=np.float64)
        r = np.asarray(self.rewards, dtype=np.float64)
        expected_t = (self.num_actions, self.num_states, self.num_states)
        if t.shape != expected_t:
            raise ValueError(f"transitions has shape {t.shape}, expected {expected_t}")
        expected_r = (self.num_states, self.num_actions)
        if r.shape != expected_r:
            raise ValueError(f"rewards has shape {r.shape}, expected {expected_r}")
        object.__setattr__(self, "transitions", _readonly(t))
        object.__setattr__(self, "rewards", _readonly(r))
        object.__setattr__(self, "gamma", float(self.gamma))


@dataclass(frozen=True)
class SamplingDistribution:
    """Fixed state-action sampling distribution d[s, a] with its extreme
    probabilities: c_min = min d and l_max = max d. These are the strong
    convexity and smoothness constants of the mean-squared Bellman
    subproblem, so they drive the step-size schedule and sample bounds."""

    probs: np.ndarray  # (S, A), strictly positive, sums to 1
    c_min: float
    l_max: float

    def __post_init__(self):
        object.__setattr__(self, "probs", _readonly(np.asarray(self.probs)))


@dataclass(frozen=True)
class MdpViolation:
    """First failed invariant, with enough indices to locate it."""

    kind: str  # "gamma_range" | "negative_transition" | "row_sum" | "reward_bound"
    where: tuple
    detail: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.where}: {self.detail}"


def validate_mdp(mdp: TabularMdp) -> MdpViolation | None:
    """Check all model invariants; return the first violation or None.

    Checks, in order: gamma in (0, 1); transition entries nonnegative;
    every transition row sums to 1 within STOCHASTIC_TOL; every reward
    in [-1, 1].
    """
    if not (0.0 < mdp.gamma < 1.0):
        return MdpViolation("gamma_range", (), f"gamma={mdp.gamma!r} outside (0, 1)")
    neg = np.argwhere(mdp.transitions < 0.0)
    if neg.size:
        a, s, s2 = (int(i) for i in neg[0])
        return MdpViolation(
            "negative_transition", (a, s, s2),
            f"P_{a}({s},{s2})={float(mdp.transitions[a, s, s2])!r} < 0",
        )
    row_sums = mdp.transitions.sum(axis=2)
    bad = np.argwhere(np.abs(row_sums - 1.0) > STOCHASTIC_TOL)
    if bad.size:
        a, s = (int(i) for i in bad[0])
        return MdpViolation(
            "row_sum", (a, s),
            f"row sum {float(row_sums[a, s])!r} differs from 1 by more than {STOCHASTIC_TOL}",
        )
    out = np.argwhere(np.abs(mdp.rewards) > 1.0)
    if out.size:
        s, a = (int(i) for i in out[0])
        return MdpViolation(
            "reward_bound", (s, a),
            f"r({s},{a})={float(mdp.rewards[s, a])!r} outside [-1, 1]",
        )
    return None


def random_mdp(
    seed: int,
    num_states: int,
    num_actions: int,
    gamma: float,
    branching: int,
) -> TabularMdp:
    """Random instance in the Garnet style: every transition row has
    exactly `branching` reachable next states with Dirichlet(1) weights,
    and rewards are uniform on [-1, 1].

    The same seed always yields a bit-identical model. Two child PCG64
    streams are derived from the seed (structure first, rewards second)
    so structural and reward draws never interleave.
    """
    if num_states < 1 or num_actions < 1:
        raise ValueError("num_states and num_actions must be positive")
    if not (0.0 < gamma < 1.0):
        raise ValueError(f"gamma={gamma!r} outside (0, 1)")
    if not (1 <= branching <= num_states):
        raise ValueError(f"branching={branching} not in [1, {num_states}]")
    struct_ss, reward_ss = np.random.SeedSequence(seed).spawn(2)
    rng_struct = np.random.Generator(np.random.PCG64(struct_ss))
    rng_reward = np.random.Generator(np.random.PCG64(reward_ss))

    transitions = np.zeros((num_actions, num_states, num_states))
    for a in range(num_actions):
        for s in range(num_states):
            support = rng_struct.choice(num_states, size=branching, replace=False)
            transitions[a, s, support] = rng_struct.dirichlet(np.ones(branching))
    rewards = rng_reward.uniform(-1.0, 1.0, size=(num_states, num_actions))
    mdp = TabularMdp(num_states, num_actions, transitions, rewards, gamma)
    violation = validate_mdp(mdp)
    if violation is not None:  # generator bug, not user error
        raise AssertionError(f"random_mdp produced an invalid model: {violation}")
    return mdp


def make_distribution(probs: np.ndarray) -> SamplingDistribution:
    """Build a SamplingDistribution from an (S, A) matrix of probabilities.

    Entries must be strictly positive and sum to 1 within
    DISTRIBUTION_SUM_TOL; after the check they are renormalized by exact
    division so downstream cumulative sums are clean.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError(f"distribution must be a 2-D matrix, got shape {p.shape}")
    if np.any(p <= 0.0):
        s, a = (int(i) for i in np.argwhere(p <= 0.0)[0])
        raise ValueError(f"distribution entry d({s},{a})={float(p[s, a])!r} is not strictly positive")
    total = p.sum()
    if abs(total - 1.0) > DISTRIBUTION_SUM_TOL:
        raise ValueError(f"distribution entries sum to {float(total)!r}, expected 1")
    if total != 1.0:
        p = p / total
    return SamplingDistribution(probs=p, c_min=float(p.min()), l_max=float(p.max()))


def uniform_distribution(num_states: int, num_actions: int) -> SamplingDistribution:
    """Uniform d(s,a) = 1/(S*A); the case where c_min = l_max, constructed
    directly so the extreme probabilities are exactly 1/(S*A)."""
    p = 1.0 / (num_states * num_actions)
    probs = np.full((num_states, num_actions), p)
    return SamplingDistribution(probs=probs, c_min=p, l_max=p)


# ---------------------------------------------------------------------------
# File format: a single JSON document. Required keys: num_states,
# num_actions, gamma, transitions [a][s][s'], rewards [s][a]. Optional key:
# distribution [s][a]. Unknown keys are rejected. Floats round-trip exactly
# because json serializes them via repr.
# ---------------------------------------------------------------------------

_MDP_KEYS = {"num_states", "num_actions", "gamma", "transitions", "rewards", "distribution"}


def mdp_to_dict(mdp: TabularMdp, distribution: SamplingDistribution | None = None) -> dict:
    doc = {
        "num_states": mdp.num_states,
        "num_actions": mdp.num_actions,
        "gamma": mdp.gamma,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
    }
    if distribution is not None:
        doc["distribution"] = distribution.probs.tolist()
    return doc


def mdp_from_dict(doc: dict) -> tuple[TabularMdp, SamplingDistribution | None]:
    """Parse and fully validate an MDP document. Raises ValueError with the
    offending key or the violated invariant."""
    if not isinstance(doc, dict):
        raise ValueError("MDP document must be a JSON object")
    unknown = set(doc) - _MDP_KEYS
    if unknown:
        raise ValueError(f"unknown MDP field(s): {sorted(unknown)}")
    missing = (_MDP_KEYS - {"distribution"}) - set(doc)
    if missing:
        raise ValueError(f"missing MDP field(s): {sorted(missing)}")
    try:
        mdp = TabularMdp(
            num_states=int(doc["num_states"]),
            num_actions=int(doc["num_actions"]),
            transitions=np.asarray(doc["transitions"], dtype=np.float64),
            rewards=np.asarray(doc["rewards"], dtype=np.float64),
            gamma=float(doc["gamma"]),
        )
    except (TypeError, ValueError) as exc:
        raise ValueError(f"malformed MDP document: {exc}") from exc
    violation = validate_mdp(mdp)
    if violation is not None:
        raise ValueError(str(violation))
    dist = None
    if "distribution" in doc:
        d = np.asarray(doc["distribution"], dtype=np.float64)
        if d.shape != (mdp.num_states, mdp.num_actions):
            raise ValueError(
                f"distribution has shape {d.shape}, expected {(mdp.num_states, mdp.num_actions)}"
            )
        dist = make_distribution(d)
    return mdp, dist


def save_mdp_file(
    path: str | Path,
    mdp: TabularMdp,
    distribution: SamplingDistribution | None = None,
) -> None:
    Path(path).write_text(json.dumps(mdp_to_dict(mdp, distribution), indent=2) + "\n")


def load_mdp_file(path: str | Path) -> tuple[TabularMdp, SamplingDistribution | None]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc})") from exc
    return mdp_from_dict(doc)
