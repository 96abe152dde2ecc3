"""Periodic Q-learning: a double-loop learner that freezes a target table
for N_k stochastic steps, then synchronizes.

Each outer iteration k approximately computes T Q_k by running SGD on the
mean-squared Bellman objective with the frozen target: sample (s, a) ~ d
and s' ~ P_a(s, .), then move the touched cell toward the sampled target

    Q(s, a) <- Q(s, a) + beta_t * (r(s, a) + gamma * max_a' Q_k(s', a') - Q(s, a)),

which is one descent step on the subproblem (the touched-cell TD error is
minus the one-hot stochastic gradient). After N_k steps the target is
replaced by the online table. With N_k = 1 and a globally-indexed step
size this is exactly standard Q-learning, which run_standard_q exposes as
a baseline.

Determinism contract: a run consumes exactly two uniforms per inner step
from one PCG64 stream (first the state-action draw by inverse CDF on the
row-major flattened d, then the next-state draw on P_a(s, .)). Uniforms
are pre-drawn in row-major blocks, which leaves the stream identical to
per-step draws, so identical (config, model, distribution) gives a
bit-identical trace regardless of internal chunking.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bellman import apply_bellman, greedy_policy, q_bound
from .metrics import policy_gap
from .mdp import SamplingDistribution, TabularMdp, validate_mdp

# Pre-drawn sample block budget: keeps the (block, S) next-state CDF matrix
# around 8 MB even for large state spaces.
_BLOCK_CAP = 1 << 16
_BLOCK_BUDGET = 1 << 20


@dataclass(frozen=True)
class StepSizeSchedule:
    """Decaying step size beta_t = beta / (lam + t)."""

    beta: float
    lam: float

    def __post_init__(self):
        if self.beta <= 0.0 or self.lam <= 0.0:
            raise ValueError("schedule parameters beta and lam must be positive")

    def beta_at(self, t: int) -> float:
        return self.beta / (self.lam + t)


def theory_schedule(d: SamplingDistribution) -> StepSizeSchedule:
    """Schedule beta = 2/c, lam = 16 L / c^2 driven by the distribution's
    extreme probabilities; the first step is then beta_0 = c / (8 L)."""
    c, l = d.c_min, d.l_max
    return StepSizeSchedule(beta=2.0 / c, lam=16.0 * l / (c * c))


def schedule_is_compliant(
    schedule: StepSizeSchedule, d: SamplingDistribution, tol: float = 1e-12
) -> bool:
    """True when the initial step beta/lam stays within c/(8L), the range
    the inner-convergence guarantee assumes."""
    return schedule.beta / schedule.lam <= d.c_min / (8.0 * d.l_max) + tol


def _warn_epsilon_compliance(epsilon: float, gamma: float) -> None:
    limit = (1.0 - gamma) ** 2
    if epsilon > limit:
        warnings.warn(
            f"epsilon={epsilon} exceeds (1-gamma)^2={limit}; the iterate-boundedness "
            "precondition behind the budget formulas does not hold at this accuracy",
            stacklevel=3,
        )


def required_inner_steps(
    epsilon: float,
    gamma: float,
    num_states: int,
    num_actions: int,
    c: float,
    l: float,
) -> int:
    """Inner steps per iteration sufficient for expected accuracy epsilon:
    ceil(2048 |S||A| L / (epsilon^2 (1-gamma)^4 c^3))."""
    _check_budget_args(epsilon, gamma, num_states, num_actions, c, l)
    _warn_epsilon_compliance(epsilon, gamma)
    value = (
        2048.0 * num_states * num_actions * l
        / (epsilon**2 * (1.0 - gamma) ** 4 * c**3)
    )
    return math.ceil(value)


def required_outer_iters(epsilon: float, gamma: float) -> int:
    """Outer iterations sufficient to shrink the contraction term:
    ceil(ln(4 / ((1-gamma) epsilon)) / ln(1/gamma)), or 0 when epsilon is
    already at least 4/(1-gamma)."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must be in (0, 1)")
    if epsilon >= 4.0 / (1.0 - gamma):
        return 0
    return math.ceil(math.log(4.0 / ((1.0 - gamma) * epsilon)) / math.log(1.0 / gamma))


def sample_complexity_q(
    epsilon: float,
    gamma: float,
    num_states: int,
    num_actions: int,
    c: float,
    l: float,
) -> float:
    """Total samples sufficient for E||Q_T - Q*||_inf <= epsilon: the exact
    (un-ceiled) product of the inner and outer budgets."""
    _check_budget_args(epsilon, gamma, num_states, num_actions, c, l)
    _warn_epsilon_compliance(epsilon, gamma)
    n_exact = (
        2048.0 * num_states * num_actions * l
        / (epsilon**2 * (1.0 - gamma) ** 4 * c**3)
    )
    t_exact = math.log(4.0 / ((1.0 - gamma) * epsilon)) / math.log(1.0 / gamma)
    return n_exact * max(t_exact, 0.0)


def sample_complexity_policy(
    epsilon: float,
    gamma: float,
    num_states: int,
    num_actions: int,
    c: float,
    l: float,
) -> float:
    """Total samples sufficient for an epsilon-optimal greedy policy
    (E||V^pi - V*||_inf <= epsilon, epsilon <= 1): running the learner to
    Q-accuracy epsilon (1-gamma)/2 and transferring through the greedy
    policy costs 8192 |S||A| L ln(8/((1-gamma)^2 epsilon)) /
    (epsilon^2 (1-gamma)^6 c^3 ln(1/gamma))."""
    _check_budget_args(epsilon, gamma, num_states, num_actions, c, l)
    if epsilon > 1.0:
        raise ValueError("the policy budget is stated for epsilon <= 1")
    return (
        8192.0 * num_states * num_actions * l
        / (epsilon**2 * (1.0 - gamma) ** 6 * c**3 * math.log(1.0 / gamma))
        * math.log(8.0 / ((1.0 - gamma) ** 2 * epsilon))
    )


def _check_budget_args(epsilon, gamma, num_states, num_actions, c, l) -> None:
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    if not (0.0 < gamma < 1.0):
        raise ValueError("gamma must be in (0, 1)")
    if num_states < 1 or num_actions < 1:
        raise ValueError("num_states and num_actions must be positive")
    if not (0.0 < c <= l):
        raise ValueError("need 0 < c <= l")


def bounds_report(
    epsilon: float,
    gamma: float,
    num_states: int,
    num_actions: int,
    c: float | None = None,
    l: float | None = None,
) -> dict:
    """All budget formulas for one parameter set, as a plain dict.

    c and l default to the uniform distribution's 1/(S*A). The policy
    budget entry is None when epsilon > 1 (it is only stated below that
    accuracy).
    """
    uniform = 1.0 / (num_states * num_actions)
    c = uniform if c is None else float(c)
    l = uniform if l is None else float(l)
    inner = required_inner_steps(epsilon, gamma, num_states, num_actions, c, l)
    outer = required_outer_iters(epsilon, gamma)
    samples_q = sample_complexity_q(epsilon, gamma, num_states, num_actions, c, l)
    samples_policy = (
        sample_complexity_policy(epsilon, gamma, num_states, num_actions, c, l)
        if epsilon <= 1.0
        else None
    )
    return {
        "epsilon": epsilon,
        "gamma": gamma,
        "num_states": num_states,
        "num_actions": num_actions,
        "c": c,
        "l": l,
        "inner_steps": inner,
        "outer_iters": outer,
        "samples_for_q_accuracy": samples_q,
        "samples_for_policy_accuracy": samples_policy,
        "schedule": {"beta": 2.0 / c, "lambda": 16.0 * l / (c * c)},
    }


@dataclass
class PqConfig:
    """Run configuration for the double loop.

    inner_steps is either one N broadcast over all iterations or a
    per-iteration sequence of length outer_iters. step_index picks whether
    beta_t restarts at every synchronization ("per_iteration", the mode
    the inner-convergence analysis assumes) or keeps counting across the
    whole run ("global", the standard Q-learning convention).
    """

    outer_iters: int
    inner_steps: int | Sequence[int]
    schedule: StepSizeSchedule
    init_q: str | float | np.ndarray = "zeros"
    seed: int = 0
    eval_every: int = 1000
    step_index: str = "per_iteration"
    record_outer_stats: bool = True
    record_v_gap: bool = False

    def inner_schedule(self) -> list[int]:
        if isinstance(self.inner_steps, (int, np.integer)):
            steps = [int(self.inner_steps)] * self.outer_iters
        else:
            steps = [int(n) for n in self.inner_steps]
        if len(steps) != self.outer_iters:
            raise ValueError(
                f"inner_steps has length {len(steps)}, expected outer_iters={self.outer_iters}"
            )
        if any(n < 1 for n in steps):
            raise ValueError("every inner step count must be a positive integer")
        return steps

    def validate(self) -> None:
        if self.outer_iters < 1:
            raise ValueError("outer_iters must be a positive integer")
        self.inner_schedule()
        if self.eval_every < 1:
            raise ValueError("eval_every must be a positive integer")
        if self.step_index not in ("per_iteration", "global"):
            raise ValueError(f"unknown step_index {self.step_index!r}")
        if int(self.seed) < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class TraceRecord:
    """Metrics snapshot at one sample count. Oracle-relative fields are
    None when no reference table was supplied. v_gap costs a linear solve,
    so it is recorded only on request, plus always on the final checkpoint
    when an oracle is available."""

    samples_used: int
    outer_k: int
    inner_t: int
    q_inf_error: float | None
    q_l2_sq_error: float | None
    d_norm_sq_error: float | None
    loss: float
    v_gap: float | None


@dataclass
class RunTrace:
    """Outcome of one seeded run: checkpoint records on the sample-count
    grid {0, eval_every, 2*eval_every, ..., total}, the final table and
    its greedy policy, and (when outer stats were recorded) the
    per-synchronization residuals epsilon_k = ||Q_{k+1} - T Q_k||_2^2 and
    the oracle errors ||Q_k - Q*||_inf."""

    records: list[TraceRecord]
    final_q: np.ndarray
    final_policy: np.ndarray
    samples_total: int
    seed: int
    outer_q_inf_error: list[float] | None = None
    epsilon_by_outer: list[float] | None = None


def _init_table(init_q, mdp: TabularMdp) -> np.ndarray:
    bound = q_bound(mdp.gamma)
    if isinstance(init_q, str):
        if init_q != "zeros":
            raise ValueError(f"unknown init_q keyword {init_q!r}")
        q = np.zeros_like(mdp.rewards)
    elif np.isscalar(init_q):
        q = np.full_like(mdp.rewards, float(init_q))
    else:
        q = np.array(init_q, dtype=np.float64)
        if q.shape != mdp.rewards.shape:
            raise ValueError(f"init table has shape {q.shape}, expected {mdp.rewards.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError("init entries must be finite")
    if q.size and float(np.max(np.abs(q))) > bound + 1e-12:
        raise ValueError(f"init entries must stay within 1/(1-gamma) = {bound}")
    return q


def _prepare_sampling(mdp: TabularMdp, d: SamplingDistribution):
    """Cumulative inverse-CDF tables over the row-major (s, a) flattening.
    Final cumulative entries are pinned to exactly 1.0 (rows are stochastic
    to 1e-12) so a uniform draw in [0, 1) can never index out of range."""
    cum_d = np.cumsum(d.probs.reshape(-1))
    cum_d[-1] = 1.0
    n = mdp.num_states * mdp.num_actions
    cum_p = np.cumsum(mdp.transitions.transpose(1, 0, 2).reshape(n, mdp.num_states), axis=1)
    cum_p[:, -1] = 1.0
    r_flat = mdp.rewards.reshape(-1).copy()
    return cum_d, cum_p, r_flat


def _draw_block(rng, cum_d, cum_p, n: int):
    """n inner-step draws: flat (s, a) indices and next states."""
    u = rng.random((n, 2))
    f = np.searchsorted(cum_d, u[:, 0], side="right")
    s_next = (cum_p[f] <= u[:, 1:2]).sum(axis=1)
    return f, s_next


def _make_record(
    samples: int,
    outer_k: int,
    inner_t: int,
    q_arr: np.ndarray,
    tq_target: np.ndarray,
    mdp: TabularMdp,
    d: SamplingDistribution,
    q_star: np.ndarray | None,
    record_v_gap: bool,
) -> TraceRecord:
    diff_target = tq_target - q_arr
    loss_val = 0.5 * float(np.sum(d.probs * diff_target * diff_target))
    q_inf = q_l2_sq = d_sq = v_gap = None
    if q_star is not None:
        diff = q_arr - q_star
        sq = diff * diff
        q_inf = float(np.max(np.abs(diff)))
        q_l2_sq = float(np.sum(sq))
        d_sq = float(np.sum(d.probs * sq))
        if record_v_gap:
            v_gap = policy_gap(mdp, q_arr, q_star)
    return TraceRecord(
        samples_used=samples,
        outer_k=outer_k,
        inner_t=inner_t,
        q_inf_error=q_inf,
        q_l2_sq_error=q_l2_sq,
        d_norm_sq_error=d_sq,
        loss=loss_val,
        v_gap=v_gap,
    )


def _check_run_inputs(mdp: TabularMdp, d: SamplingDistribution) -> None:
    violation = validate_mdp(mdp)
    if violation is not None:
        raise ValueError(f"invalid model: {violation}")
    if d.probs.shape != mdp.rewards.shape:
        raise ValueError(
            f"distribution shape {d.probs.shape} does not match model {mdp.rewards.shape}"
        )


def run_pq(
    mdp: TabularMdp,
    d: SamplingDistribution,
    cfg: PqConfig,
    q_star: np.ndarray | None = None,
) -> RunTrace:
    """Execute the double loop and return its trace.

    When q_star is supplied, checkpoint records carry oracle errors and,
    with record_outer_stats, the per-synchronization error sequence. The
    run is bit-reproducible from (mdp, d, cfg).
    """
    _check_run_inputs(mdp, d)
    cfg.validate()
    inner = cfg.inner_schedule()
    total = sum(inner)
    gamma = mdp.gamma
    s_count, a_count = mdp.num_states, mdp.num_actions
    block_cap = min(_BLOCK_CAP, max(256, _BLOCK_BUDGET // s_count))
    cum_d, cum_p, r_flat = _prepare_sampling(mdp, d)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(cfg.seed))))
    schedule = cfg.schedule
    per_iteration = cfg.step_index == "per_iteration"

    q_list = _init_table(cfg.init_q, mdp).reshape(-1).tolist()
    records: list[TraceRecord] = []
    epsilon_by_outer: list[float] | None = [] if cfg.record_outer_stats else None
    outer_q_inf: list[float] | None = (
        [] if (cfg.record_outer_stats and q_star is not None) else None
    )

    samples = 0
    next_record = cfg.eval_every
    last_emitted = -1
    tq_target = None
    for k in range(cfg.outer_iters):
        q_arr = np.array(q_list).reshape(s_count, a_count)  # Q_k snapshot
        m = q_arr.max(axis=1)
        tq_target = apply_bellman(q_arr, mdp)
        if k == 0:
            records.append(
                _make_record(0, 0, 0, q_arr, tq_target, mdp, d, q_star, cfg.record_v_gap)
            )
            last_emitted = 0
        if outer_q_inf is not None:
            outer_q_inf.append(float(np.max(np.abs(q_arr - q_star))))
        n_k = inner[k]
        t_inner = 0
        while t_inner < n_k:
            n = min(n_k - t_inner, block_cap)
            if samples < next_record:
                n = min(n, next_record - samples)
            f, s_next = _draw_block(rng, cum_d, cum_p, n)
            y = r_flat[f] + gamma * m[s_next]
            base = t_inner if per_iteration else samples
            b = schedule.beta / (schedule.lam + np.arange(base, base + n, dtype=np.float64))
            for fi, yi, bi in zip(f.tolist(), y.tolist(), b.tolist()):
                q_list[fi] += bi * (yi - q_list[fi])
            t_inner += n
            samples += n
            if samples == next_record:
                q_now = np.array(q_list).reshape(s_count, a_count)
                # The final checkpoint always carries v_gap when an oracle
                # is available, so summaries are recomputable from traces.
                record_v = cfg.record_v_gap or (samples == total and q_star is not None)
                records.append(
                    _make_record(
                        samples, k, t_inner, q_now, tq_target, mdp, d, q_star, record_v
                    )
                )
                last_emitted = samples
                next_record += cfg.eval_every
        if epsilon_by_outer is not None:
            q_end = np.array(q_list).reshape(s_count, a_count)
            resid = q_end - tq_target
            epsilon_by_outer.append(float(np.sum(resid * resid)))
            if outer_q_inf is not None and k == cfg.outer_iters - 1:
                outer_q_inf.append(float(np.max(np.abs(q_end - q_star))))

    final_q = np.array(q_list).reshape(s_count, a_count)
    if last_emitted != samples:
        records.append(
            _make_record(
                samples,
                cfg.outer_iters - 1,
                inner[-1],
                final_q,
                tq_target,
                mdp,
                d,
                q_star,
                cfg.record_v_gap or q_star is not None,
            )
        )
    return RunTrace(
        records=records,
        final_q=final_q,
        final_policy=greedy_policy(final_q),
        samples_total=total,
        seed=int(cfg.seed),
        outer_q_inf_error=outer_q_inf,
        epsilon_by_outer=epsilon_by_outer,
    )


def run_standard_q(
    mdp: TabularMdp,
    d: SamplingDistribution,
    total_steps: int,
    schedule: StepSizeSchedule,
    *,
    init_q: str | float | np.ndarray = "zeros",
    seed: int = 0,
    eval_every: int = 1000,
    record_outer_stats: bool = False,
    record_v_gap: bool = False,
    q_star: np.ndarray | None = None,
) -> RunTrace:
    """Standard Q-learning baseline: the double loop with one step per
    synchronization and a globally-indexed step size. The trace is exactly
    the run_pq trace for (outer_iters=total_steps, inner_steps=1,
    step_index="global"); checkpoint records label each step as the
    one-step synchronization period it completes.

    record_outer_stats makes every step a measured synchronization, which
    costs one exact operator application per sample; it is off by default
    and routes through the generic loop when enabled.
    """
    cfg = PqConfig(
        outer_iters=int(total_steps),
        inner_steps=1,
        schedule=schedule,
        init_q=init_q,
        seed=seed,
        eval_every=eval_every,
        step_index="global",
        record_outer_stats=record_outer_stats,
        record_v_gap=record_v_gap,
    )
    if record_outer_stats:
        return run_pq(mdp, d, cfg, q_star=q_star)
    return _run_standard_fast(mdp, d, cfg, q_star=q_star)


def _run_standard_fast(
    mdp: TabularMdp,
    d: SamplingDistribution,
    cfg: PqConfig,
    q_star: np.ndarray | None,
) -> RunTrace:
    """Single-pass loop for the one-step-per-sync case. The target table
    is the live table, so the sampled target is recomputed from the
    current row instead of a frozen max vector; draw order, update
    arithmetic, and record contents are identical to the generic loop."""
    _check_run_inputs(mdp, d)
    cfg.validate()
    total = cfg.outer_iters
    gamma = mdp.gamma
    s_count, a_count = mdp.num_states, mdp.num_actions
    block_cap = min(_BLOCK_CAP, max(256, _BLOCK_BUDGET // s_count))
    cum_d, cum_p, r_flat = _prepare_sampling(mdp, d)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(cfg.seed))))
    schedule = cfg.schedule

    q0 = _init_table(cfg.init_q, mdp)
    rows = [row.tolist() for row in q0]
    records = [
        _make_record(0, 0, 0, q0, apply_bellman(q0, mdp), mdp, d, q_star, cfg.record_v_gap)
    ]

    samples = 0
    next_record = cfg.eval_every
    last_emitted = 0
    while samples < total:
        n = min(total - samples, block_cap)
        if samples < next_record:
            n = min(n, next_record - samples)
        f, s_next = _draw_block(rng, cum_d, cum_p, n)
        r_s = r_flat[f]
        b = schedule.beta / (schedule.lam + np.arange(samples, samples + n, dtype=np.float64))
        s_l = (f // a_count).tolist()
        a_l = (f % a_count).tolist()
        sn_l = s_next.tolist()
        r_l = r_s.tolist()
        b_l = b.tolist()
        ends_at_record = samples + n == next_record or samples + n == total
        stop = n - 1 if ends_at_record else n
        for si, ai, sni, ri, bi in zip(s_l[:stop], a_l[:stop], sn_l[:stop], r_l[:stop], b_l[:stop]):
            row = rows[si]
            yi = ri + gamma * max(rows[sni])
            row[ai] += bi * (yi - row[ai])
        if ends_at_record:
            # Snapshot the pre-step table: the record's loss is measured
            # against the target of the step that lands on the checkpoint.
            prev_arr = np.array(rows)
            si, ai, sni, ri, bi = s_l[-1], a_l[-1], sn_l[-1], r_l[-1], b_l[-1]
            row = rows[si]
            yi = ri + gamma * max(rows[sni])
            row[ai] += bi * (yi - row[ai])
        samples += n
        if samples == next_record or (samples == total and last_emitted != samples):
            q_now = np.array(rows)
            record_v = cfg.record_v_gap or (samples == total and q_star is not None)
            records.append(
                _make_record(
                    samples,
                    samples - 1,
                    1,
                    q_now,
                    apply_bellman(prev_arr, mdp),
                    mdp,
                    d,
                    q_star,
                    record_v,
                )
            )
            last_emitted = samples
            if samples == next_record:
                next_record += cfg.eval_every

    final_q = np.array(rows)
    return RunTrace(
        records=records,
        final_q=final_q,
        final_policy=greedy_policy(final_q),
        samples_total=total,
        seed=int(cfg.seed),
        outer_q_inf_error=None,
        epsilon_by_outer=None,
    )
