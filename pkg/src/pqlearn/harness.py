"""Experiment harness: configuration files, seeded sweeps, and CSV traces.

A config is a JSON object (same dialect as MDP files) that names a model
source, a sampling distribution, an algorithm, and its budgets. One
experiment runs `seeds` independent replicas whose PRNG seeds derive from
the master seed through a documented 64-bit mix, so reruns are
byte-identical and any subset of replicas can be reproduced in isolation.

Outputs per experiment: one trace CSV per replica with the fixed column
order (samples_used, outer_k, inner_t, q_inf_error, q_l2_sq_error,
d_norm_sq_error, loss, v_gap), one summary CSV, and a metadata JSON
carrying the resolved config, its hash, the oracle tolerance, the derived
seeds, and wall time. Wall time lives only in the metadata so trace and
summary files stay deterministic.
"""
from __future__ import annotations

import hashlib
import json
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .bellman import value_iteration
from .mdp import (
    SamplingDistribution,
    TabularMdp,
    load_mdp_file,
    make_distribution,
    random_mdp,
    uniform_distribution,
)
from .metrics import policy_gap
from .pq import (
    PqConfig,
    RunTrace,
    StepSizeSchedule,
    _init_table,
    required_inner_steps,
    required_outer_iters,
    run_pq,
    run_standard_q,
    sample_complexity_policy,
    sample_complexity_q,
    theory_schedule,
)

ORACLE_TOL = 1e-10
OUTPUT_DIR_ENV = "PQLEARN_OUT_DIR"

TRACE_COLUMNS = (
    "samples_used",
    "outer_k",
    "inner_t",
    "q_inf_error",
    "q_l2_sq_error",
    "d_norm_sq_error",
    "loss",
    "v_gap",
)
SUMMARY_COLUMNS = (
    "config_hash",
    "seeds",
    "samples_used",
    "q_inf_error_mean",
    "q_inf_error_se",
    "v_gap_mean",
    "v_gap_se",
)
COMPARE_COLUMNS = (
    "samples_used",
    "pq_q_inf_mean",
    "pq_q_inf_se",
    "std_q_inf_mean",
    "std_q_inf_se",
    "bound_samples_q",
    "bound_samples_policy",
)

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One SplitMix64 finalization round (public-domain constants)."""
    x &= _MASK64
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK64
    return x ^ (x >> 31)


def derive_run_seed(master_seed: int, index: int) -> int:
    """Per-replica seed: splitmix64(splitmix64(master + GOLDEN) ^ index).

    Injective in index for a fixed master, and documented here so traces
    can be reproduced individually without rerunning the whole sweep.
    """
    mixed_master = _splitmix64((master_seed + 0x9E3779B97F4A7C15) & _MASK64)
    return _splitmix64(mixed_master ^ (index & _MASK64))


_TOP_KEYS = {
    "algorithm",
    "seed",
    "seeds",
    "eval_every",
    "record_v_gap",
    "mdp_file",
    "generator",
    "distribution",
    "T",
    "N",
    "total_steps",
    "epsilon",
    "schedule",
    "init",
    "step_index",
    "out",
}
_GEN_KEYS = {"S", "A", "gamma", "seed", "branching"}
_SCHED_KEYS = {"beta", "lambda"}


@dataclass
class ExperimentConfig:
    """Fully resolved experiment: model and distribution are loaded, all
    defaults applied, and budgets filled in. `canonical` is the resolved
    JSON-able dict whose sha256 identifies the experiment."""

    algorithm: str  # "pq" | "standard"
    mdp: TabularMdp
    dist: SamplingDistribution
    schedule: StepSizeSchedule
    outer_iters: int | None  # pq only
    inner_steps: int | list[int] | None  # pq only
    total_steps: int | None  # standard only
    init: str | float | list
    step_index: str
    eval_every: int
    record_v_gap: bool
    seeds: int
    master_seed: int
    epsilon: float | None
    out_dir: str | None
    canonical: dict

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.canonical, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def budget(self) -> int:
        if self.algorithm == "standard":
            return int(self.total_steps)
        if isinstance(self.inner_steps, list):
            return sum(self.inner_steps)
        return int(self.outer_iters) * int(self.inner_steps)


def _field_error(name: str, problem: str) -> ValueError:
    return ValueError(f"config field '{name}': {problem}")


def _require_int(doc: dict, key: str, minimum: int) -> int:
    try:
        value = int(doc[key])
    except (TypeError, ValueError):
        raise _field_error(key, f"expected an integer, got {doc[key]!r}") from None
    if value < minimum:
        raise _field_error(key, f"must be >= {minimum}, got {value}")
    return value


def parse_config(source: str | dict, base_dir: str | Path | None = None) -> ExperimentConfig:
    """Parse and fully validate an experiment config.

    `source` is JSON text or an already-decoded object. Relative paths
    resolve against `base_dir` (the config file's directory when loaded
    from disk). Unknown keys are rejected by name. When N (or T) is
    omitted but `epsilon` is given, the budget is filled from the
    closed-form sufficient counts, with a warning because those counts
    are typically enormous.
    """
    if isinstance(source, (str, bytes)):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config is not valid JSON: {exc}") from exc
    else:
        doc = dict(source)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValueError(f"unknown config key(s): {sorted(unknown)}")
    base = Path(base_dir) if base_dir is not None else Path.cwd()

    algorithm = doc.get("algorithm")
    if algorithm not in ("pq", "standard"):
        raise _field_error("algorithm", f'expected "pq" or "standard", got {algorithm!r}')
    seeds = _require_int(doc, "seeds", 1) if "seeds" in doc else 1
    master_seed = _require_int(doc, "seed", 0) if "seed" in doc else 0
    eval_every = _require_int(doc, "eval_every", 1) if "eval_every" in doc else 1000
    record_v_gap = bool(doc.get("record_v_gap", False))

    # --- model source -----------------------------------------------------
    if ("mdp_file" in doc) == ("generator" in doc):
        raise ValueError("config must contain exactly one of 'mdp_file' or 'generator'")
    embedded_dist = None
    if "mdp_file" in doc:
        path = Path(doc["mdp_file"])
        if not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise _field_error("mdp_file", f"path {path} does not exist")
        mdp, embedded_dist = load_mdp_file(path)
        mdp_canonical = {"file": str(path)}
    else:
        gen = doc["generator"]
        if not isinstance(gen, dict):
            raise _field_error("generator", "expected an object")
        unknown = set(gen) - _GEN_KEYS
        if unknown:
            raise _field_error("generator", f"unknown key(s): {sorted(unknown)}")
        for key in ("S", "A", "gamma"):
            if key not in gen:
                raise _field_error(f"generator.{key}", "required")
        num_states = _require_int(gen, "S", 1)
        num_actions = _require_int(gen, "A", 1)
        gamma = float(gen["gamma"])
        gen_seed = _require_int(gen, "seed", 0) if "seed" in gen else 0
        branching = _require_int(gen, "branching", 1) if "branching" in gen else num_states
        try:
            mdp = random_mdp(gen_seed, num_states, num_actions, gamma, branching)
        except ValueError as exc:
            raise _field_error("generator", str(exc)) from exc
        mdp_canonical = {
            "generator": {
                "S": num_states,
                "A": num_actions,
                "gamma": gamma,
                "seed": gen_seed,
                "branching": branching,
            }
        }

    # --- sampling distribution --------------------------------------------
    dist_spec = doc.get("distribution")
    if dist_spec is None:
        if embedded_dist is not None:
            dist = embedded_dist
            dist_canonical = "embedded"
        else:
            dist = uniform_distribution(mdp.num_states, mdp.num_actions)
            dist_canonical = "uniform"
    elif dist_spec == "uniform":
        dist = uniform_distribution(mdp.num_states, mdp.num_actions)
        dist_canonical = "uniform"
    elif isinstance(dist_spec, dict) and set(dist_spec) == {"file"}:
        dpath = Path(dist_spec["file"])
        if not dpath.is_absolute():
            dpath = base / dpath
        if not dpath.is_file():
            raise _field_error("distribution", f"path {dpath} does not exist")
        try:
            ddoc = json.loads(dpath.read_text())
        except json.JSONDecodeError as exc:
            raise _field_error("distribution", f"{dpath} is not valid JSON: {exc}") from exc
        if not isinstance(ddoc, dict) or set(ddoc) != {"distribution"}:
            raise _field_error(
                "distribution", f'{dpath} must be an object with the single key "distribution"'
            )
        dist = make_distribution(np.asarray(ddoc["distribution"], dtype=np.float64))
        dist_canonical = {"file": str(dpath)}
    else:
        raise _field_error("distribution", 'expected "uniform" or {"file": <path>}')
    if dist.probs.shape != (mdp.num_states, mdp.num_actions):
        raise _field_error(
            "distribution",
            f"shape {dist.probs.shape} does not match the model "
            f"{(mdp.num_states, mdp.num_actions)}",
        )

    # --- schedule -----------------------------------------------------------
    sched_doc = doc.get("schedule")
    if sched_doc is None:
        schedule = theory_schedule(dist)
    else:
        if not isinstance(sched_doc, dict) or set(sched_doc) != _SCHED_KEYS:
            raise _field_error("schedule", 'expected an object with keys "beta" and "lambda"')
        try:
            schedule = StepSizeSchedule(
                beta=float(sched_doc["beta"]), lam=float(sched_doc["lambda"])
            )
        except ValueError as exc:
            raise _field_error("schedule", str(exc)) from exc

    epsilon = None
    if "epsilon" in doc:
        epsilon = float(doc["epsilon"])
        if epsilon <= 0.0:
            raise _field_error("epsilon", f"must be positive, got {epsilon}")

    init = doc.get("init", "zeros")
    init_value = init if isinstance(init, (str, int, float)) else np.asarray(init)
    try:
        _init_table(init_value, mdp)
    except ValueError as exc:
        raise _field_error("init", str(exc)) from exc

    # --- budgets ------------------------------------------------------------
    outer_iters = inner_steps = total_steps = None
    if algorithm == "pq":
        if "total_steps" in doc:
            raise _field_error("total_steps", 'only valid for algorithm "standard"')
        if "N" in doc:
            if isinstance(doc["N"], list):
                inner_steps = [int(n) for n in doc["N"]]
                if any(n < 1 for n in inner_steps):
                    raise _field_error("N", "every entry must be a positive integer")
            else:
                inner_steps = _require_int(doc, "N", 1)
        elif epsilon is not None:
            inner_steps = required_inner_steps(
                epsilon, mdp.gamma, mdp.num_states, mdp.num_actions, dist.c_min, dist.l_max
            )
            warnings.warn(
                f"N auto-filled to {inner_steps} inner steps per iteration from "
                f"epsilon={epsilon}; sufficient budgets at these constants are usually "
                "far beyond what is worth executing",
                stacklevel=2,
            )
        else:
            raise _field_error("N", "required for algorithm 'pq' (or provide 'epsilon')")
        if "T" in doc:
            outer_iters = _require_int(doc, "T", 1)
        elif epsilon is not None:
            outer_iters = max(1, required_outer_iters(epsilon, mdp.gamma))
        else:
            raise _field_error("T", "required for algorithm 'pq' (or provide 'epsilon')")
        if isinstance(inner_steps, list) and len(inner_steps) != outer_iters:
            raise _field_error("N", f"list length {len(inner_steps)} != T={outer_iters}")
        step_index = doc.get("step_index", "per_iteration")
        if step_index not in ("per_iteration", "global"):
            raise _field_error("step_index", f"expected 'per_iteration' or 'global', got {step_index!r}")
    else:
        for key in ("T", "N"):
            if key in doc:
                raise _field_error(key, 'only valid for algorithm "pq"')
        if "total_steps" not in doc:
            raise _field_error("total_steps", "required for algorithm 'standard'")
        total_steps = _require_int(doc, "total_steps", 1)
        step_index = doc.get("step_index", "global")
        if step_index != "global":
            raise _field_error("step_index", "the standard baseline always indexes steps globally")

    canonical = {
        "algorithm": algorithm,
        "seed": master_seed,
        "seeds": seeds,
        "eval_every": eval_every,
        "record_v_gap": record_v_gap,
        "mdp": mdp_canonical,
        "distribution": dist_canonical,
        "schedule": {"beta": schedule.beta, "lambda": schedule.lam},
        "init": init if isinstance(init, (str, int, float)) else np.asarray(init).tolist(),
        "step_index": step_index,
        "epsilon": epsilon,
    }
    if algorithm == "pq":
        canonical["T"] = outer_iters
        canonical["N"] = inner_steps
    else:
        canonical["total_steps"] = total_steps

    return ExperimentConfig(
        algorithm=algorithm,
        mdp=mdp,
        dist=dist,
        schedule=schedule,
        outer_iters=outer_iters,
        inner_steps=inner_steps,
        total_steps=total_steps,
        init=init,
        step_index=step_index,
        eval_every=eval_every,
        record_v_gap=record_v_gap,
        seeds=seeds,
        master_seed=master_seed,
        epsilon=epsilon,
        out_dir=doc.get("out"),
        canonical=canonical,
    )


def load_config_file(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


@dataclass
class SummaryRow:
    config_hash: str
    seed_count: int
    samples_used: int
    q_inf_error_mean: float
    q_inf_error_se: float
    v_gap_mean: float
    v_gap_se: float
    wall_time_s: float  # metadata only; never written into summary.csv


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list[RunTrace]
    q_star: np.ndarray
    derived_seeds: list[int]
    summary: SummaryRow


def _mean_se(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / np.sqrt(arr.size)) if arr.size > 1 else 0.0
    return mean, se


def _run_one(cfg: ExperimentConfig, seed: int, q_star: np.ndarray) -> RunTrace:
    init = cfg.init if isinstance(cfg.init, (str, int, float)) else np.asarray(cfg.init)
    if cfg.algorithm == "pq":
        pcfg = PqConfig(
            outer_iters=cfg.outer_iters,
            inner_steps=cfg.inner_steps,
            schedule=cfg.schedule,
            init_q=init,
            seed=seed,
            eval_every=cfg.eval_every,
            step_index=cfg.step_index,
            record_outer_stats=False,
            record_v_gap=cfg.record_v_gap,
        )
        return run_pq(cfg.mdp, cfg.dist, pcfg, q_star=q_star)
    return run_standard_q(
        cfg.mdp,
        cfg.dist,
        cfg.total_steps,
        cfg.schedule,
        init_q=init,
        seed=seed,
        eval_every=cfg.eval_every,
        record_v_gap=cfg.record_v_gap,
        q_star=q_star,
    )


def run_seeds(cfg: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run all replicas of one experiment and aggregate the summary.

    The oracle table is computed once per model. Replicas are independent
    (each owns its generator and trace), so they may execute on a thread
    pool; results are collected in seed order and do not depend on
    scheduling.
    """
    start = time.perf_counter()
    q_star = value_iteration(cfg.mdp, ORACLE_TOL)
    derived = [derive_run_seed(cfg.master_seed, i) for i in range(cfg.seeds)]
    if threads > 1 and cfg.seeds > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(lambda s: _run_one(cfg, s, q_star), derived))
    else:
        traces = [_run_one(cfg, s, q_star) for s in derived]
    final_inf = [t.records[-1].q_inf_error for t in traces]
    final_gap = [
        t.records[-1].v_gap
        if t.records[-1].v_gap is not None
        else policy_gap(cfg.mdp, t.final_q, q_star)
        for t in traces
    ]
    inf_mean, inf_se = _mean_se(final_inf)
    gap_mean, gap_se = _mean_se(final_gap)
    summary = SummaryRow(
        config_hash=cfg.config_hash,
        seed_count=cfg.seeds,
        samples_used=traces[0].samples_total,
        q_inf_error_mean=inf_mean,
        q_inf_error_se=inf_se,
        v_gap_mean=gap_mean,
        v_gap_se=gap_se,
        wall_time_s=time.perf_counter() - start,
    )
    return ExperimentResult(
        config=cfg, traces=traces, q_star=q_star, derived_seeds=derived, summary=summary
    )


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def render_trace_csv(trace: RunTrace) -> str:
    lines = [",".join(TRACE_COLUMNS)]
    for rec in trace.records:
        lines.append(
            ",".join(
                (
                    str(rec.samples_used),
                    str(rec.outer_k),
                    str(rec.inner_t),
                    _fmt(rec.q_inf_error),
                    _fmt(rec.q_l2_sq_error),
                    _fmt(rec.d_norm_sq_error),
                    _fmt(rec.loss),
                    _fmt(rec.v_gap),
                )
            )
        )
    return "\n".join(lines) + "\n"


def render_summary_csv(summary: SummaryRow) -> str:
    header = ",".join(SUMMARY_COLUMNS)
    row = ",".join(
        (
            summary.config_hash,
            str(summary.seed_count),
            str(summary.samples_used),
            _fmt(summary.q_inf_error_mean),
            _fmt(summary.q_inf_error_se),
            _fmt(summary.v_gap_mean),
            _fmt(summary.v_gap_se),
        )
    )
    return header + "\n" + row + "\n"


def trace_filename(index: int) -> str:
    return f"trace_seed_{index:04d}.csv"


def experiment_files(result: ExperimentResult) -> dict[str, str]:
    """All output files of an experiment as {name: content}."""
    files = {
        trace_filename(i): render_trace_csv(trace) for i, trace in enumerate(result.traces)
    }
    files["summary.csv"] = render_summary_csv(result.summary)
    metadata = {
        "config": result.config.canonical,
        "config_hash": result.config.config_hash,
        "oracle_tol": ORACLE_TOL,
        "derived_seeds": result.derived_seeds,
        "trace_files": sorted(files),
        "wall_time_s": result.summary.wall_time_s,
        "version": __version__,
    }
    files["metadata.json"] = json.dumps(metadata, indent=2, sort_keys=True) + "\n"
    return files


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    threads: int = 1,
) -> SummaryRow:
    """Run the experiment and persist one trace CSV per replica, the
    summary CSV, and the metadata JSON under out_dir."""
    result = run_seeds(cfg, threads=threads)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, content in experiment_files(result).items():
        (out / name).write_text(content)
    return result.summary


@dataclass
class ComparisonResult:
    matched_budget: int
    rows: list[dict]
    csv: str
    pq_summary: SummaryRow
    std_summary: SummaryRow


def compare(
    cfg_pq: ExperimentConfig,
    cfg_std: ExperimentConfig,
    matched_budget: int,
    threads: int = 1,
) -> ComparisonResult:
    """Run the periodic learner and the standard baseline at one matched
    sample budget and align their oracle errors by sample count, annotated
    with the closed-form sufficient budgets for the configured epsilon."""
    if cfg_pq.algorithm != "pq":
        raise ValueError("first config must use algorithm 'pq'")
    if cfg_std.algorithm != "standard":
        raise ValueError("second config must use algorithm 'standard'")
    if cfg_pq.canonical["mdp"] != cfg_std.canonical["mdp"]:
        raise ValueError("both configs must target the same model")
    if cfg_pq.canonical["distribution"] != cfg_std.canonical["distribution"]:
        raise ValueError("both configs must use the same sampling distribution")
    if cfg_pq.budget() != matched_budget:
        raise ValueError(
            f"pq config consumes {cfg_pq.budget()} samples, expected {matched_budget}"
        )
    if cfg_std.budget() != matched_budget:
        raise ValueError(
            f"standard config consumes {cfg_std.budget()} samples, expected {matched_budget}"
        )
    if cfg_pq.eval_every != cfg_std.eval_every:
        raise ValueError("both configs must share eval_every so traces align by samples")

    res_pq = run_seeds(cfg_pq, threads=threads)
    res_std = run_seeds(cfg_std, threads=threads)
    grid = [rec.samples_used for rec in res_pq.traces[0].records]
    std_grid = [rec.samples_used for rec in res_std.traces[0].records]
    if grid != std_grid:
        raise ValueError("trace checkpoint grids diverged; cannot align by samples")

    epsilon = cfg_pq.epsilon if cfg_pq.epsilon is not None else cfg_std.epsilon
    bound_q = bound_policy = None
    if epsilon is not None:
        mdp, dist = cfg_pq.mdp, cfg_pq.dist
        bound_q = sample_complexity_q(
            epsilon, mdp.gamma, mdp.num_states, mdp.num_actions, dist.c_min, dist.l_max
        )
        if epsilon <= 1.0:
            bound_policy = sample_complexity_policy(
                epsilon, mdp.gamma, mdp.num_states, mdp.num_actions, dist.c_min, dist.l_max
            )

    rows = []
    for i, samples in enumerate(grid):
        pq_mean, pq_se = _mean_se([t.records[i].q_inf_error for t in res_pq.traces])
        std_mean, std_se = _mean_se([t.records[i].q_inf_error for t in res_std.traces])
        rows.append(
            {
                "samples_used": samples,
                "pq_q_inf_mean": pq_mean,
                "pq_q_inf_se": pq_se,
                "std_q_inf_mean": std_mean,
                "std_q_inf_se": std_se,
                "bound_samples_q": bound_q,
                "bound_samples_policy": bound_policy,
            }
        )
    lines = [",".join(COMPARE_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join(
                (
                    str(row["samples_used"]),
                    _fmt(row["pq_q_inf_mean"]),
                    _fmt(row["pq_q_inf_se"]),
                    _fmt(row["std_q_inf_mean"]),
                    _fmt(row["std_q_inf_se"]),
                    _fmt(row["bound_samples_q"]),
                    _fmt(row["bound_samples_policy"]),
                )
            )
        )
    return ComparisonResult(
        matched_budget=matched_budget,
        rows=rows,
        csv="\n".join(lines) + "\n",
        pq_summary=res_pq.summary,
        std_summary=res_std.summary,
    )
