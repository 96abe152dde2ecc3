"""Periodic Q-learning for tabular discounted MDPs: the double-loop
learner with a periodically synchronized target table, exact fixed-point
oracles to measure it against, closed-form sample budgets, and a seeded
experiment harness exposed through a CLI and a small HTTP service."""

__version__ = "0.1.0"

from .bellman import (
    MatrixForms,
    apply_bellman,
    flatten_action_major,
    greedy_policy,
    matrix_forms,
    policy_evaluation,
    q_bound,
    unflatten_action_major,
    value_iteration,
)
from .harness import (
    ComparisonResult,
    ExperimentConfig,
    ExperimentResult,
    SummaryRow,
    compare,
    derive_run_seed,
    load_config_file,
    parse_config,
    run_experiment,
    run_seeds,
)
from .mdp import (
    MdpViolation,
    SamplingDistribution,
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
from .metrics import ErrorReport, inner_residual, norms, policy_gap
from .pq import (
    PqConfig,
    RunTrace,
    StepSizeSchedule,
    TraceRecord,
    required_inner_steps,
    required_outer_iters,
    run_pq,
    run_standard_q,
    sample_complexity_policy,
    sample_complexity_q,
    schedule_is_compliant,
    theory_schedule,
)
from .sgd import OneHotGradient, TransitionSample, exact_gradient, loss, stochastic_gradient

__all__ = [
    "__version__",
    "MatrixForms",
    "apply_bellman",
    "flatten_action_major",
    "greedy_policy",
    "matrix_forms",
    "policy_evaluation",
    "q_bound",
    "unflatten_action_major",
    "value_iteration",
    "ComparisonResult",
    "ExperimentConfig",
    "ExperimentResult",
    "SummaryRow",
    "compare",
    "derive_run_seed",
    "load_config_file",
    "parse_config",
    "run_experiment",
    "run_seeds",
    "MdpViolation",
    "SamplingDistribution",
    "TabularMdp",
    "load_mdp_file",
    "make_distribution",
    "mdp_from_dict",
    "mdp_to_dict",
    "random_mdp",
    "save_mdp_file",
    "uniform_distribution",
    "validate_mdp",
    "ErrorReport",
    "inner_residual",
    "norms",
    "policy_gap",
    "PqConfig",
    "RunTrace",
    "StepSizeSchedule",
    "TraceRecord",
    "required_inner_steps",
    "required_outer_iters",
    "run_pq",
    "run_standard_q",
    "sample_complexity_policy",
    "sample_complexity_q",
    "schedule_is_compliant",
    "theory_schedule",
    "OneHotGradient",
    "TransitionSample",
    "exact_gradient",
    "loss",
    "stochastic_gradient",
]
