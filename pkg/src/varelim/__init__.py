"""Variance-aware elimination algorithms for approximate top-m arm selection,
with exact budget evaluation and numerical lower bounds."""

from .core import (
    ComplexityTerms,
    EnumerationBudgetError,
    ProblemSpec,
    VarianceGrouping,
    complexity_terms,
    complexity_terms_rle,
    entropy,
    entropy_rle,
    group_arms,
    partition_groups,
    partition_groups_rle,
    reduced_profile_rle,
    select_reduced,
    split_groups,
)
from .algorithms import (
    RoundTrace,
    RunResult,
    ShrinkSchedule,
    adapted_medelim,
    medelim,
    medelim_round_params,
    shrink_schedule,
    vmedelim,
    vmedelim_budget_upper,
    wnelim,
    wnelim_budget,
    wnelim_budget_exact,
)
from .instances import (
    BanditInstance,
    hard_instance_pivot,
    hard_instance_top,
    illustrative_family,
    instance_from_json,
    instance_to_json,
    log_uniform_sigma2,
    materialize_profile,
    profile_from_json,
    profile_to_json,
    random_instance,
)
from .lowerbound import (
    BoundReport,
    DualAssignment,
    b_delta,
    bound_report,
    dual_objective,
    eta_from_json,
    eta_product,
    eta_to_json,
    eta_uniform,
    eta_uniform_top,
    lower_bound_terms,
    sc_bound,
)
from .harness import (
    ALGORITHMS,
    ConstantSampler,
    GaussianSampler,
    SamplerExhaustedError,
    ScriptedSampler,
    TrialSummary,
    check_success,
    hoeffding_tail,
    run_trials,
    topm_condition,
    wilson_ci95,
)

__version__ = "0.1.0"
