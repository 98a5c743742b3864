"""Toolkit for planning, running and stress-testing partitioned
equivalence tests in automatic passenger counting validation."""

from ._version import VERSION as __version__
from .classify import (
    ClassifierSpec,
    PartitionEstimate,
    classify,
    combined_classify,
    draw_sample,
    partition_stats_estimate,
)
from .cost import (
    CostBreakdown,
    cost_breakdown,
    costs_combined,
    costs_no_first_count,
    costs_with_first_count,
    counting_cost,
)
from .domain import (
    SAFE,
    UNLABELED,
    UNSAFE,
    CostParams,
    CostRates,
    DopRecord,
    PartitionParams,
    PartitionStats,
    TestParams,
    ground_truth,
    validate_record,
)
from .estimator import (
    EvaluationReport,
    confidence_interval,
    equivalence_verdict,
    evaluate_classic,
    evaluate_partitioned,
    mean_count_estimate,
    pooled_variance,
    relative_differences,
    stratified_mean,
)
from .normal import norm_cdf, norm_ppf
from .planner import (
    Plan,
    apply_buffer,
    make_plan,
    optimal_quota,
    quota_for_fixed_record,
    recorded_size,
    round_quota,
    sample_size_classic,
    total_cost,
)
from .simulate import (
    AuditPoint,
    CurvePoint,
    NormalErrors,
    ResamplingErrors,
    SimConfig,
    SuccessCurve,
    analytic_success,
    bias_estimates,
    planning_normal_model,
    run_simulation,
    user_risk_audit,
)

__all__ = [name for name in dir() if not name.startswith("_")]
