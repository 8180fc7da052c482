"""Group-fairness disparities under bounded distribution shift.

Exact finite-table fairness metrics, certified transferability bounds for
covariate and label shift, synthetic shift simulators, and brute-force
adversarial oracles that validate every bound.
"""

from .bounds import (
    BoundReport,
    LipschitzVector,
    bound_dp_covariate,
    bound_dp_covariate_multiclass,
    bound_dp_label,
    bound_eop_corners,
    eop_cap,
    lipschitz_bound,
)
from .disparity import (
    DisparityValue,
    Premetric,
    custom_premetric,
    disparity,
    disparity_dp,
    disparity_dp_multiclass,
    disparity_eo,
    disparity_eop,
)
from .dist import (
    EmpiricalDistribution,
    GroupOutcomeStats,
    Policy,
    build_empirical,
    class_acceptance_rates,
    constant_policy,
    joint_outcome_table,
    mixture,
    outcome_stats,
    threshold_policy,
)
from .errors import (
    FairshiftError,
    InfeasibleError,
    SupportViolationError,
    UndefinedRateError,
    ValidationError,
)
from .geometry import (
    GeometricContext,
    TprInterval,
    geometric_context,
    inner_product,
    tpr_from_geometry,
    tpr_interval,
)
from .harness import DatasetSchema, IngestResult, SweepGrid, emit, ingest_csv, load_grid, sweep
from .oracle import (
    OracleResult,
    covariance_identity_check,
    sup_dp_covariate_shift,
    sup_dp_label_shift,
    sup_eop_covariate_shift,
    variance_expectation_check,
)
from .shifts import (
    ReweightingTable,
    ShiftBudget,
    apply_covariate_shift,
    apply_label_shift,
    divergence_qual_rate,
    divergence_var_omega,
    divergence_weighted_l2,
    reweighting,
)
from .simulate import (
    ReplicatorParams,
    StrategicParams,
    dp_fair_thresholds,
    grid_threshold_policy,
    mlr_instance,
    replicator_bound,
    replicator_step,
    replicator_trajectory,
    strategic_bound,
    strategic_omega,
    strategic_target,
    unit_grid_source,
)

__version__ = "0.1.0"
