"""Federated learning privacy workbench.

Renyi-DP accounting for Poisson and fixed-size minibatch sampling, noise
calibration, DP-SGD on small models under federated averaging, a memory
profiler for the two samplers, a recommendation engine that turns plain
requirements into run parameters, and an HTTP service plus CLI around it all.
"""
from .accounting import (
    Adjacency,
    AccountingError,
    CalibrationError,
    CalibrationResult,
    FixedSizeScheme,
    PoissonScheme,
    PrivacyTarget,
    QuadratureError,
    RdpCurve,
    accounted_steps,
    calibrate_sigma,
    compose,
    epsilon_for_sigma,
    fixed_size_rdp,
    gaussian_rdp,
    mixture_rdp,
    poisson_subsampled_rdp,
    rdp_to_dp,
    scheme_rdp,
)
from .data import make_blobs, train_test_split
from .dpsgd import (
    FixedSizeSampler,
    Injection,
    LocalPrivacy,
    MemoryProfile,
    PoissonSampler,
    StreamKey,
    clip_gradient,
    expected_poisson_peak,
    local_round,
    noisy_step,
    per_round_inject,
    sample_minibatches,
)
from .federation import (
    ClientPrivacy,
    ClientRoundStats,
    FederationConfig,
    FederationSetupError,
    RoundRecord,
    RunAborted,
    RunControl,
    RunRecord,
    evaluate,
    fed_avg,
    run_federation,
    uniform_clients,
)
from .launch import LaunchPlan, execute_plan, plan_from_dict
from .models import Logistic, Mlp, Model, accuracy, init_model, mean_loss
from .partition import (
    DegeneratePartitionError,
    PartitionError,
    PartitionPlan,
    Policy,
    assign_indices,
    make_plan,
    partition_sizes,
)
from .practitioner import (
    AdherenceEvent,
    EventKind,
    GoalKind,
    PrivacyGoal,
    Recommendation,
    Requirements,
    adherence_events,
    check_adherence,
    goal_epsilon,
    load_goal_table,
    recommend,
)
from .store import RunRegistry

__version__ = "0.1.0"

__all__ = [
    "Adjacency",
    "AccountingError",
    "AdherenceEvent",
    "CalibrationError",
    "CalibrationResult",
    "ClientPrivacy",
    "ClientRoundStats",
    "DegeneratePartitionError",
    "EventKind",
    "FederationConfig",
    "FederationSetupError",
    "FixedSizeSampler",
    "FixedSizeScheme",
    "GoalKind",
    "Injection",
    "LaunchPlan",
    "LocalPrivacy",
    "Logistic",
    "MemoryProfile",
    "Mlp",
    "Model",
    "PartitionError",
    "PartitionPlan",
    "PoissonSampler",
    "PoissonScheme",
    "Policy",
    "PrivacyGoal",
    "PrivacyTarget",
    "QuadratureError",
    "RdpCurve",
    "Recommendation",
    "Requirements",
    "RoundRecord",
    "RunAborted",
    "RunControl",
    "RunRecord",
    "RunRegistry",
    "StreamKey",
    "accounted_steps",
    "accuracy",
    "adherence_events",
    "assign_indices",
    "calibrate_sigma",
    "check_adherence",
    "clip_gradient",
    "compose",
    "epsilon_for_sigma",
    "evaluate",
    "execute_plan",
    "expected_poisson_peak",
    "fed_avg",
    "fixed_size_rdp",
    "gaussian_rdp",
    "goal_epsilon",
    "init_model",
    "load_goal_table",
    "local_round",
    "make_blobs",
    "make_plan",
    "mean_loss",
    "mixture_rdp",
    "noisy_step",
    "partition_sizes",
    "per_round_inject",
    "plan_from_dict",
    "poisson_subsampled_rdp",
    "rdp_to_dp",
    "recommend",
    "run_federation",
    "sample_minibatches",
    "scheme_rdp",
    "train_test_split",
    "uniform_clients",
    "__version__",
]
