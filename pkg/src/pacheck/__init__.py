"""Statistical guarantees for randomized software properties.

Run a program (or a synthetic subject) many times, count how often a property
holds, and report an estimate with an (epsilon, delta) guarantee.
"""

__version__ = "0.1.0"

from .binomial_stats import (
    ApproximationParams,
    ConfidenceInterval,
    Estimate,
    EstimateKind,
    IntervalMethod,
    Tally,
    clopper_pearson,
    clopper_pearson_limits,
    clopper_pearson_radius,
    hoeffding_accuracy,
    hoeffding_sample_size,
    hoeffding_violation_bound,
    kp_sample_size,
    laplace_estimate,
    merge_tallies,
    mle_estimate,
    pac_error_bound,
    ro3_accuracy,
    ro3_sample_size,
    ro3_violation_bound,
    wald_interval,
    wilson_interval,
)
from .engine import (
    RunLedger,
    TrialEngine,
    TrialSource,
    checkpoint,
    load_checkpoint,
    restore,
    resume,
    run_trials,
    save_checkpoint,
    turning_point_test,
)
from .analyses import (
    AnalysisReport,
    PatchOutcome,
    PatchVerdict,
    patch_verify,
    quantify_practice,
    quantify_theory,
    verify,
)
from .subjects import bernoulli_source, subprocess_source, trace_source

__all__ = [
    "__version__",
    "AnalysisReport",
    "ApproximationParams",
    "ConfidenceInterval",
    "Estimate",
    "EstimateKind",
    "IntervalMethod",
    "PatchOutcome",
    "PatchVerdict",
    "RunLedger",
    "Tally",
    "TrialEngine",
    "TrialSource",
    "bernoulli_source",
    "checkpoint",
    "clopper_pearson",
    "clopper_pearson_limits",
    "clopper_pearson_radius",
    "hoeffding_accuracy",
    "hoeffding_sample_size",
    "hoeffding_violation_bound",
    "kp_sample_size",
    "laplace_estimate",
    "load_checkpoint",
    "merge_tallies",
    "mle_estimate",
    "pac_error_bound",
    "patch_verify",
    "quantify_practice",
    "quantify_theory",
    "restore",
    "resume",
    "ro3_accuracy",
    "ro3_sample_size",
    "ro3_violation_bound",
    "run_trials",
    "save_checkpoint",
    "subprocess_source",
    "trace_source",
    "turning_point_test",
    "verify",
    "wald_interval",
    "wilson_interval",
]
