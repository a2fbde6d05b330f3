"""Information limits of joint radar target detection and delay estimation."""

__version__ = "0.1.0"

from .signal_model import (  # noqa: E402
    JointTargetParameter,
    PreconditionError,
    Snapshot,
    SystemConfig,
    autocorrelation,
    generate_noise,
    matched_filter,
    sinc,
    synthesize_snapshot,
)
from .posterior import (  # noqa: E402
    DegenerateConditioningError,
    DelayGrid,
    InvalidInputError,
    PosteriorField,
    compute_posterior,
    detector_posterior,
    estimator_posterior,
    log_i0,
)
from .measures import (  # noqa: E402
    EntropyBreakdown,
    InfoReport,
    differential_entropy,
    discrete_entropy,
    entropy_error_deviation,
    entropy_number,
    snapshot_entropy,
    theoretical_info,
)
from .jdeers import Decision, Rule, cascaded_decide, map_decide, sap_decide  # noqa: E402
from .harness import (  # noqa: E402
    CampaignResult,
    EmpiricalStats,
    run_campaign,
    snr_sweep,
    verify_cascaded_theorem,
    verify_joint_theorem,
)
