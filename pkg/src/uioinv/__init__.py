"""Unknown-input observers, delayed inversion and preview tracking for
discrete-time LTI systems."""

from .errors import *  # noqa: F401,F403
from .errors import UioInvError
from .estimator import (
    WARM_START,
    ZERO,
    FirConfig,
    InverseDesign,
    Reconstruction,
    design_inverse,
    error_report,
    nmp_error_bound,
    reconstruct,
    run_fir_nmp,
    run_uio,
)
from .experiment import ExperimentConfig, RunReport, run_demo, run_experiment
from .lti import (
    SignalTrace,
    StateSpace,
    ZeroClassification,
    hinf_norm_grid,
    pinv,
    simulate,
    stack_block_matrices,
    transmission_zeros,
)
from .observer import ObserverGains, gamma_matrix, synthesize_uio, verify_uio_conditions
from .partition import PartitionedRealization, ZeroDynamics, partition_states, zero_dynamics
from .tracker import OutputTracker, TrackingConfig, track, track_design, tracking_error_bound
from .unit_circle import (
    DEFAULT_CONTROLLER,
    Controller,
    factor_unit_circle_zeros,
    prefilter_desired,
    repeated_mp_prefilter,
    track_with_unit_circle,
)

__version__ = "0.1.0"
