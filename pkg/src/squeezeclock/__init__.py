"""Desk-scale stochastic simulator of a squeezed-spin Ramsey clock.

Gaussian collective-spin states driven through pulse/shear/wait
sequences, validated against an exact symmetric-subspace calculation,
and operated as a clock whose Allan deviation sits below the standard
quantum limit.
"""

__version__ = "0.1.0"

from .states import (
    CollectiveSpinState,
    DegenerateStateError,
    DriftProcess,
    NoiseModel,
    apply_contrast_decay,
    apply_phase_diffusion,
    make_css,
    measure_sz,
    rotate,
    rotation_matrix,
    shear,
    squeezing_parameter,
    tangent_frame,
)
from .dicke import (
    DickeState,
    SpinMoments,
    compare_shear_to_exact,
    dicke_css,
    evolve_oat,
    moments,
    rotate_dicke,
    zeta_from_moments,
)
from .sequences import (
    Echo,
    MomentForecast,
    PresetParams,
    Pulse,
    Pump,
    Readout,
    SequenceError,
    Shear,
    ShotResult,
    Wait,
    ZetaEstimate,
    PRESET_KINDS,
    estimate_zeta,
    preset_sequence,
    propagate_moments,
    run_shots,
    solve_shear_strength,
    validate_sequence,
)
from .clock import (
    AllanCurve,
    ClockConfig,
    FrequencyRecord,
    allan_deviation,
    fit_loglog_slope,
    random_walk_frequency_noise,
    run_clock,
    sql_reference,
    white_frequency_noise,
)
from .config import ConfigError, ExperimentConfig, default_config, load_config

__all__ = [
    "__version__",
    # states
    "CollectiveSpinState", "DegenerateStateError", "DriftProcess", "NoiseModel",
    "apply_contrast_decay", "apply_phase_diffusion", "make_css", "measure_sz",
    "rotate", "rotation_matrix", "shear", "squeezing_parameter", "tangent_frame",
    # exact reference
    "DickeState", "SpinMoments", "compare_shear_to_exact", "dicke_css",
    "evolve_oat", "moments", "rotate_dicke", "zeta_from_moments",
    # sequences
    "Echo", "MomentForecast", "PresetParams", "Pulse", "Pump", "Readout",
    "SequenceError", "Shear", "ShotResult", "Wait", "ZetaEstimate",
    "PRESET_KINDS", "estimate_zeta", "preset_sequence", "propagate_moments",
    "run_shots", "solve_shear_strength", "validate_sequence",
    # clock
    "AllanCurve", "ClockConfig", "FrequencyRecord", "allan_deviation",
    "fit_loglog_slope", "random_walk_frequency_noise", "run_clock",
    "sql_reference", "white_frequency_noise",
    # config
    "ConfigError", "ExperimentConfig", "default_config", "load_config",
]
