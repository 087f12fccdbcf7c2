"""
Spline Error Weighting - Knot Spacing and Residual Weights for Spline Fusion.

Selects B-spline knot spacings from the spectral content of IMU signals,
predicts the residual variance a spline fit leaves behind and uses it to
weight gyroscope and accelerometer residuals in a continuous-time
visual-inertial structure-from-motion solver.

Example:
    >>> from sew_fusion import FusionConfig, generate_scenario, plan_from_imu, preset_config
    >>> scenario = generate_scenario(preset_config("handheld", seed=3))
    >>> plan = plan_from_imu(scenario.imu, FusionConfig())
    >>> plan.dt_so3 > 0
    True
"""

__version__ = "1.0.0"
__author__ = "Spline Error Weighting contributors"

# Spline trajectories
from .bspline import (
    SplineR3,
    SplineSO3,
    Trajectory,
    angular_velocity,
    basis_weights,
    cumulative_basis,
    eval_r3,
    eval_so3,
    fit_least_squares_1d,
    make_knot_grid,
    so3_local_jacobians,
    trajectory_length,
)

# Errors
from .errors import (
    BracketError,
    BuildError,
    CheiralityError,
    ConfigError,
    CsvFormatError,
    DegenerateInputError,
    DegenerateWeightError,
    FitError,
    InvalidInputError,
    OutOfDomainError,
    SaturationWarning,
    SewError,
    SolverAbortError,
)

# Experiments
from .experiments import EXPERIMENTS, ExperimentResult, run_experiment

# Fusion
from .fusion import (
    FusionProblem,
    FusionResult,
    FusionState,
    align_positions,
    build_problem,
    endpoint_distortion,
    endpoint_error,
    evaluate_cost,
    jacobian,
    optimize,
    resample_state,
    residual_accel,
    residual_gyro,
    residual_histograms,
    residual_reprojection,
    residual_vector,
    scale_error,
    solve,
)

# File formats
from .io import (
    load_fusion_config,
    load_scenario,
    load_yaml,
    read_imu_csv,
    read_tracks_csv,
    write_imu_csv,
    write_json,
    write_tracks_csv,
    write_trajectory_csv,
)

# Data classes
from .models import (
    Band,
    CameraModel,
    FusionConfig,
    FusionReport,
    ImuBiases,
    ImuLog,
    ImuSample,
    Landmark,
    Metrics,
    Observation,
    ResidualPrediction,
    ResidualWeightPlan,
    ScalarSpectrum,
    ScenarioConfig,
    Spectrum,
    TrackSet,
    UniformSignal,
)

# Sensor models
from .sensors import (
    Pose,
    huber_cost,
    observation_time,
    predict_accel,
    predict_gyro,
    project,
    reproject,
)

# Knot spacing and weights
from .sew import (
    CUBIC,
    FrequencyResponseModel,
    brent_root,
    frequency_response,
    inverse_noise_plan,
    plan_from_imu,
    predict_residual_variance,
    quality,
    select_knot_spacing,
    weights_from_quality,
)

# Synthetic scenarios
from .simulate import (
    PRESETS,
    GroundTruth,
    Scenario,
    apply_dropout,
    generate_imu,
    generate_observations,
    generate_scenario,
    generate_test_signal,
    generate_trajectory,
    generate_truth,
    preset_config,
)

# Spectral analysis
from .spectral import (
    bin_frequencies,
    decimate,
    dft,
    energy,
    estimate_noise_std,
    idft,
    scalar_spectrum,
    vector_spectrum,
)

__all__ = [
    # Version
    "__version__",
    # Spectral analysis
    "dft",
    "idft",
    "bin_frequencies",
    "scalar_spectrum",
    "vector_spectrum",
    "energy",
    "decimate",
    "estimate_noise_std",
    # Spline trajectories
    "SplineR3",
    "SplineSO3",
    "Trajectory",
    "basis_weights",
    "cumulative_basis",
    "make_knot_grid",
    "eval_r3",
    "eval_so3",
    "angular_velocity",
    "so3_local_jacobians",
    "trajectory_length",
    "fit_least_squares_1d",
    # Knot spacing and weights
    "FrequencyResponseModel",
    "CUBIC",
    "frequency_response",
    "quality",
    "brent_root",
    "select_knot_spacing",
    "predict_residual_variance",
    "weights_from_quality",
    "inverse_noise_plan",
    "plan_from_imu",
    # Sensor models
    "Pose",
    "observation_time",
    "predict_gyro",
    "predict_accel",
    "project",
    "reproject",
    "huber_cost",
    # Fusion
    "FusionProblem",
    "FusionState",
    "FusionResult",
    "build_problem",
    "optimize",
    "resample_state",
    "solve",
    "residual_reprojection",
    "residual_gyro",
    "residual_accel",
    "residual_vector",
    "jacobian",
    "evaluate_cost",
    "residual_histograms",
    "endpoint_error",
    "endpoint_distortion",
    "scale_error",
    "align_positions",
    # Synthetic scenarios
    "PRESETS",
    "GroundTruth",
    "Scenario",
    "preset_config",
    "generate_test_signal",
    "generate_trajectory",
    "generate_truth",
    "generate_imu",
    "generate_observations",
    "generate_scenario",
    "apply_dropout",
    # Experiments
    "EXPERIMENTS",
    "ExperimentResult",
    "run_experiment",
    # File formats
    "read_imu_csv",
    "write_imu_csv",
    "read_tracks_csv",
    "write_tracks_csv",
    "write_trajectory_csv",
    "write_json",
    "load_yaml",
    "load_scenario",
    "load_fusion_config",
    # Data classes
    "UniformSignal",
    "Spectrum",
    "ScalarSpectrum",
    "ImuSample",
    "ImuLog",
    "ImuBiases",
    "CameraModel",
    "Observation",
    "TrackSet",
    "Landmark",
    "ResidualPrediction",
    "ResidualWeightPlan",
    "FusionConfig",
    "FusionReport",
    "Metrics",
    "Band",
    "ScenarioConfig",
    # Errors
    "SewError",
    "InvalidInputError",
    "OutOfDomainError",
    "FitError",
    "DegenerateInputError",
    "DegenerateWeightError",
    "BracketError",
    "CheiralityError",
    "BuildError",
    "SolverAbortError",
    "ConfigError",
    "CsvFormatError",
    "SaturationWarning",
]
