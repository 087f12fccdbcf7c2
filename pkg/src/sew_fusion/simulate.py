"""
Synthetic Scenarios.

Deterministic generation of smooth random trajectories, noisy IMU logs,
rolling-shutter landmark tracks, filtered-noise test signals and frame
dropout. Every generator is a pure function of the scenario seed.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any

import numpy as np
from scipy import fft

from . import so3
from .bspline import SplineR3, SplineSO3, Trajectory, make_knot_grid
from .errors import ConfigError, InvalidInputError
from .models import (
    Band,
    CameraModel,
    FloatArray,
    ImuBiases,
    ImuLog,
    ScenarioConfig,
    TrackSet,
    UniformSignal,
)
from .sensors import predict_accel, predict_gyro, project

logger = logging.getLogger(__name__)

# Rolling-shutter row iteration stops below this change (px).
ROW_TOLERANCE = 1e-10
MAX_ROW_ITERATIONS = 50

# Band plans of the built-in motion presets (low Hz, high Hz, amplitude).
PRESETS: dict[str, dict[str, Any]] = {
    "handheld": {
        "position_bands": [
            {"low": 0.0, "high": 0.5, "amplitude": 0.6},
            {"low": 0.5, "high": 2.0, "amplitude": 0.08},
        ],
        "rotation_bands": [
            {"low": 0.0, "high": 0.5, "amplitude": 0.3},
            {"low": 0.5, "high": 3.0, "amplitude": 0.04},
        ],
    },
    "bodycam": {
        "position_bands": [
            {"low": 0.0, "high": 0.4, "amplitude": 0.8},
            {"low": 1.5, "high": 2.5, "amplitude": 0.03},
        ],
        "rotation_bands": [
            {"low": 0.0, "high": 0.5, "amplitude": 0.25},
            {"low": 1.0, "high": 4.0, "amplitude": 0.03},
        ],
    },
    "fast": {
        "position_bands": [
            {"low": 0.0, "high": 1.0, "amplitude": 0.5},
            {"low": 1.0, "high": 5.0, "amplitude": 0.1},
        ],
        "rotation_bands": [
            {"low": 0.0, "high": 1.0, "amplitude": 0.4},
            {"low": 1.0, "high": 8.0, "amplitude": 0.08},
        ],
    },
}

# Band plan of the scalar signal used for the spline fit illustration.
TEST_SIGNAL_BANDS = (
    Band(0.0, 0.5, 1.0),
    Band(0.5, 2.0, 0.3),
    Band(2.0, 6.0, 0.05),
)


def preset_config(name: str, **overrides: Any) -> ScenarioConfig:
    """ScenarioConfig from a named preset, with keyword overrides.

    Raises:
        ConfigError: If the preset name is unknown
    """
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (valid: {', '.join(sorted(PRESETS))})")
    data = dict(PRESETS[name])
    data.update(overrides)
    return ScenarioConfig.from_dict(data)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """True trajectory, landmarks and biases of a scenario.

    Attributes:
        trajectory: Trajectory with first control pose (identity, 0)
        landmarks: World landmark positions (L, 3) in meters
        biases: True IMU biases
    """

    trajectory: Trajectory
    landmarks: FloatArray
    biases: ImuBiases


@dataclass(frozen=True, eq=False)
class Scenario:
    """A generated scenario: truth plus both measurement streams."""

    config: ScenarioConfig
    camera: CameraModel
    truth: GroundTruth
    imu: ImuLog
    tracks: TrackSet

    @property
    def duration(self) -> float:
        return float(self.imu.times[-1] - self.imu.times[0])


def _streams(seed: int) -> dict[str, np.random.Generator]:
    names = ("trajectory", "landmarks", "imu", "pixels")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {name: np.random.default_rng(child) for name, child in zip(names, children, strict=True)}


# =============================================================================
# Filtered noise
# =============================================================================


def band_limited_noise(
    rng: np.random.Generator,
    n: int,
    sample_rate: float,
    bands: tuple[Band, ...] | list[Band],
    dim: int | None = None,
) -> FloatArray:
    """Sum of white noise filtered into frequency bands.

    Each band is white Gaussian noise with every DFT bin outside
    [low, high) zeroed, rescaled to a standard deviation of `amplitude`.

    Args:
        rng: Random generator
        n: Number of samples
        sample_rate: Sample rate in Hz
        bands: Band plan
        dim: Number of independent columns (1D output when None)

    Returns:
        Array (n,) or (n, dim)
    """
    columns = 1 if dim is None else dim
    freqs = np.abs(fft.rfftfreq(n, d=1.0 / sample_rate))
    out = np.zeros((n, columns))
    for band in bands:
        white = rng.standard_normal((n, columns))
        if band.amplitude == 0:
            continue
        mask = (freqs >= band.low) & (freqs < band.high)
        if not np.any(mask):
            logger.warning(
                "band [%g, %g) Hz holds no frequency bin at %d samples", band.low, band.high, n
            )
            continue
        filtered = fft.irfft(fft.rfft(white, axis=0) * mask[:, None], n=n, axis=0)
        std = filtered.std(axis=0)
        out += band.amplitude * filtered / np.where(std > 0, std, 1.0)
    return out[:, 0] if dim is None else out


def generate_test_signal(
    seed: int,
    duration: float,
    sample_rate: float,
    bands: tuple[Band, ...] | list[Band] = TEST_SIGNAL_BANDS,
) -> UniformSignal:
    """Filtered white-noise test signal (noise free)."""
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(seed)
    return UniformSignal(band_limited_noise(rng, n, sample_rate, bands), sample_rate, 0.0)


# =============================================================================
# Trajectory and landmarks
# =============================================================================


def _smoothstep(n: int) -> FloatArray:
    """0 on the first four entries, 1 on the last four, C1 blend between."""
    s = np.zeros(n)
    if n <= 8:
        s[n // 2 :] = 1.0
        return s
    x = np.clip((np.arange(n) - 3.0) / (n - 8.0), 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def generate_trajectory(config: ScenarioConfig) -> Trajectory:
    """Random smooth trajectory expressed in its first control pose.

    Control points are band-limited noise sampled at the knot rate. With
    closed_loop the end pose is blended onto the start pose.
    """
    rng = _streams(config.seed)["trajectory"]
    dt = config.knot_spacing
    t0, n_controls = make_knot_grid(0.0, config.duration, dt)
    rate = 1.0 / dt
    positions = band_limited_noise(rng, n_controls, rate, config.position_bands, dim=3)
    rotvecs = band_limited_noise(rng, n_controls, rate, config.rotation_bands, dim=3)

    rotations = so3.exp(rotvecs)
    anchor = rotations[0].T
    rotations = anchor @ rotations
    positions = (positions - positions[0]) @ anchor.T

    if config.closed_loop:
        blend = _smoothstep(n_controls)
        open_traj = Trajectory(
            SplineSO3.from_matrices(dt, t0, rotations), SplineR3(dt, t0, positions)
        )
        t_start, t_end = open_traj.valid_interval
        gap = open_traj.position.evaluate(t_end) - open_traj.position.evaluate(t_start)
        positions = positions - blend[:, None] * gap
        correction = so3.log(
            open_traj.rotation.evaluate(t_start) @ open_traj.rotation.evaluate(t_end).T
        )
        rotations = so3.exp(blend[:, None] * correction) @ rotations

    return Trajectory(SplineSO3.from_matrices(dt, t0, rotations), SplineR3(dt, t0, positions))


def generate_landmarks(config: ScenarioConfig) -> FloatArray:
    """Landmarks in a cone around the initial viewing direction (+z)."""
    rng = _streams(config.seed)["landmarks"]
    n = config.n_landmarks
    lo, hi = config.landmark_distance
    cos_max = np.cos(np.deg2rad(config.landmark_cone_deg))
    cos_theta = rng.uniform(cos_max, 1.0, n)
    sin_theta = np.sqrt(1.0 - cos_theta**2)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    distance = rng.uniform(lo, hi, n)
    directions = np.stack([sin_theta * np.cos(phi), sin_theta * np.sin(phi), cos_theta], axis=1)
    return distance[:, None] * directions


def generate_truth(config: ScenarioConfig) -> GroundTruth:
    """Trajectory, landmarks and biases of a scenario."""
    return GroundTruth(
        trajectory=generate_trajectory(config),
        landmarks=generate_landmarks(config),
        biases=ImuBiases(gyro=config.gyro_bias, accel=config.accel_bias),
    )


# =============================================================================
# Measurements
# =============================================================================


def imu_times(config: ScenarioConfig) -> FloatArray:
    """IMU sample times covering [0, duration]."""
    n = int(np.floor(config.duration * config.imu_rate + 1e-9)) + 1
    return np.arange(n) / config.imu_rate


def frame_times(config: ScenarioConfig, camera: CameraModel) -> FloatArray:
    """Frame start times whose full readout ends by the scenario duration."""
    n = int(np.floor((config.duration - camera.readout_time) / camera.frame_period + 1e-9)) + 1
    return np.arange(n) * camera.frame_period


def generate_imu(truth: GroundTruth, config: ScenarioConfig) -> ImuLog:
    """Noisy gyroscope and accelerometer samples of the true trajectory."""
    rng = _streams(config.seed)["imu"]
    times = imu_times(config)
    gyro = predict_gyro(truth.trajectory, times, truth.biases)
    accel = predict_accel(truth.trajectory, times, truth.biases, config.gravity)
    gyro = gyro + config.sigma_gyro * rng.standard_normal(gyro.shape)
    accel = accel + config.sigma_accel * rng.standard_normal(accel.shape)
    return ImuLog(times, gyro, accel)


def _world_to_camera(traj: Trajectory, times: FloatArray, points: FloatArray) -> FloatArray:
    rotation = traj.rotation.evaluate(times)
    position = traj.position.evaluate(times)
    return np.asarray(np.einsum("mji,mj->mi", rotation, points - position), dtype=float)


def generate_observations(
    truth: GroundTruth, camera: CameraModel, config: ScenarioConfig
) -> TrackSet:
    """Rolling-shutter observations of every landmark in every frame.

    The image row of each observation sets its own capture time; the row is
    found by fixed-point iteration. Pixel noise and outliers are added
    afterwards, and observations outside the image are dropped.
    """
    rng = _streams(config.seed)["pixels"]
    starts = frame_times(config, camera)
    n_landmarks = truth.landmarks.shape[0]
    frame_idx, landmark_idx = np.meshgrid(
        np.arange(starts.size), np.arange(n_landmarks), indexing="ij"
    )
    frame_idx = frame_idx.reshape(-1)
    landmark_idx = landmark_idx.reshape(-1)
    points = truth.landmarks[landmark_idx]
    t_frame = starts[frame_idx]

    rows = np.full(frame_idx.size, camera.cy)
    pixels = np.zeros((frame_idx.size, 2))
    valid = np.ones(frame_idx.size, dtype=bool)
    for _ in range(MAX_ROW_ITERATIONS):
        times = t_frame + camera.readout_time * np.clip(rows, 0.0, camera.height) / camera.height
        pixels, valid = project(_world_to_camera(truth.trajectory, times, points), camera)
        new_rows = np.where(valid, pixels[:, 1], rows)
        change = float(np.max(np.abs(new_rows - rows))) if rows.size else 0.0
        rows = new_rows
        if change < ROW_TOLERANCE:
            break
    else:
        logger.warning("rolling-shutter rows did not converge (last change %.3g px)", change)

    noisy = pixels + config.pixel_noise * rng.standard_normal(pixels.shape)
    outliers = rng.random(frame_idx.size) < config.outlier_rate
    uniform = rng.uniform([0.0, 0.0], [camera.width, camera.height], size=pixels.shape)
    noisy = np.where(outliers[:, None], uniform, noisy)

    inside = (
        valid
        & (noisy[:, 0] >= 0)
        & (noisy[:, 0] <= camera.width)
        & (noisy[:, 1] >= 0)
        & (noisy[:, 1] <= camera.height)
    )
    seen = np.unique(landmark_idx[inside])
    if seen.size < n_landmarks:
        logger.warning("%d landmark(s) never visible, excluded", n_landmarks - seen.size)
    tracks = TrackSet(
        track_id=landmark_idx[inside],
        frame=frame_idx[inside],
        pixels=noisy[inside],
        frame_time=t_frame[inside],
    )
    return tracks.sorted()


def apply_dropout(
    tracks: TrackSet, dropout_seconds: float, t_end: float | None = None
) -> TrackSet:
    """Remove observations from frames starting after t_end - dropout_seconds.

    The first frame is always kept.

    Args:
        tracks: Observations
        dropout_seconds: Length of the trailing dropout (s)
        t_end: End of the recording; when omitted, the last frame start
            plus the median frame interval

    Returns:
        Remaining observations; the IMU log is not touched

    Raises:
        InvalidInputError: If the dropout is negative or covers the whole
            recording
    """
    if dropout_seconds < 0:
        raise InvalidInputError(f"dropout must be nonnegative, got {dropout_seconds}")
    if dropout_seconds == 0 or len(tracks) == 0:
        return tracks
    starts = np.unique(tracks.frame_time)
    first = float(starts[0])
    if t_end is None:
        period = float(np.median(np.diff(starts))) if starts.size > 1 else 0.0
        t_end = float(starts[-1]) + period
    if dropout_seconds >= t_end - first:
        raise InvalidInputError(
            f"dropout of {dropout_seconds:g} s covers the whole recording "
            f"({t_end - first:g} s from the first frame)"
        )
    cutoff = max(t_end - dropout_seconds, first)
    return tracks.select(tracks.frame_time <= cutoff + 1e-9)


def generate_scenario(config: ScenarioConfig) -> Scenario:
    """Ground truth plus IMU log and tracks for a scenario."""
    assert config.camera is not None
    camera = config.camera
    truth = generate_truth(config)
    imu = generate_imu(truth, config)
    tracks = generate_observations(truth, camera, config)
    logger.info(
        "scenario seed=%d: %.1f s, %d IMU samples, %d observations of %d landmarks",
        config.seed,
        config.duration,
        len(imu),
        len(tracks),
        np.unique(tracks.track_id).size,
    )
    return Scenario(config=config, camera=camera, truth=truth, imu=imu, tracks=tracks)


def noise_free(config: ScenarioConfig, knot_spacing: float | None = None) -> ScenarioConfig:
    """Copy of a scenario with all noise and outliers removed; biases are kept.

    Args:
        config: Scenario to copy
        knot_spacing: Ground-truth knot spacing to use (keeps the original when None)
    """
    return replace(
        config,
        sigma_gyro=0.0,
        sigma_accel=0.0,
        pixel_noise=0.0,
        outlier_rate=0.0,
        truth_knot_spacing=knot_spacing if knot_spacing is not None else config.truth_knot_spacing,
    )
