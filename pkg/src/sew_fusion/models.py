"""
Spline Error Weighting Models.

Data classes for signals, sensor measurements, camera intrinsics, weight
plans and configuration documents.
"""

from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from typing import Any, TypeVar

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError, InvalidInputError, SewError

FloatArray = NDArray[np.float64]

_T = TypeVar("_T")

# Default world gravity (m/s^2); z is up, so a device at rest reads +9.81 on z.
GRAVITY = (0.0, 0.0, -9.81)


def _as_vector(value: Any, size: int, name: str) -> FloatArray:
    array = np.asarray(value, dtype=float).reshape(-1)
    if array.shape != (size,):
        raise InvalidInputError(f"{name} must have {size} components, got {array.size}")
    if not np.all(np.isfinite(array)):
        raise InvalidInputError(f"{name} must be finite")
    return array


def _check_keys(cls_name: str, data: dict[str, Any], allowed: set[str]) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{cls_name}: unknown key(s) {', '.join(unknown)}")


def _construct(cls_name: str, factory: Callable[..., _T], values: dict[str, Any]) -> _T:
    """Call factory(**values), reporting badly typed values as ConfigError."""
    try:
        return factory(**values)
    except SewError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{cls_name}: {exc}") from exc


def _float_tuple(cls_name: str, key: str, value: Any) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{cls_name}: {key} must be a list of numbers, got {value!r}") from exc


# =============================================================================
# Signals
# =============================================================================


@dataclass(frozen=True, eq=False)
class UniformSignal:
    """A uniformly sampled scalar signal.

    Attributes:
        samples: Sample values, shape (N,) with N >= 2
        sample_rate: Sampling rate in Hz
        start_time: Time of the first sample in seconds
    """

    samples: FloatArray
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1:
            raise InvalidInputError(f"samples must be one-dimensional, got shape {samples.shape}")
        if samples.shape[0] < 2:
            raise InvalidInputError(f"a signal needs at least 2 samples, got {samples.shape[0]}")
        if not np.isfinite(self.sample_rate) or self.sample_rate <= 0:
            raise InvalidInputError(
                f"sample_rate must be positive and finite, got {self.sample_rate}"
            )
        object.__setattr__(self, "samples", samples)

    @property
    def n(self) -> int:
        """Number of samples."""
        return int(self.samples.shape[0])

    @property
    def times(self) -> FloatArray:
        """Sample timestamps in seconds."""
        return self.start_time + np.arange(self.n) / self.sample_rate


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Complex DFT bins of a uniformly sampled signal (unitary scaling).

    Bin k < N/2 sits at k * sample_rate / N; the upper half holds the
    negative frequencies.
    """

    bins: NDArray[np.complex128]
    sample_rate: float
    start_time: float = 0.0

    def __post_init__(self) -> None:
        bins = np.asarray(self.bins, dtype=complex)
        if bins.ndim != 1 or bins.shape[0] < 2:
            raise InvalidInputError("a spectrum needs a one-dimensional array of at least 2 bins")
        if not np.isfinite(self.sample_rate) or self.sample_rate <= 0:
            raise InvalidInputError(
                f"sample_rate must be positive and finite, got {self.sample_rate}"
            )
        object.__setattr__(self, "bins", bins)

    @property
    def n(self) -> int:
        return int(self.bins.shape[0])

    def bin_frequency(self, k: int) -> float:
        """Frequency of bin k in Hz."""
        return float(np.fft.fftfreq(self.n, d=1.0 / self.sample_rate)[k])


@dataclass(frozen=True, eq=False)
class ScalarSpectrum:
    """Per-bin nonnegative magnitudes with a zero DC bin.

    This is the form every quality and variance prediction works on.
    """

    magnitudes: FloatArray
    sample_rate: float

    def __post_init__(self) -> None:
        magnitudes = np.asarray(self.magnitudes, dtype=float)
        if magnitudes.ndim != 1 or magnitudes.shape[0] < 2:
            raise InvalidInputError("a spectrum needs a one-dimensional array of at least 2 bins")
        if not np.all(np.isfinite(magnitudes)) or np.any(magnitudes < 0):
            raise InvalidInputError("magnitudes must be finite and nonnegative")
        if magnitudes[0] != 0.0:
            raise InvalidInputError("the DC magnitude of a ScalarSpectrum must be exactly 0")
        if not np.isfinite(self.sample_rate) or self.sample_rate <= 0:
            raise InvalidInputError(
                f"sample_rate must be positive and finite, got {self.sample_rate}"
            )
        object.__setattr__(self, "magnitudes", magnitudes)

    @property
    def n(self) -> int:
        return int(self.magnitudes.shape[0])

    @property
    def frequencies(self) -> FloatArray:
        """Bin frequencies in Hz."""
        return np.fft.fftfreq(self.n, d=1.0 / self.sample_rate)


# =============================================================================
# Sensors
# =============================================================================


@dataclass(frozen=True, eq=False)
class ImuSample:
    """One inertial sample.

    Attributes:
        t: Timestamp in seconds
        omega: Angular velocity (rad/s, body frame)
        accel: Specific force (m/s^2, body frame)
    """

    t: float
    omega: FloatArray
    accel: FloatArray


@dataclass(frozen=True, eq=False)
class ImuLog:
    """Column-oriented inertial log with strictly increasing timestamps."""

    times: FloatArray
    gyro: FloatArray
    accel: FloatArray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).reshape(-1)
        gyro = np.asarray(self.gyro, dtype=float).reshape(-1, 3)
        accel = np.asarray(self.accel, dtype=float).reshape(-1, 3)
        if not (times.shape[0] == gyro.shape[0] == accel.shape[0]):
            raise InvalidInputError("times, gyro and accel must have the same length")
        if times.shape[0] < 2:
            raise InvalidInputError("an IMU log needs at least 2 samples")
        for name, array in (("times", times), ("gyro", gyro), ("accel", accel)):
            if not np.all(np.isfinite(array)):
                raise InvalidInputError(f"IMU {name} must be finite")
        if np.any(np.diff(times) <= 0):
            raise InvalidInputError("IMU timestamps must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "gyro", gyro)
        object.__setattr__(self, "accel", accel)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    def __iter__(self) -> Iterator[ImuSample]:
        for i in range(len(self)):
            yield self.sample(i)

    def sample(self, i: int) -> ImuSample:
        """Get sample i as an ImuSample."""
        return ImuSample(t=float(self.times[i]), omega=self.gyro[i], accel=self.accel[i])

    @property
    def sample_rate(self) -> float:
        """Sample rate in Hz from the median sample interval."""
        return float(1.0 / np.median(np.diff(self.times)))


@dataclass(frozen=True, eq=False)
class ImuBiases:
    """Constant gyroscope and accelerometer biases."""

    gyro: FloatArray = field(default_factory=lambda: np.zeros(3))
    accel: FloatArray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        object.__setattr__(self, "gyro", _as_vector(self.gyro, 3, "gyro bias"))
        object.__setattr__(self, "accel", _as_vector(self.accel, 3, "accel bias"))

    def to_dict(self) -> dict[str, list[float]]:
        return {"gyro": self.gyro.tolist(), "accel": self.accel.tolist()}


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus rolling-shutter timing.

    Attributes:
        fx, fy: Focal lengths in pixels
        cx, cy: Principal point in pixels
        width, height: Image size in pixels (height is the row count N_v)
        readout_time: Rolling-shutter readout time r in seconds (0 = global shutter)
        frame_period: Time between frame starts in seconds
    """

    fx: float = 500.0
    fy: float = 500.0
    cx: float = 480.0
    cy: float = 270.0
    width: int = 960
    height: int = 540
    readout_time: float = 0.03
    frame_period: float = 1.0 / 30.0

    def __post_init__(self) -> None:
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInputError("image size must be positive")
        if self.frame_period <= 0:
            raise InvalidInputError("frame_period must be positive")
        if not 0.0 <= self.readout_time < self.frame_period:
            raise InvalidInputError(
                f"readout_time must be in [0, frame_period), got {self.readout_time}"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "readout_time": self.readout_time,
            "frame_period": self.frame_period,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CameraModel":
        """Create CameraModel from dictionary; missing keys use defaults."""
        _check_keys("camera", data, set(cls().to_dict()))
        return _construct("camera", cls, dict(data))


@dataclass(frozen=True, eq=False)
class Observation:
    """A single landmark observation.

    Attributes:
        track_id: Landmark track identifier
        frame_index: Frame number m
        pixel: Observed (u, v) in pixels
        frame_start_time: Start time t_m of the frame in seconds
    """

    track_id: int
    frame_index: int
    pixel: FloatArray
    frame_start_time: float


@dataclass(frozen=True, eq=False)
class TrackSet:
    """Column-oriented landmark observations, one row per observation."""

    track_id: NDArray[np.int64]
    frame: NDArray[np.int64]
    pixels: FloatArray
    frame_time: FloatArray

    def __post_init__(self) -> None:
        track_id = np.asarray(self.track_id, dtype=np.int64).reshape(-1)
        frame = np.asarray(self.frame, dtype=np.int64).reshape(-1)
        pixels = np.asarray(self.pixels, dtype=float).reshape(-1, 2)
        frame_time = np.asarray(self.frame_time, dtype=float).reshape(-1)
        if not (track_id.shape[0] == frame.shape[0] == pixels.shape[0] == frame_time.shape[0]):
            raise InvalidInputError("track columns must have the same length")
        if not (np.all(np.isfinite(pixels)) and np.all(np.isfinite(frame_time))):
            raise InvalidInputError("observations must be finite")
        object.__setattr__(self, "track_id", track_id)
        object.__setattr__(self, "frame", frame)
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(self, "frame_time", frame_time)

    @classmethod
    def empty(cls) -> "TrackSet":
        return cls(np.zeros(0), np.zeros(0), np.zeros((0, 2)), np.zeros(0))

    def __len__(self) -> int:
        return int(self.track_id.shape[0])

    def observation(self, i: int) -> Observation:
        """Get row i as an Observation."""
        return Observation(
            track_id=int(self.track_id[i]),
            frame_index=int(self.frame[i]),
            pixel=self.pixels[i],
            frame_start_time=float(self.frame_time[i]),
        )

    def select(self, mask: NDArray[np.bool_]) -> "TrackSet":
        """Keep the rows where mask is true."""
        return TrackSet(
            self.track_id[mask], self.frame[mask], self.pixels[mask], self.frame_time[mask]
        )

    def sorted(self) -> "TrackSet":
        """Rows ordered by (track_id, frame)."""
        order = np.lexsort((self.frame, self.track_id))
        return TrackSet(
            self.track_id[order], self.frame[order], self.pixels[order], self.frame_time[order]
        )


@dataclass(frozen=True, eq=False)
class Landmark:
    """An inverse-depth landmark anchored at its reference observation.

    Attributes:
        track_id: Landmark track identifier
        reference: First observation of the track
        inverse_depth: Inverse distance along the reference ray (1/m); 0 = at infinity
    """

    track_id: int
    reference: Observation
    inverse_depth: float = 0.0

    def __post_init__(self) -> None:
        if not np.isfinite(self.inverse_depth) or self.inverse_depth < 0:
            raise InvalidInputError(
                f"inverse depth must be finite and >= 0, got {self.inverse_depth}"
            )


# =============================================================================
# Residual weighting
# =============================================================================


@dataclass(frozen=True)
class ResidualPrediction:
    """Predicted residual variance for one measurement modality.

    Attributes:
        sigma_e2: Approximation-error variance
        sigma_f2: Filtered (kept) noise variance
        sigma_r2: Total predicted residual variance
        gamma: Residual weight, 1 / sigma_r2
    """

    sigma_e2: float
    sigma_f2: float
    sigma_r2: float
    gamma: float

    def to_dict(self) -> dict[str, float]:
        return {
            "sigma_e2": self.sigma_e2,
            "sigma_f2": self.sigma_f2,
            "sigma_r2": self.sigma_r2,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ResidualPrediction":
        return cls(
            sigma_e2=float(data["sigma_e2"]),
            sigma_f2=float(data["sigma_f2"]),
            sigma_r2=float(data["sigma_r2"]),
            gamma=float(data["gamma"]),
        )


@dataclass(frozen=True)
class ResidualWeightPlan:
    """Knot spacings and IMU residual weights for a fusion run.

    Attributes:
        dt_so3: Knot spacing of the rotation spline (s)
        dt_r3: Knot spacing of the position spline (s)
        gyro: Gyroscope residual prediction
        accel: Accelerometer residual prediction
        requested_quality: (q_gyro, q_accel); None for fixed-spacing plans
    """

    dt_so3: float
    dt_r3: float
    gyro: ResidualPrediction
    accel: ResidualPrediction
    requested_quality: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if not (self.dt_so3 > 0 and self.dt_r3 > 0):
            raise InvalidInputError("knot spacings must be positive")

    def to_dict(self) -> dict[str, Any]:
        result: dict[str, Any] = {
            "dt_so3": self.dt_so3,
            "dt_r3": self.dt_r3,
            "gyro": self.gyro.to_dict(),
            "accel": self.accel.to_dict(),
        }
        if self.requested_quality is not None:
            result["requested_quality"] = {
                "gyro": self.requested_quality[0],
                "accel": self.requested_quality[1],
            }
        return result

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ResidualWeightPlan":
        quality = data.get("requested_quality")
        return cls(
            dt_so3=float(data["dt_so3"]),
            dt_r3=float(data["dt_r3"]),
            gyro=ResidualPrediction.from_dict(data["gyro"]),
            accel=ResidualPrediction.from_dict(data["accel"]),
            requested_quality=(
                (float(quality["gyro"]), float(quality["accel"])) if quality else None
            ),
        )


# =============================================================================
# Fusion configuration and results
# =============================================================================


@dataclass
class FusionConfig:
    """Settings for weight planning and the fusion solver.

    Attributes:
        quality_gyro: Requested gyroscope quality in (0, 1]
        quality_accel: Requested accelerometer quality in (0, 1]
        sigma_gyro: Gyroscope noise standard deviation (rad/s)
        sigma_accel: Accelerometer noise standard deviation (m/s^2)
        huber_c: Huber cut-off for image residuals (pixels)
        dt_max: Largest knot spacing the planner may select (s)
        max_iterations: Solver iteration limit
        cost_tol: Relative cost decrease below which the solver stops
        gradient_tol: Gradient max-norm below which the solver stops
        initial_damping: Starting Levenberg-Marquardt damping
        gravity: World gravity vector (m/s^2)
        weight_scale_factor: Common multiplier on both IMU weights
        estimate_biases: Whether IMU biases are free parameters
        knot_margin: Extra knots on each side of the measurement span
        coarse_knot_spacing: Knot spacing of the warm-up solve that starts finer
            plans (s); 0 solves at the plan spacing from the cold start
    """

    quality_gyro: float = 0.99
    quality_accel: float = 0.97
    sigma_gyro: float = 0.01
    sigma_accel: float = 0.05
    huber_c: float = 2.0
    dt_max: float = 0.5
    max_iterations: int = 100
    cost_tol: float = 1e-10
    gradient_tol: float = 1e-8
    initial_damping: float = 1e-4
    gravity: tuple[float, float, float] = GRAVITY
    weight_scale_factor: float = 1.0
    estimate_biases: bool = True
    knot_margin: int = 1
    coarse_knot_spacing: float = 0.1

    def __post_init__(self) -> None:
        for name in ("quality_gyro", "quality_accel"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} must be in (0, 1], got {value}")
        for name in ("cost_tol", "gradient_tol", "huber_c", "dt_max", "weight_scale_factor"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.sigma_gyro < 0 or self.sigma_accel < 0:
            raise ConfigError("noise standard deviations must be nonnegative")
        if self.max_iterations < 0 or self.knot_margin < 0 or self.coarse_knot_spacing < 0:
            raise ConfigError(
                "max_iterations, knot_margin and coarse_knot_spacing must be nonnegative"
            )
        self.gravity = tuple(float(g) for g in self.gravity)  # type: ignore[assignment]
        if len(self.gravity) != 3:
            raise ConfigError("gravity must have 3 components")

    def to_dict(self) -> dict[str, Any]:
        return {
            "quality_gyro": self.quality_gyro,
            "quality_accel": self.quality_accel,
            "sigma_gyro": self.sigma_gyro,
            "sigma_accel": self.sigma_accel,
            "huber_c": self.huber_c,
            "dt_max": self.dt_max,
            "max_iterations": self.max_iterations,
            "cost_tol": self.cost_tol,
            "gradient_tol": self.gradient_tol,
            "initial_damping": self.initial_damping,
            "gravity": list(self.gravity),
            "weight_scale_factor": self.weight_scale_factor,
            "estimate_biases": self.estimate_biases,
            "knot_margin": self.knot_margin,
            "coarse_knot_spacing": self.coarse_knot_spacing,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FusionConfig":
        """Create FusionConfig from dictionary; missing keys use defaults."""
        _check_keys("fusion", data, set(cls().to_dict()))
        values = dict(data)
        if "gravity" in values:
            values["gravity"] = _float_tuple("fusion", "gravity", values["gravity"])
        return _construct("fusion", cls, values)


@dataclass
class FusionReport:
    """Solver outcome.

    Attributes:
        initial_cost: Total cost at the starting point
        final_cost: Total cost at the returned point
        iterations: Number of solver iterations performed
        termination: Why the solver stopped
        residual_stats: Per-modality mean and std of weighted residuals
        invalid_blocks: Reprojection blocks failing cheirality at the end
    """

    initial_cost: float
    final_cost: float
    iterations: int
    termination: str
    residual_stats: dict[str, dict[str, float]] = field(default_factory=dict)
    invalid_blocks: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "initial_cost": self.initial_cost,
            "final_cost": self.final_cost,
            "iterations": self.iterations,
            "termination": self.termination,
            "residual_stats": self.residual_stats,
            "invalid_blocks": self.invalid_blocks,
        }


@dataclass
class Metrics:
    """Trajectory evaluation metrics (meters / fraction)."""

    epe: float
    epd: float | None = None
    scale_error: float | None = None

    def to_dict(self) -> dict[str, float]:
        result = {"epe": self.epe}
        if self.epd is not None:
            result["epd"] = self.epd
        if self.scale_error is not None:
            result["scale_error"] = self.scale_error
        return result


# =============================================================================
# Scenario configuration
# =============================================================================


@dataclass(frozen=True)
class Band:
    """One band of filtered white noise.

    Attributes:
        low: Lower band edge (Hz)
        high: Upper band edge (Hz)
        amplitude: Standard deviation of the band's contribution
    """

    low: float
    high: float
    amplitude: float

    def __post_init__(self) -> None:
        if self.low < 0 or self.high <= self.low:
            raise ConfigError(
                f"band edges must satisfy 0 <= low < high, got {self.low}, {self.high}"
            )
        if self.amplitude < 0:
            raise ConfigError("band amplitude must be nonnegative")

    def to_dict(self) -> dict[str, float]:
        return {"low": self.low, "high": self.high, "amplitude": self.amplitude}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Band":
        return cls(
            low=float(data["low"]), high=float(data["high"]), amplitude=float(data["amplitude"])
        )


def _bands(value: Any) -> tuple[Band, ...]:
    return tuple(b if isinstance(b, Band) else Band.from_dict(b) for b in value)


@dataclass
class ScenarioConfig:
    """Synthetic scenario description.

    Attributes:
        seed: Random seed; every generator is a deterministic function of it
        duration: Scenario length (s)
        imu_rate: IMU sample rate (Hz)
        frame_rate: Camera frame rate (Hz)
        readout_time: Rolling-shutter readout time (s)
        n_landmarks: Number of landmarks generated
        landmark_distance: (min, max) landmark distance from the start pose (m)
        landmark_cone_deg: Half-angle of the cone landmarks are placed in (deg)
        position_bands: Band plan driving the position (m)
        rotation_bands: Band plan driving the rotation vector (rad)
        sigma_gyro: Gyroscope noise std (rad/s)
        sigma_accel: Accelerometer noise std (m/s^2)
        pixel_noise: Pixel noise std (px)
        gyro_bias: True gyroscope bias (rad/s)
        accel_bias: True accelerometer bias (m/s^2)
        outlier_rate: Fraction of observations replaced by uniform outliers
        closed_loop: Force the trajectory to end where it started
        truth_knot_spacing: Ground-truth knot spacing (s); None = 4 / imu_rate
        gravity: World gravity (m/s^2)
        camera: Camera model
    """

    seed: int = 0
    duration: float = 6.0
    imu_rate: float = 300.0
    frame_rate: float = 30.0
    readout_time: float = 0.03
    n_landmarks: int = 60
    landmark_distance: tuple[float, float] = (2.0, 30.0)
    landmark_cone_deg: float = 30.0
    position_bands: tuple[Band, ...] = (Band(0.0, 0.5, 0.5), Band(0.5, 2.0, 0.05))
    rotation_bands: tuple[Band, ...] = (Band(0.0, 0.5, 0.3), Band(0.5, 2.0, 0.03))
    sigma_gyro: float = 0.01
    sigma_accel: float = 0.05
    pixel_noise: float = 0.5
    gyro_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    accel_bias: tuple[float, float, float] = (0.0, 0.0, 0.0)
    outlier_rate: float = 0.0
    closed_loop: bool = False
    truth_knot_spacing: float | None = None
    gravity: tuple[float, float, float] = GRAVITY
    camera: CameraModel | None = None

    def __post_init__(self) -> None:
        if self.duration < 2.0:
            raise ConfigError(f"duration must be at least 2 s, got {self.duration}")
        if self.imu_rate <= 0 or self.frame_rate <= 0:
            raise ConfigError("rates must be positive")
        if self.n_landmarks < 0:
            raise ConfigError("n_landmarks must be nonnegative")
        if not 0.0 <= self.outlier_rate <= 1.0:
            raise ConfigError("outlier_rate must be in [0, 1]")
        lo, hi = self.landmark_distance
        if not 0 < lo <= hi:
            raise ConfigError("landmark_distance must satisfy 0 < min <= max")
        self.position_bands = _bands(self.position_bands)
        self.rotation_bands = _bands(self.rotation_bands)
        if self.camera is None:
            self.camera = CameraModel(
                readout_time=self.readout_time, frame_period=1.0 / self.frame_rate
            )
        elif isinstance(self.camera, dict):
            camera = dict(self.camera)
            camera.setdefault("readout_time", self.readout_time)
            camera.setdefault("frame_period", 1.0 / self.frame_rate)
            self.camera = CameraModel.from_dict(camera)

    @property
    def knot_spacing(self) -> float:
        """Ground-truth knot spacing in seconds."""
        return self.truth_knot_spacing or 4.0 / self.imu_rate

    def to_dict(self) -> dict[str, Any]:
        assert self.camera is not None
        return {
            "seed": self.seed,
            "duration": self.duration,
            "imu_rate": self.imu_rate,
            "frame_rate": self.frame_rate,
            "readout_time": self.readout_time,
            "n_landmarks": self.n_landmarks,
            "landmark_distance": list(self.landmark_distance),
            "landmark_cone_deg": self.landmark_cone_deg,
            "position_bands": [b.to_dict() for b in self.position_bands],
            "rotation_bands": [b.to_dict() for b in self.rotation_bands],
            "sigma_gyro": self.sigma_gyro,
            "sigma_accel": self.sigma_accel,
            "pixel_noise": self.pixel_noise,
            "gyro_bias": list(self.gyro_bias),
            "accel_bias": list(self.accel_bias),
            "outlier_rate": self.outlier_rate,
            "closed_loop": self.closed_loop,
            "truth_knot_spacing": self.truth_knot_spacing,
            "gravity": list(self.gravity),
            "camera": self.camera.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        """Create ScenarioConfig from dictionary; missing keys use defaults."""
        _check_keys("scenario", data, set(cls().to_dict()))
        values = dict(data)
        for key in ("landmark_distance", "gyro_bias", "accel_bias", "gravity"):
            if key in values:
                values[key] = _float_tuple("scenario", key, values[key])
        return _construct("scenario", cls, values)
