"""
Sensor Models.

Measurement prediction for the gyroscope, the accelerometer, rolling-shutter
observation timing and inverse-depth landmark reprojection, plus the Huber
norm applied to image residuals.

Conventions:
    - Poses are body-to-world: x_world = R @ x_body + p.
    - The camera frame is the body frame (identity extrinsics); z points
      along the optical axis.
    - The accelerometer measures specific force R^T (p'' - g). With the
      default gravity (0, 0, -9.81) a device at rest with identity
      orientation reads (0, 0, +9.81).
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .bspline import Trajectory
from .errors import CheiralityError, InvalidInputError
from .models import GRAVITY, CameraModel, FloatArray, ImuBiases, Observation

# Minimum depth for a point to count as in front of the camera.
MIN_DEPTH = 1e-9


@dataclass(frozen=True, eq=False)
class Pose:
    """Body-to-world rigid transform.

    Attributes:
        rotation: 3x3 rotation matrix
        position: Body origin in world coordinates (m)
    """

    rotation: FloatArray
    position: FloatArray

    def __post_init__(self) -> None:
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3, 3))
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_trajectory(cls, traj: Trajectory, t: float) -> "Pose":
        return cls(traj.rotation.evaluate(t), traj.position.evaluate(t))


# =============================================================================
# Timing
# =============================================================================


def observation_time(
    frame_time: ArrayLike, v: ArrayLike, camera: CameraModel
) -> FloatArray | float:
    """Capture time of an image row under a rolling shutter.

    Args:
        frame_time: Frame start time t_m (s)
        v: Pixel row, 0 <= v <= image height
        camera: Camera model with readout time and row count

    Returns:
        t_m + readout_time * v / height

    Raises:
        InvalidInputError: If v lies outside the image
    """
    rows = np.asarray(v, dtype=float)
    if np.any(rows < 0) or np.any(rows > camera.height) or not np.all(np.isfinite(rows)):
        raise InvalidInputError(f"pixel row outside image of height {camera.height}")
    times = np.asarray(frame_time, dtype=float) + camera.readout_time * rows / camera.height
    return float(times) if times.ndim == 0 else times


# =============================================================================
# Inertial prediction
# =============================================================================


def predict_gyro(
    traj: Trajectory,
    t: ArrayLike,
    biases: ImuBiases | None = None,
    imu_rotation: ArrayLike | None = None,
) -> FloatArray:
    """Predicted gyroscope reading(s) in rad/s.

    Args:
        traj: Trajectory
        t: Time or array of times inside the valid interval
        biases: IMU biases (zero when omitted)
        imu_rotation: Fixed rotation from IMU to body frame (identity when omitted)
    """
    omega = traj.rotation.angular_velocity(t)
    if imu_rotation is not None:
        omega = omega @ np.asarray(imu_rotation, dtype=float)
    if biases is not None:
        omega = omega + biases.gyro
    return omega


def predict_accel(
    traj: Trajectory,
    t: ArrayLike,
    biases: ImuBiases | None = None,
    gravity: ArrayLike = GRAVITY,
    imu_rotation: ArrayLike | None = None,
) -> FloatArray:
    """Predicted accelerometer reading(s) R^T (p'' - g) + b_a in m/s^2."""
    rotation = traj.rotation.evaluate(t)
    accel = traj.position.evaluate(t, 2) - np.asarray(gravity, dtype=float)
    specific = np.einsum("...ji,...j->...i", rotation, accel)
    if imu_rotation is not None:
        specific = specific @ np.asarray(imu_rotation, dtype=float)
    if biases is not None:
        specific = specific + biases.accel
    return np.asarray(specific, dtype=float)


# =============================================================================
# Camera
# =============================================================================


def backproject_ray(pixel: ArrayLike, camera: CameraModel) -> FloatArray:
    """Unit-norm viewing ray(s) through pixel(s) (..., 2) -> (..., 3)."""
    px = np.asarray(pixel, dtype=float)
    x = (px[..., 0] - camera.cx) / camera.fx
    y = (px[..., 1] - camera.cy) / camera.fy
    rays = np.stack([x, y, np.ones_like(x)], axis=-1)
    return np.asarray(rays / np.linalg.norm(rays, axis=-1, keepdims=True), dtype=float)


def project(
    points: ArrayLike, camera: CameraModel
) -> tuple[FloatArray, NDArray[np.bool_]]:
    """Pinhole projection of camera-frame points.

    Args:
        points: Array (..., 3); any positive scale of a point projects alike
        camera: Camera model

    Returns:
        (pixels, valid): pixels (..., 2), NaN where the point is not in
        front of the camera, and the cheirality mask
    """
    pts = np.asarray(points, dtype=float)
    z = pts[..., 2]
    valid = z > MIN_DEPTH
    safe_z = np.where(valid, z, 1.0)
    u = camera.fx * pts[..., 0] / safe_z + camera.cx
    v = camera.fy * pts[..., 1] / safe_z + camera.cy
    pixels = np.stack([u, v], axis=-1)
    pixels[~valid] = np.nan
    return pixels, valid


def transfer_points(
    rays: FloatArray,
    rho: FloatArray,
    rot_ref: FloatArray,
    pos_ref: FloatArray,
    rot_obs: FloatArray,
    pos_obs: FloatArray,
) -> FloatArray:
    """Homogeneous landmark coordinates in the observing camera frame.

    Returns R_o^T R_r ray + rho R_o^T (p_r - p_o), which is rho times the
    landmark position in the observing frame (the direction alone at rho = 0).
    """
    world_dir = np.einsum("...ij,...j->...i", rot_ref, rays)
    offset = np.asarray(rho)[..., None] * (pos_ref - pos_obs)
    return np.asarray(np.einsum("...ji,...j->...i", rot_obs, world_dir + offset), dtype=float)


def reproject(
    ref_obs: Observation, rho: float, pose_ref: Pose, pose_obs: Pose, camera: CameraModel
) -> FloatArray:
    """Reproject a reference observation into another pose.

    Args:
        ref_obs: Reference observation of the landmark
        rho: Inverse depth along the reference ray (0 = at infinity)
        pose_ref: Body pose at the reference observation time
        pose_obs: Body pose at the target observation time
        camera: Camera model

    Returns:
        Predicted pixel (2,)

    Raises:
        CheiralityError: If the landmark is not in front of the target camera
    """
    if not (np.isfinite(rho) and rho >= 0):
        raise InvalidInputError(f"inverse depth must be >= 0, got {rho}")
    ray = backproject_ray(ref_obs.pixel, camera)
    point = transfer_points(
        ray,
        np.asarray(rho),
        pose_ref.rotation,
        pose_ref.position,
        pose_obs.rotation,
        pose_obs.position,
    )
    pixel, valid = project(point, camera)
    if not bool(valid):
        raise CheiralityError(
            f"landmark of track {ref_obs.track_id} is behind the camera (z={point[2]:.3g})"
        )
    return pixel


# =============================================================================
# Robust norm
# =============================================================================


def huber_cost(residual: ArrayLike, c: float = 2.0) -> float:
    """Huber norm of a residual vector: s^2 inside c, 2cs - c^2 outside."""
    s = float(np.linalg.norm(np.asarray(residual, dtype=float)))
    return s * s if s <= c else 2.0 * c * s - c * c


def huber_weights(norms: ArrayLike, c: float = 2.0) -> FloatArray:
    """Iteratively reweighted least-squares weights min(1, c / s)."""
    s = np.asarray(norms, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(s <= c, 1.0, c / np.where(s > 0, s, 1.0))
