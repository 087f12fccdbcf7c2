"""
Visual-Inertial Spline Fusion.

Builds the joint cost over trajectory control points, landmark inverse
depths and IMU biases, and minimizes it with a sparse Levenberg-Marquardt
solver:

    J = sum huber(x_obs - reproject(...)) + gamma_g sum |w - w_pred|^2
        + gamma_a sum |a - a_pred|^2

Reprojection blocks are robustified by iteratively reweighted least
squares. Rotation controls are perturbed on the right, R_k Exp(delta_k).
The gauge is a translation and a turn about the gravity axis: the first
position control the data reaches is held fixed, and the first such
rotation control may tilt but not turn. Metric scale comes from the
accelerometer.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse
from scipy.linalg import null_space
from scipy.sparse.linalg import spsolve
from scipy.spatial.transform import Rotation

from . import so3
from .bspline import SplineR3, SplineSO3, Trajectory, make_knot_grid
from .errors import (
    BuildError,
    InvalidInputError,
    OutOfDomainError,
    SolverAbortError,
)
from .models import (
    CameraModel,
    FloatArray,
    FusionConfig,
    FusionReport,
    ImuBiases,
    ImuLog,
    ImuSample,
    Landmark,
    Observation,
    ResidualWeightPlan,
    TrackSet,
)
from .sensors import (
    MIN_DEPTH,
    Pose,
    backproject_ray,
    huber_weights,
    observation_time,
    predict_accel,
    predict_gyro,
    reproject,
    transfer_points,
)

logger = logging.getLogger(__name__)

# Largest IMU gap allowed, in knot intervals of the finer spline.
MAX_IMU_GAP_KNOTS = 5.0

# Damping above which the solver gives up on finding a descent step.
MAX_DAMPING = 1e16


@dataclass(frozen=True, eq=False)
class FusionState:
    """Values of all free variables.

    Attributes:
        trajectory: Rotation and position splines
        inverse_depths: One inverse depth per landmark (1/m)
        biases: IMU biases
    """

    trajectory: Trajectory
    inverse_depths: FloatArray
    biases: ImuBiases


@dataclass(eq=False)
class FusionProblem:
    """Measurements, weights and the starting state of a fusion run.

    Use build_problem to construct one.
    """

    camera: CameraModel
    config: FusionConfig
    plan: ResidualWeightPlan
    imu: ImuLog
    tracks: TrackSet
    initial: FusionState
    gamma_gyro: float
    gamma_accel: float
    landmark_ids: NDArray[np.int64]
    reference_rows: NDArray[np.int64]
    observation_times: FloatArray
    gravity: FloatArray = field(default_factory=lambda: np.array([0.0, 0.0, -9.81]))
    landmark_index: NDArray[np.int64] = field(init=False, repr=False)
    block_rows: NDArray[np.int64] = field(init=False, repr=False)
    block_reference: NDArray[np.int64] = field(init=False, repr=False)
    reference_rays: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        # Per-observation landmark index and reference row, and the
        # non-reference observations that form reprojection blocks.
        lookup = {int(tid): i for i, tid in enumerate(self.landmark_ids)}
        self.landmark_index = np.array(
            [lookup[int(t)] for t in self.tracks.track_id], dtype=np.int64
        )
        self.block_rows = np.setdiff1d(np.arange(len(self.tracks)), self.reference_rows)
        ref_of_landmark = self.reference_rows[self.landmark_index[self.block_rows]]
        self.block_reference = ref_of_landmark
        self.reference_rays = backproject_ray(self.tracks.pixels[ref_of_landmark], self.camera)

    @property
    def n_landmarks(self) -> int:
        return int(self.landmark_ids.shape[0])

    def landmarks(self, state: FusionState) -> list[Landmark]:
        """Landmarks with their reference observations and current inverse depths."""
        return [
            Landmark(int(tid), self.tracks.observation(int(row)), float(rho))
            for tid, row, rho in zip(
                self.landmark_ids, self.reference_rows, state.inverse_depths, strict=True
            )
        ]


class FusionResult(NamedTuple):
    """Solver output; unpacks as (trajectory, landmarks, biases, report)."""

    trajectory: Trajectory
    landmarks: list[Landmark]
    biases: ImuBiases
    report: FusionReport

    @property
    def state(self) -> FusionState:
        rho = np.array([lm.inverse_depth for lm in self.landmarks], dtype=float)
        return FusionState(self.trajectory, rho, self.biases)


# =============================================================================
# Problem assembly
# =============================================================================


def build_problem(
    tracks: TrackSet,
    imu: ImuLog,
    camera: CameraModel,
    plan: ResidualWeightPlan,
    config: FusionConfig | None = None,
) -> FusionProblem:
    """Assemble a fusion problem from measurements and a weight plan.

    Splines cover every IMU sample and rolling-shutter observation time.
    Control points start at zero position and identity rotation, and every
    landmark starts at infinity (inverse depth 0).

    Args:
        tracks: Landmark observations
        imu: Inertial log
        camera: Camera model
        plan: Knot spacings and IMU weights
        config: Fusion settings (defaults when omitted)

    Returns:
        FusionProblem ready for optimize

    Raises:
        BuildError: On empty tracks, landmarks with fewer than 2 observations
            only, observations outside the image, or large IMU gaps
    """
    config = config or FusionConfig()
    if len(tracks) == 0:
        raise BuildError("no landmark observations")

    tracks = tracks.sorted()
    ids, counts = np.unique(tracks.track_id, return_counts=True)
    short = ids[counts < 2]
    if short.size:
        logger.warning("dropping %d track(s) with a single observation", short.size)
        tracks = tracks.select(~np.isin(tracks.track_id, short))
        ids = ids[counts >= 2]
    if ids.size == 0:
        raise BuildError("no landmark has at least 2 observations")

    try:
        obs_times = np.asarray(
            observation_time(tracks.frame_time, tracks.pixels[:, 1], camera), dtype=float
        )
    except InvalidInputError as exc:
        raise BuildError(f"observation outside the image: {exc}") from exc

    finest = min(plan.dt_so3, plan.dt_r3)
    gap = float(np.max(np.diff(imu.times)))
    if gap > MAX_IMU_GAP_KNOTS * finest:
        raise BuildError(
            f"IMU gap of {gap:.4g} s exceeds {MAX_IMU_GAP_KNOTS:g} knot intervals ({finest:.4g} s)"
        )

    t_start = min(float(imu.times[0]), float(obs_times.min()))
    t_end = max(float(imu.times[-1]), float(obs_times.max()))
    rot_t0, rot_count = make_knot_grid(t_start, t_end, plan.dt_so3, config.knot_margin)
    pos_t0, pos_count = make_knot_grid(t_start, t_end, plan.dt_r3, config.knot_margin)
    trajectory = Trajectory(
        rotation=SplineSO3.identity(plan.dt_so3, rot_t0, rot_count),
        position=SplineR3(plan.dt_r3, pos_t0, np.zeros((pos_count, 3))),
    )

    # First observation of each track is its reference.
    first = np.r_[True, tracks.track_id[1:] != tracks.track_id[:-1]]
    reference_rows = np.flatnonzero(first)

    problem = FusionProblem(
        camera=camera,
        config=config,
        plan=plan,
        imu=imu,
        tracks=tracks,
        initial=FusionState(trajectory, np.zeros(ids.size), ImuBiases()),
        gamma_gyro=plan.gyro.gamma * config.weight_scale_factor,
        gamma_accel=plan.accel.gamma * config.weight_scale_factor,
        landmark_ids=ids.astype(np.int64),
        reference_rows=reference_rows,
        observation_times=obs_times,
        gravity=np.asarray(config.gravity, dtype=float),
    )
    logger.info(
        "built problem: %d landmarks, %d reprojection blocks, %d IMU samples, "
        "%d rotation / %d position controls",
        problem.n_landmarks,
        problem.block_rows.size,
        len(imu),
        rot_count,
        pos_count,
    )
    return problem


def resample_state(problem: FusionProblem, state: FusionState) -> FusionState:
    """Carry a state onto the knot grids of another problem.

    Each rotation control takes the rotation of `state` at its own knot
    time. Position controls are the least-squares spline fit to the
    positions of `state`, sampled four times per knot interval. Times
    outside the valid interval of `state` are clamped to it. Inverse depths
    and biases are copied, so both problems must share their tracks.

    Raises:
        InvalidInputError: If the landmark counts differ
    """
    if state.inverse_depths.shape != (problem.n_landmarks,):
        raise InvalidInputError(
            f"state has {state.inverse_depths.size} landmarks, problem has {problem.n_landmarks}"
        )
    source = state.trajectory
    lo, hi = source.valid_interval
    grid = problem.initial.trajectory

    rot = grid.rotation
    knot_times = rot.t0 + rot.knot_spacing * np.arange(rot.n_controls)
    rotation = SplineSO3.from_matrices(
        rot.knot_spacing, rot.t0, source.rotation.evaluate(np.clip(knot_times, lo, hi))
    )

    pos = grid.position
    p_lo, p_hi = pos.valid_interval
    times = np.linspace(p_lo, p_hi, 4 * (pos.n_controls - 3) + 1)
    index, w = pos.weights(times)
    design = sparse.csc_matrix(
        (
            w.reshape(-1),
            (np.repeat(np.arange(times.size), 4), (index[:, None] + np.arange(4)).reshape(-1)),
        ),
        shape=(times.size, pos.n_controls),
    )
    target = source.position.evaluate(np.clip(times, lo, hi))
    normal = (design.T @ design).tocsc()
    rhs = np.asarray(design.T @ target)
    controls = np.column_stack([spsolve(normal, rhs[:, i]) for i in range(3)])
    position = SplineR3(pos.knot_spacing, pos.t0, controls)

    return FusionState(
        Trajectory(rotation, position), state.inverse_depths.copy(), state.biases
    )


# =============================================================================
# Single-block residuals
# =============================================================================


def residual_reprojection(
    obs: Observation, landmark: Landmark, trajectory: Trajectory, camera: CameraModel
) -> FloatArray:
    """Observed minus reprojected pixel for one observation.

    Both the reference and the current observation are evaluated at their
    rolling-shutter row times.

    Raises:
        CheiralityError: If the landmark is behind the observing camera
    """
    ref = landmark.reference
    t_ref = float(observation_time(ref.frame_start_time, ref.pixel[1], camera))
    t_obs = float(observation_time(obs.frame_start_time, obs.pixel[1], camera))
    predicted = reproject(
        ref,
        landmark.inverse_depth,
        Pose.from_trajectory(trajectory, t_ref),
        Pose.from_trajectory(trajectory, t_obs),
        camera,
    )
    return np.asarray(obs.pixel, dtype=float) - predicted


def residual_gyro(sample: ImuSample, trajectory: Trajectory, biases: ImuBiases) -> FloatArray:
    """Measured minus predicted angular velocity (unweighted)."""
    return np.asarray(sample.omega, dtype=float) - predict_gyro(trajectory, sample.t, biases)


def residual_accel(
    sample: ImuSample,
    trajectory: Trajectory,
    biases: ImuBiases,
    gravity: ArrayLike = (0.0, 0.0, -9.81),
) -> FloatArray:
    """Measured minus predicted specific force (unweighted)."""
    return np.asarray(sample.accel, dtype=float) - predict_accel(
        trajectory, sample.t, biases, gravity
    )


# =============================================================================
# Vectorized residuals and Jacobians
# =============================================================================


@dataclass(frozen=True)
class _Layout:
    n_rot: int
    n_pos: int
    n_landmarks: int
    biases: bool

    @property
    def rot(self) -> int:
        return 0

    @property
    def pos(self) -> int:
        return 3 * self.n_rot

    @property
    def rho(self) -> int:
        return self.pos + 3 * self.n_pos

    @property
    def bias(self) -> int:
        return self.rho + self.n_landmarks

    @property
    def size(self) -> int:
        return self.bias + (6 if self.biases else 0)


def _layout(problem: FusionProblem, state: FusionState) -> _Layout:
    return _Layout(
        n_rot=state.trajectory.rotation.n_controls,
        n_pos=state.trajectory.position.n_controls,
        n_landmarks=problem.n_landmarks,
        biases=problem.config.estimate_biases,
    )


def _step_basis(
    problem: FusionProblem, state: FusionState, active: NDArray[np.bool_]
) -> sparse.csc_matrix:
    """Columns spanning the steps the solver may take, in the full layout.

    Parameters without Jacobian entries stay put. The first position
    control the data reaches is held fixed. The first such rotation control
    keeps its two tilt directions and loses the turn about gravity; with
    zero gravity it is held fixed.
    """
    layout = _layout(problem, state)
    keep = active.copy()
    rows: list[int] = []
    values: list[float] = []

    pos_used = active[layout.pos : layout.rho].reshape(-1, 3).any(axis=1)
    if pos_used.any():
        first = layout.pos + 3 * int(np.argmax(pos_used))
        keep[first : first + 3] = False

    tilt = np.zeros((3, 0))
    rot_used = active[layout.rot : layout.pos].reshape(-1, 3).any(axis=1)
    if rot_used.any():
        k = int(np.argmax(rot_used))
        first = layout.rot + 3 * k
        keep[first : first + 3] = False
        up = -problem.gravity
        norm = float(np.linalg.norm(up))
        if norm > 0:
            # Right perturbations about R_k^T up turn the control about gravity.
            axis = state.trajectory.rotation.matrices[k].T @ (up / norm)
            tilt = null_space(axis[None, :])
            rows = [first + i for i in range(3) for _ in range(tilt.shape[1])]
            values = tilt.reshape(-1).tolist()

    free = np.flatnonzero(keep)
    n_free = free.size
    cols = [n_free + j for _ in range(3) for j in range(tilt.shape[1])]
    row_index = np.r_[free, rows].astype(np.int64)
    col_index = np.r_[np.arange(n_free), cols].astype(np.int64)
    return sparse.csc_matrix(
        (np.r_[np.ones(n_free), values], (row_index, col_index)),
        shape=(layout.size, n_free + tilt.shape[1]),
    )


class _Triplets:
    """COO accumulator for dense sub-blocks."""

    def __init__(self) -> None:
        self.rows: list[NDArray[np.int64]] = []
        self.cols: list[NDArray[np.int64]] = []
        self.vals: list[FloatArray] = []

    def add(self, row0: NDArray[np.int64], col0: NDArray[np.int64], values: FloatArray) -> None:
        """Add values (B, rd, cd) at rows row0 + [0, rd) and columns col0 + [0, cd)."""
        _, rd, cd = values.shape
        rows = row0[:, None, None] + np.arange(rd)[None, :, None]
        cols = col0[:, None, None] + np.arange(cd)[None, None, :]
        rows, cols = np.broadcast_arrays(rows, cols)
        self.rows.append(rows.reshape(-1))
        self.cols.append(cols.reshape(-1))
        self.vals.append(values.reshape(-1))

    def to_csr(self, shape: tuple[int, int]) -> sparse.csr_matrix:
        if not self.rows:
            return sparse.csr_matrix(shape)
        return sparse.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=shape,
        ).tocsr()


@dataclass
class _Linearization:
    residuals: FloatArray
    jacobian: sparse.csr_matrix | None
    cost: dict[str, float]
    invalid: int
    pixel_residuals: FloatArray
    gyro_residuals: FloatArray
    accel_residuals: FloatArray


def _linearize(problem: FusionProblem, state: FusionState, with_jacobian: bool) -> _Linearization:
    traj = state.trajectory
    layout = _layout(problem, state)
    camera = problem.camera
    c = problem.config.huber_c
    triplets = _Triplets()

    # --- reprojection -------------------------------------------------------
    rows = problem.block_rows
    refs = problem.block_reference
    n_blocks = rows.size
    t_obs = problem.observation_times[rows]
    t_ref = problem.observation_times[refs]
    lm = problem.landmark_index[rows]
    rho = state.inverse_depths[lm]

    if with_jacobian:
        i_ro, rot_o, d_rot_o, _, _ = traj.rotation.local_jacobians(t_obs)
        i_rr, rot_r, d_rot_r, _, _ = traj.rotation.local_jacobians(t_ref)
    else:
        rot_o = traj.rotation.evaluate(t_obs).reshape(-1, 3, 3)
        rot_r = traj.rotation.evaluate(t_ref).reshape(-1, 3, 3)
    pos_o = traj.position.evaluate(t_obs).reshape(-1, 3)
    pos_r = traj.position.evaluate(t_ref).reshape(-1, 3)
    rays = problem.reference_rays

    points = transfer_points(rays, rho, rot_r, pos_r, rot_o, pos_o)
    z = points[:, 2]
    valid = z > MIN_DEPTH
    safe_z = np.where(valid, z, 1.0)
    predicted = np.stack(
        [
            camera.fx * points[:, 0] / safe_z + camera.cx,
            camera.fy * points[:, 1] / safe_z + camera.cy,
        ],
        axis=1,
    )
    pixel_res = np.where(valid[:, None], problem.tracks.pixels[rows] - predicted, 0.0)
    norms = np.linalg.norm(pixel_res, axis=1)
    huber = np.where(norms <= c, norms**2, 2.0 * c * norms - c * c)
    sqrt_w = np.sqrt(huber_weights(norms, c)) * valid
    reproj_res = sqrt_w[:, None] * pixel_res

    # --- inertial -----------------------------------------------------------
    t_imu = problem.imu.times
    n_imu = t_imu.shape[0]
    sg = np.sqrt(problem.gamma_gyro)
    sa = np.sqrt(problem.gamma_accel)
    if with_jacobian:
        i_imu, rot_imu, d_rot_imu, omega, d_omega = traj.rotation.local_jacobians(t_imu)
    else:
        rot_imu = traj.rotation.evaluate(t_imu).reshape(-1, 3, 3)
        omega = traj.rotation.angular_velocity(t_imu).reshape(-1, 3)
    i_pos2, w_pos2 = traj.position.weights(t_imu, 2)
    accel_world = traj.position.evaluate(t_imu, 2).reshape(-1, 3) - problem.gravity
    specific = np.einsum("mji,mj->mi", rot_imu, accel_world)
    gyro_raw = problem.imu.gyro - omega - state.biases.gyro
    accel_raw = problem.imu.accel - specific - state.biases.accel

    residuals = np.concatenate(
        [reproj_res.reshape(-1), (sg * gyro_raw).reshape(-1), (sa * accel_raw).reshape(-1)]
    )
    cost = {
        "reprojection": float(np.sum(huber[valid])),
        "gyro": float(problem.gamma_gyro * np.sum(gyro_raw**2)),
        "accel": float(problem.gamma_accel * np.sum(accel_raw**2)),
    }
    cost["total"] = cost["reprojection"] + cost["gyro"] + cost["accel"]

    jac = None
    if with_jacobian:
        # d pixel / d point, negated and robust-weighted: residual = obs - pred.
        proj = np.zeros((n_blocks, 2, 3))
        proj[:, 0, 0] = camera.fx / safe_z
        proj[:, 0, 2] = -camera.fx * points[:, 0] / safe_z**2
        proj[:, 1, 1] = camera.fy / safe_z
        proj[:, 1, 2] = -camera.fy * points[:, 1] / safe_z**2
        proj *= -sqrt_w[:, None, None]

        rot_o_t = np.swapaxes(rot_o, 1, 2)
        block_row = 2 * np.arange(n_blocks)

        d_point_d_rho = np.einsum("mij,mj->mi", rot_o_t, pos_r - pos_o)
        triplets.add(block_row, layout.rho + lm, (proj @ d_point_d_rho[:, :, None]))

        d_point_d_eps_r = -rot_o_t @ rot_r @ so3.hat(rays)
        d_point_d_eps_o = so3.hat(points)
        i_pr, w_r = traj.position.weights(t_ref)
        i_po, w_o = traj.position.weights(t_obs)
        scaled = rho[:, None, None] * rot_o_t
        for k in range(4):
            triplets.add(block_row, 3 * (i_rr + k), proj @ d_point_d_eps_r @ d_rot_r[:, k])
            triplets.add(block_row, 3 * (i_ro + k), proj @ d_point_d_eps_o @ d_rot_o[:, k])
            triplets.add(
                block_row, layout.pos + 3 * (i_pr + k), proj @ (scaled * w_r[:, k, None, None])
            )
            triplets.add(
                block_row, layout.pos + 3 * (i_po + k), -(proj @ (scaled * w_o[:, k, None, None]))
            )

        gyro_row = 2 * n_blocks + 3 * np.arange(n_imu)
        accel_row = 2 * n_blocks + 3 * n_imu + 3 * np.arange(n_imu)
        d_spec_d_eps = so3.hat(specific)
        rot_imu_t = np.swapaxes(rot_imu, 1, 2)
        for k in range(4):
            triplets.add(gyro_row, 3 * (i_imu + k), -sg * d_omega[:, k])
            triplets.add(accel_row, 3 * (i_imu + k), -sa * d_spec_d_eps @ d_rot_imu[:, k])
            triplets.add(
                accel_row, layout.pos + 3 * (i_pos2 + k), -sa * rot_imu_t * w_pos2[:, k, None, None]
            )
        if layout.biases:
            eye_imu = np.broadcast_to(np.eye(3), (n_imu, 3, 3))
            triplets.add(gyro_row, np.full(n_imu, layout.bias), -sg * eye_imu)
            triplets.add(accel_row, np.full(n_imu, layout.bias + 3), -sa * eye_imu)
        jac = triplets.to_csr((residuals.shape[0], layout.size))

    return _Linearization(
        residuals=residuals,
        jacobian=jac,
        cost=cost,
        invalid=int(n_blocks - np.count_nonzero(valid)),
        pixel_residuals=pixel_res[valid],
        gyro_residuals=sg * gyro_raw,
        accel_residuals=sa * accel_raw,
    )


def residual_vector(problem: FusionProblem, state: FusionState) -> FloatArray:
    """Stacked weighted residuals: reprojection, gyroscope, accelerometer."""
    return _linearize(problem, state, with_jacobian=False).residuals


def jacobian(problem: FusionProblem, state: FusionState) -> sparse.csr_matrix:
    """Sparse Jacobian of residual_vector w.r.t. the full parameter layout.

    Columns: 3 per rotation control (right tangent), 3 per position control,
    1 per inverse depth, then 6 bias entries when biases are estimated.
    Robust weights are treated as constants.
    """
    jac = _linearize(problem, state, with_jacobian=True).jacobian
    assert jac is not None
    return jac


def evaluate_cost(problem: FusionProblem, state: FusionState) -> dict[str, float]:
    """Cost contributions per modality and the total."""
    return _linearize(problem, state, with_jacobian=False).cost


def retract(problem: FusionProblem, state: FusionState, step: ArrayLike) -> FusionState:
    """Apply a parameter step in the full layout; inverse depths stay >= 0."""
    layout = _layout(problem, state)
    dx = np.asarray(step, dtype=float)
    if dx.shape != (layout.size,):
        raise InvalidInputError(f"step must have {layout.size} entries, got {dx.shape}")
    traj = state.trajectory
    rot = traj.rotation
    delta = dx[layout.rot : layout.pos].reshape(-1, 3)
    rotation = SplineSO3.from_matrices(rot.knot_spacing, rot.t0, rot.matrices @ so3.exp(delta))
    pos = traj.position
    position = SplineR3(
        pos.knot_spacing,
        pos.t0,
        pos.control_points + dx[layout.pos : layout.rho].reshape(-1, 3),
    )
    rho = np.maximum(state.inverse_depths + dx[layout.rho : layout.bias], 0.0)
    biases = state.biases
    if layout.biases:
        biases = ImuBiases(
            gyro=biases.gyro + dx[layout.bias : layout.bias + 3],
            accel=biases.accel + dx[layout.bias + 3 : layout.bias + 6],
        )
    return FusionState(Trajectory(rotation, position), rho, biases)


# =============================================================================
# Solver
# =============================================================================


def _first_bad_block(problem: FusionProblem, lin: _Linearization) -> str:
    n_blocks = problem.block_rows.size
    bad = np.flatnonzero(~np.isfinite(lin.residuals))
    if bad.size == 0:
        return "cost is not finite"
    index = int(bad[0])
    if index < 2 * n_blocks:
        row = int(problem.block_rows[index // 2])
        return (
            f"reprojection block of track {int(problem.tracks.track_id[row])} "
            f"frame {int(problem.tracks.frame[row])}"
        )
    index -= 2 * n_blocks
    n_imu = len(problem.imu)
    kind = "gyro" if index < 3 * n_imu else "accel"
    sample = (index % (3 * n_imu)) // 3
    return f"{kind} block at t={problem.imu.times[sample]:.6f} s"


def _stats(values: FloatArray) -> dict[str, float]:
    flat = values.reshape(-1)
    if flat.size == 0:
        return {"mean": 0.0, "std": 0.0, "count": 0.0}
    return {"mean": float(np.mean(flat)), "std": float(np.std(flat)), "count": float(flat.size)}


def optimize(
    problem: FusionProblem,
    config: FusionConfig | None = None,
    initial: FusionState | None = None,
) -> FusionResult:
    """Minimize the fusion cost with damped Gauss-Newton steps.

    The damping term is lambda * diag(J^T J); steps that do not lower the
    cost, or that move more landmarks behind a camera, are rejected.

    Args:
        problem: Problem from build_problem
        config: Solver settings (the problem's config when omitted)
        initial: Starting state (the problem's cold start when omitted)

    Returns:
        FusionResult with the trajectory, landmarks, biases and report

    Raises:
        SolverAbortError: If the starting cost is not finite
    """
    config = config or problem.config
    state = initial or problem.initial

    lin = _linearize(problem, state, with_jacobian=True)
    if not np.isfinite(lin.cost["total"]) or not np.all(np.isfinite(lin.residuals)):
        raise SolverAbortError(f"non-finite initial cost: {_first_bad_block(problem, lin)}")
    initial_cost = lin.cost["total"]
    damping = config.initial_damping
    growth = 2.0
    termination = "max_iterations"
    iterations = 0

    while iterations < config.max_iterations:
        assert lin.jacobian is not None
        jac = lin.jacobian.tocsc()
        column_norms = np.sqrt(np.asarray(jac.multiply(jac).sum(axis=0)).reshape(-1))
        basis = _step_basis(problem, state, column_norms > 0)
        jf = (jac @ basis).tocsc()
        gradient = np.asarray(jf.T @ lin.residuals).reshape(-1)
        if gradient.size == 0 or float(np.max(np.abs(gradient))) <= config.gradient_tol:
            termination = "gradient"
            break

        iterations += 1
        normal = (jf.T @ jf).tocsc()
        diagonal = normal.diagonal()
        step_free = spsolve(normal + sparse.diags(damping * diagonal, format="csc"), -gradient)
        step = np.asarray(basis @ step_free).reshape(-1)

        trial_state = retract(problem, state, step)
        trial = _linearize(problem, trial_state, with_jacobian=False)
        new_cost = trial.cost["total"]
        predicted = -(2.0 * gradient @ step_free + step_free @ (normal @ step_free))
        accepted = (
            np.isfinite(new_cost)
            and new_cost < lin.cost["total"]
            and trial.invalid <= lin.invalid
        )
        logger.debug(
            "iteration %d: cost %.9g -> %.9g, damping %.3g, %s",
            iterations,
            lin.cost["total"],
            new_cost,
            damping,
            "accepted" if accepted else "rejected",
        )
        if accepted:
            old_cost = lin.cost["total"]
            gain = (old_cost - new_cost) / predicted if predicted > 0 else 0.0
            damping *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            growth = 2.0
            state = trial_state
            lin = _linearize(problem, state, with_jacobian=True)
            if (old_cost - new_cost) <= config.cost_tol * old_cost:
                termination = "cost_decrease"
                break
        else:
            damping *= growth
            growth *= 2.0
            if damping > MAX_DAMPING:
                termination = "damping"
                break

    report = FusionReport(
        initial_cost=initial_cost,
        final_cost=lin.cost["total"],
        iterations=iterations,
        termination=termination,
        residual_stats={
            "reprojection": _stats(lin.pixel_residuals),
            "gyro": _stats(lin.gyro_residuals),
            "accel": _stats(lin.accel_residuals),
        },
        invalid_blocks=lin.invalid,
    )
    logger.info(
        "solver finished after %d iteration(s) (%s): cost %.6g -> %.6g",
        iterations,
        termination,
        initial_cost,
        report.final_cost,
    )
    return FusionResult(state.trajectory, problem.landmarks(state), state.biases, report)


# =============================================================================
# Evaluation
# =============================================================================


def residual_histograms(
    problem: FusionProblem,
    state: FusionState,
    bins: int = 41,
    limit: float = 5.0,
) -> dict[str, tuple[FloatArray, NDArray[np.int64]]]:
    """Histograms of weighted residual components per modality.

    Returns:
        Mapping modality -> (bin edges, counts) over [-limit, limit]
    """
    lin = _linearize(problem, state, with_jacobian=False)
    edges = np.linspace(-limit, limit, bins + 1)
    result = {}
    for name, values in (
        ("reprojection", lin.pixel_residuals),
        ("gyro", lin.gyro_residuals),
        ("accel", lin.accel_residuals),
    ):
        counts, _ = np.histogram(values.reshape(-1), bins=edges)
        result[name] = (edges, counts.astype(np.int64))
    return result


def endpoint_error(traj: Trajectory, t0: float, t_end: float) -> float:
    """Distance between the positions at t0 and t_end (m)."""
    start, end = traj.position.evaluate(np.array([t0, t_end]))
    return float(np.linalg.norm(end - start))


def scale_error(estimated_length: float, true_length: float) -> float:
    """|l_true - l_est| / l_true."""
    if not true_length > 0:
        raise InvalidInputError(f"true length must be positive, got {true_length}")
    return abs(true_length - estimated_length) / true_length


def endpoint_distortion(
    traj_dropout: Trajectory,
    traj_full: Trajectory,
    t_end: float,
    t_start: float | None = None,
) -> float:
    """Endpoint displacement caused by dropout, with both runs aligned at t_start.

    Args:
        traj_dropout: Estimate from the run with trailing frames removed
        traj_full: Estimate from the complete run
        t_end: Endpoint time
        t_start: Alignment time (start of the valid interval when omitted)
    """
    if t_start is None:
        t_start = max(traj_dropout.valid_interval[0], traj_full.valid_interval[0])
    times = np.array([t_start, t_end])
    p_drop = traj_dropout.position.evaluate(times)
    p_full = traj_full.position.evaluate(times)
    return float(np.linalg.norm((p_drop[1] - p_drop[0]) - (p_full[1] - p_full[0])))


def align_positions(
    estimate: ArrayLike, truth: ArrayLike
) -> tuple[FloatArray, FloatArray, float]:
    """Rigid alignment of estimated positions onto the truth.

    Args:
        estimate: Positions (M, 3)
        truth: Matching true positions (M, 3)

    Returns:
        (rotation, translation, rms) with truth ~ rotation @ estimate + translation
    """
    est = np.asarray(estimate, dtype=float).reshape(-1, 3)
    ref = np.asarray(truth, dtype=float).reshape(-1, 3)
    if est.shape != ref.shape or est.shape[0] < 1:
        raise InvalidInputError("estimate and truth must have the same nonzero length")
    est_mean = est.mean(axis=0)
    ref_mean = ref.mean(axis=0)
    est_c = est - est_mean
    ref_c = ref - ref_mean
    if np.allclose(est_c, 0.0) or np.allclose(ref_c, 0.0):
        rotation = np.eye(3)
    else:
        rotation = Rotation.align_vectors(ref_c, est_c)[0].as_matrix()
    translation = ref_mean - rotation @ est_mean
    aligned = est @ rotation.T + translation
    rms = float(np.sqrt(np.mean(np.sum((aligned - ref) ** 2, axis=1))))
    return rotation, translation, rms


def solve(
    tracks: TrackSet,
    imu: ImuLog,
    camera: CameraModel,
    plan: ResidualWeightPlan,
    config: FusionConfig | None = None,
) -> tuple[FusionProblem, FusionResult]:
    """build_problem followed by optimize.

    When either plan spacing is finer than config.coarse_knot_spacing, the
    problem is first solved from the cold start with both spacings raised
    to at least that value, and the result is resampled onto the plan's
    grids as the starting point. The report describes the final solve.
    """
    config = config or FusionConfig()
    try:
        problem = build_problem(tracks, imu, camera, plan, config)
        coarse = config.coarse_knot_spacing
        if min(plan.dt_so3, plan.dt_r3) >= coarse:
            return problem, optimize(problem)
        coarse_plan = replace(
            plan, dt_so3=max(plan.dt_so3, coarse), dt_r3=max(plan.dt_r3, coarse)
        )
        warm = optimize(build_problem(tracks, imu, camera, coarse_plan, config))
        logger.info(
            "warm start at %.4g / %.4g s: %d iteration(s), cost %.6g",
            coarse_plan.dt_so3,
            coarse_plan.dt_r3,
            warm.report.iterations,
            warm.report.final_cost,
        )
        return problem, optimize(problem, initial=resample_state(problem, warm.state))
    except OutOfDomainError as exc:
        raise BuildError(f"measurement outside the spline domain: {exc}") from exc


def report_dict(result: FusionResult) -> dict[str, Any]:
    """JSON-ready solver report with the estimated biases."""
    data = result.report.to_dict()
    data["biases"] = result.biases.to_dict()
    return data
