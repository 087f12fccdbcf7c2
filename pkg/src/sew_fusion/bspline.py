"""
Uniform Cubic B-Splines.

Splines over R^d (positions, 1D test signals) and over rotations, with
analytic time derivatives, local Jacobians for the rotation spline and a
banded least-squares fit for scalar signals.

Segment i of a spline with knot spacing dt uses control points i..i+3 and
covers [t0 + (i+1)*dt, t0 + (i+2)*dt). With K control points the valid
interval is [t0 + dt, t0 + (K-2)*dt]; there is no extrapolation.

The k-th time derivative of a degree-3 spline is a spline of degree 3-k on
the same uniform knots (shifted by half a knot spacing per order). Weight
planning relies on this to apply the same frequency-response scaling to
gyroscope and accelerometer spectra.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import LinAlgError, solveh_banded

from . import so3
from .errors import FitError, InvalidInputError, OutOfDomainError
from .models import FloatArray, UniformSignal

# Rows: powers of u; columns: the four active control points.
BASIS = (
    np.array(
        [
            [1.0, 4.0, 1.0, 0.0],
            [-3.0, 0.0, 3.0, 0.0],
            [3.0, -6.0, 3.0, 0.0],
            [-1.0, 3.0, -3.0, 1.0],
        ]
    )
    / 6.0
)

# Column j is the sum of basis columns j..3.
CUMULATIVE_BASIS = np.cumsum(BASIS[:, ::-1], axis=1)[:, ::-1].copy()

# Evaluation tolerance at the ends of the valid interval, in knot units.
DOMAIN_TOLERANCE = 1e-9


def _powers(u: FloatArray, derivative_order: int) -> FloatArray:
    """Rows of d^k/du^k [1, u, u^2, u^3]."""
    ones = np.ones_like(u)
    zeros = np.zeros_like(u)
    if derivative_order == 0:
        return np.stack([ones, u, u * u, u * u * u], axis=-1)
    if derivative_order == 1:
        return np.stack([zeros, ones, 2.0 * u, 3.0 * u * u], axis=-1)
    if derivative_order == 2:
        return np.stack([zeros, zeros, 2.0 * ones, 6.0 * u], axis=-1)
    if derivative_order == 3:
        return np.stack([zeros, zeros, zeros, 6.0 * ones], axis=-1)
    raise InvalidInputError(f"derivative order must be 0..3, got {derivative_order}")


def basis_weights(u: ArrayLike, derivative_order: int = 0) -> FloatArray:
    """Weights of the four active control points at segment fraction u.

    Derivatives are with respect to u; divide by dt**k for time derivatives.
    For derivative_order 0 the weights sum to 1.
    """
    u_arr = np.asarray(u, dtype=float)
    return _powers(u_arr, derivative_order) @ BASIS


def cumulative_basis(u: ArrayLike, derivative_order: int = 0) -> FloatArray:
    """Cumulative weights (first entry is always 1 for order 0)."""
    u_arr = np.asarray(u, dtype=float)
    return _powers(u_arr, derivative_order) @ CUMULATIVE_BASIS


def make_knot_grid(
    t_start: float, t_end: float, dt: float, margin: int = 0
) -> tuple[float, int]:
    """Knot origin and control count covering [t_start, t_end].

    Args:
        t_start: First time that must be evaluable
        t_end: Last time that must be evaluable
        dt: Knot spacing in seconds
        margin: Extra control points on each side

    Returns:
        (t0, K) such that t_start is the start of the valid interval when
        margin is 0 and t_end lies inside it
    """
    if not dt > 0:
        raise InvalidInputError(f"knot spacing must be positive, got {dt}")
    if t_end < t_start:
        raise InvalidInputError("t_end must not precede t_start")
    intervals = max(1, math.ceil((t_end - t_start) / dt - 1e-9))
    return t_start - (1 + margin) * dt, intervals + 3 + 2 * margin


def _as_times(t: ArrayLike) -> tuple[FloatArray, bool]:
    times = np.asarray(t, dtype=float)
    return np.atleast_1d(times).reshape(-1), times.ndim == 0


@dataclass(frozen=True, eq=False)
class _UniformKnots:
    knot_spacing: float
    t0: float

    @property
    def n_controls(self) -> int:
        raise NotImplementedError

    @property
    def valid_interval(self) -> tuple[float, float]:
        """Closed interval of times the spline can be evaluated at."""
        dt = self.knot_spacing
        return self.t0 + dt, self.t0 + (self.n_controls - 2) * dt

    def locate(self, t: ArrayLike) -> tuple[NDArray[np.int64], FloatArray]:
        """Segment index and fraction u in [0, 1] for each time.

        Raises:
            OutOfDomainError: If any time lies outside the valid interval
        """
        times, _ = _as_times(t)
        last = self.n_controls - 3
        s = (times - self.t0) / self.knot_spacing - 1.0
        bad = (s < -DOMAIN_TOLERANCE) | (s > last + DOMAIN_TOLERANCE) | ~np.isfinite(s)
        if np.any(bad):
            lo, hi = self.valid_interval
            first = float(times[np.argmax(bad)])
            raise OutOfDomainError(
                f"time {first:.9g} s outside valid interval [{lo:.9g}, {hi:.9g}]"
            )
        s = np.clip(s, 0.0, float(last))
        index = np.minimum(np.floor(s).astype(np.int64), last - 1)
        return index, s - index


@dataclass(frozen=True, eq=False)
class SplineR3(_UniformKnots):
    """Uniform cubic spline over R^d.

    Attributes:
        knot_spacing: Knot spacing in seconds
        t0: Time of the first (virtual) knot
        control_points: Array of shape (K, d), K >= 4
    """

    control_points: FloatArray = field(default_factory=lambda: np.zeros((4, 3)))

    def __post_init__(self) -> None:
        if not (np.isfinite(self.knot_spacing) and self.knot_spacing > 0):
            raise InvalidInputError(f"knot spacing must be positive, got {self.knot_spacing}")
        points = np.asarray(self.control_points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[0] < 4:
            raise InvalidInputError("a cubic spline needs at least 4 control points")
        object.__setattr__(self, "control_points", points)

    @property
    def n_controls(self) -> int:
        return int(self.control_points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.control_points.shape[1])

    def weights(
        self, t: ArrayLike, derivative_order: int = 0
    ) -> tuple[NDArray[np.int64], FloatArray]:
        """Segment indices and time-derivative weights of the active controls."""
        index, u = self.locate(t)
        w = basis_weights(u, derivative_order) / self.knot_spacing**derivative_order
        return index, w

    def evaluate(self, t: ArrayLike, derivative_order: int = 0) -> FloatArray:
        """Value or time derivative at t (scalar t gives shape (d,))."""
        _, scalar = _as_times(t)
        index, w = self.weights(t, derivative_order)
        rows = index[:, None] + np.arange(4)
        values = np.einsum("mj,mjd->md", w, self.control_points[rows])
        return values[0] if scalar else values


@dataclass(frozen=True, eq=False)
class SplineSO3(_UniformKnots):
    """Cumulative uniform cubic spline over rotations.

    R(t) = R_i * prod_j Exp(b_j(u) * d_j), with d_j the rotation vector
    between consecutive control rotations and b_j the cumulative basis.

    Attributes:
        knot_spacing: Knot spacing in seconds
        t0: Time of the first (virtual) knot
        control_quaternions: Array of shape (K, 4), (x, y, z, w) order
    """

    control_quaternions: FloatArray = field(
        default_factory=lambda: np.tile([0.0, 0.0, 0.0, 1.0], (4, 1))
    )
    matrices: FloatArray = field(init=False, repr=False)
    increments: FloatArray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.knot_spacing) and self.knot_spacing > 0):
            raise InvalidInputError(f"knot spacing must be positive, got {self.knot_spacing}")
        quats = so3.make_continuous(self.control_quaternions)
        if quats.shape[0] < 4:
            raise InvalidInputError("a cubic spline needs at least 4 control rotations")
        matrices = so3.from_quaternions(quats)
        relative = np.einsum("kji,kjl->kil", matrices[:-1], matrices[1:])
        object.__setattr__(self, "control_quaternions", quats)
        object.__setattr__(self, "matrices", matrices)
        object.__setattr__(self, "increments", so3.log(relative))

    @classmethod
    def from_matrices(cls, knot_spacing: float, t0: float, matrices: ArrayLike) -> "SplineSO3":
        """Build a spline from (K, 3, 3) control rotation matrices."""
        return cls(knot_spacing, t0, so3.to_quaternions(matrices))

    @classmethod
    def identity(cls, knot_spacing: float, t0: float, n_controls: int) -> "SplineSO3":
        return cls(knot_spacing, t0, np.tile([0.0, 0.0, 0.0, 1.0], (n_controls, 1)))

    @property
    def n_controls(self) -> int:
        return int(self.control_quaternions.shape[0])

    def _segments(
        self, t: ArrayLike
    ) -> tuple[NDArray[np.int64], FloatArray, FloatArray, FloatArray, FloatArray]:
        index, u = self.locate(t)
        b = cumulative_basis(u, 0)[:, 1:]
        b_dot = cumulative_basis(u, 1)[:, 1:] / self.knot_spacing
        deltas = self.increments[index[:, None] + np.arange(3)]
        factors = so3.exp(b[..., None] * deltas)
        return index, b, b_dot, deltas, factors

    def evaluate(self, t: ArrayLike) -> FloatArray:
        """Rotation matrix at t (scalar t gives shape (3, 3))."""
        _, scalar = _as_times(t)
        index, _, _, _, a = self._segments(t)
        r = self.matrices[index] @ a[:, 0] @ a[:, 1] @ a[:, 2]
        return r[0] if scalar else r

    def angular_velocity(self, t: ArrayLike) -> FloatArray:
        """Body-frame angular velocity vee(R^T dR/dt) in rad/s."""
        _, scalar = _as_times(t)
        _, _, b_dot, deltas, a = self._segments(t)
        omega = np.zeros((a.shape[0], 3))
        for j in range(3):
            omega = np.einsum("mji,mj->mi", a[:, j], omega) + b_dot[:, j, None] * deltas[:, j]
        return omega[0] if scalar else omega

    def local_jacobians(
        self, t: ArrayLike
    ) -> tuple[NDArray[np.int64], FloatArray, FloatArray, FloatArray, FloatArray]:
        """Rotation, body rate and their Jacobians w.r.t. the active controls.

        Control k is perturbed as R_k Exp(delta_k); the rotation output is
        perturbed as R(t) Exp(eps).

        Returns:
            index: (M,) first active control index
            rotation: (M, 3, 3)
            d_rotation: (M, 4, 3, 3) d eps / d delta_{index + c}
            omega: (M, 3)
            d_omega: (M, 4, 3, 3) d omega / d delta_{index + c}
        """
        index, b, b_dot, deltas, a = self._segments(t)
        m = index.shape[0]
        eye = np.broadcast_to(np.eye(3), (m, 3, 3))

        # Suffix products S_j = A_{j+1} ... A_3, with S_3 = I.
        suffix = np.empty((m, 4, 3, 3))
        suffix[:, 3] = eye
        for j in (2, 1, 0):
            suffix[:, j] = a[:, j] @ suffix[:, j + 1]
        rotation = self.matrices[index] @ suffix[:, 0]

        omega_in = np.zeros((m, 3))
        d_eps_d_delta = np.empty((m, 3, 3, 3))
        d_omega_d_delta = np.empty((m, 3, 3, 3))
        for j in range(3):
            jr = so3.right_jacobian(b[:, j, None] * deltas[:, j]) * b[:, j, None, None]
            s_t = np.swapaxes(suffix[:, j + 1], 1, 2)
            d_eps_d_delta[:, j] = s_t @ jr
            rotated = np.einsum("mji,mj->mi", a[:, j], omega_in)
            d_omega_d_delta[:, j] = s_t @ (so3.hat(rotated) @ jr + b_dot[:, j, None, None] * eye)
            omega_in = rotated + b_dot[:, j, None] * deltas[:, j]
        omega = omega_in

        # Chain through d_j = Log(R_{i+j-1}^T R_{i+j}).
        jr_inv = so3.right_jacobian_inv(deltas)
        d_matrix = so3.exp(deltas)
        into_next = jr_inv
        from_prev = -jr_inv @ np.swapaxes(d_matrix, -1, -2)

        d_rotation = np.zeros((m, 4, 3, 3))
        d_omega = np.zeros((m, 4, 3, 3))
        d_rotation[:, 0] = np.swapaxes(suffix[:, 0], 1, 2)
        for j in range(3):
            d_rotation[:, j + 1] += d_eps_d_delta[:, j] @ into_next[:, j]
            d_rotation[:, j] += d_eps_d_delta[:, j] @ from_prev[:, j]
            d_omega[:, j + 1] += d_omega_d_delta[:, j] @ into_next[:, j]
            d_omega[:, j] += d_omega_d_delta[:, j] @ from_prev[:, j]
        return index, rotation, d_rotation, omega, d_omega


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Rotation and position splines; knot spacings may differ.

    Attributes:
        rotation: Body-to-world rotation spline
        position: Body position spline in world coordinates (m)
    """

    rotation: SplineSO3
    position: SplineR3

    def __post_init__(self) -> None:
        if self.position.dim != 3:
            raise InvalidInputError("trajectory position spline must be 3-dimensional")
        lo, hi = self.valid_interval
        if lo > hi:
            raise InvalidInputError("rotation and position splines do not overlap")

    @property
    def valid_interval(self) -> tuple[float, float]:
        r_lo, r_hi = self.rotation.valid_interval
        p_lo, p_hi = self.position.valid_interval
        return max(r_lo, p_lo), min(r_hi, p_hi)

    def sample(self, times: ArrayLike) -> tuple[FloatArray, FloatArray]:
        """Positions (M, 3) and unit quaternions (M, 4) in (w, x, y, z) order."""
        t, _ = _as_times(times)
        positions = self.position.evaluate(t)
        xyzw = so3.to_quaternions(self.rotation.evaluate(t))
        wxyz = np.concatenate([xyzw[:, 3:], xyzw[:, :3]], axis=1)
        # Keep w >= 0 for stable output.
        wxyz *= np.where(wxyz[:, :1] < 0, -1.0, 1.0)
        return positions, wxyz


# =============================================================================
# Functional interface
# =============================================================================


def eval_r3(spline: SplineR3, t: ArrayLike, derivative_order: int = 0) -> FloatArray:
    """Evaluate a position spline or one of its first two time derivatives."""
    if derivative_order not in (0, 1, 2):
        raise InvalidInputError(f"derivative order must be 0, 1 or 2, got {derivative_order}")
    return spline.evaluate(t, derivative_order)


def eval_so3(spline: SplineSO3, t: ArrayLike) -> FloatArray:
    """Evaluate a rotation spline."""
    return spline.evaluate(t)


def angular_velocity(spline: SplineSO3, t: ArrayLike) -> FloatArray:
    """Body-frame angular velocity of a rotation spline."""
    return spline.angular_velocity(t)


def so3_local_jacobians(
    spline: SplineSO3, t: ArrayLike
) -> tuple[NDArray[np.int64], FloatArray, FloatArray, FloatArray, FloatArray]:
    """See SplineSO3.local_jacobians."""
    return spline.local_jacobians(t)


def trajectory_length(traj: Trajectory, t_start: float, t_end: float, n: int = 2000) -> float:
    """Length of the position curve between two times (polyline with n segments)."""
    times = np.linspace(t_start, t_end, n + 1)
    points = traj.position.evaluate(times)
    return float(np.sum(np.linalg.norm(np.diff(points, axis=0), axis=1)))


def fit_least_squares_1d(signal: UniformSignal, knot_spacing: float) -> SplineR3:
    """Least-squares cubic spline fit of a scalar signal.

    The knots are placed so the first sample is at the start of the valid
    interval. The banded normal equations (bandwidth 7) are solved by a
    Cholesky factorization.

    Args:
        signal: Uniformly sampled scalar signal
        knot_spacing: Knot spacing in seconds

    Returns:
        A 1-dimensional SplineR3

    Raises:
        FitError: If a knot interval holds no samples or the system is singular
    """
    times = signal.times
    t0, n_controls = make_knot_grid(float(times[0]), float(times[-1]), knot_spacing)
    spline = SplineR3(knot_spacing, t0, np.zeros((n_controls, 1)))
    index, w = spline.weights(times)

    counts = np.bincount(index, minlength=n_controls - 3)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        k = int(empty[0])
        start = t0 + (k + 1) * knot_spacing
        raise FitError(
            f"knot interval [{start:.6g}, {start + knot_spacing:.6g}) s contains no samples"
        )

    banded = np.zeros((4, n_controls))
    rhs = np.zeros(n_controls)
    for a_idx in range(4):
        np.add.at(rhs, index + a_idx, w[:, a_idx] * signal.samples)
        for b_idx in range(a_idx, 4):
            np.add.at(banded[3 - (b_idx - a_idx)], index + b_idx, w[:, a_idx] * w[:, b_idx])
    try:
        coefficients = solveh_banded(banded, rhs)
    except LinAlgError as exc:
        raise FitError(f"spline fit normal equations are singular: {exc}") from exc
    return SplineR3(knot_spacing, t0, coefficients[:, None])
