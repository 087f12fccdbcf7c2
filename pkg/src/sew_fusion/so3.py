"""
Rotation Group Helpers.

Vectorized exp/log maps, skew matrices and right Jacobians of SO(3).
Every function accepts a leading batch shape: (..., 3) vectors and
(..., 3, 3) matrices.
"""

import numpy as np
from numpy.typing import ArrayLike
from scipy.spatial.transform import Rotation

from .errors import InvalidInputError
from .models import FloatArray

# Below this angle the closed forms lose precision and Taylor series are used.
SMALL_ANGLE = 1e-3


def hat(v: ArrayLike) -> FloatArray:
    """Skew-symmetric matrix [v]x with hat(a) @ b == cross(a, b)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(m: ArrayLike) -> FloatArray:
    """Inverse of hat, using the antisymmetric part of m."""
    m = np.asarray(m, dtype=float)
    return 0.5 * np.stack(
        [m[..., 2, 1] - m[..., 1, 2], m[..., 0, 2] - m[..., 2, 0], m[..., 1, 0] - m[..., 0, 1]],
        axis=-1,
    )


def exp(phi: ArrayLike) -> FloatArray:
    """Rotation matrices from rotation vectors."""
    phi = np.asarray(phi, dtype=float)
    flat = phi.reshape(-1, 3)
    matrices = Rotation.from_rotvec(flat).as_matrix()
    return np.asarray(matrices, dtype=float).reshape(phi.shape[:-1] + (3, 3))


def log(r: ArrayLike) -> FloatArray:
    """Rotation vectors (angle in [0, pi]) from rotation matrices."""
    r = np.asarray(r, dtype=float)
    flat = r.reshape(-1, 3, 3)
    vectors = Rotation.from_matrix(flat).as_rotvec()
    return np.asarray(vectors, dtype=float).reshape(r.shape[:-2] + (3,))


def _coefficients(theta: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray]:
    """(1-cos t)/t^2, (t-sin t)/t^3 and 1/t^2 - (1+cos t)/(2 t sin t)."""
    small = theta < SMALL_ANGLE
    t = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(t)) / (t * t))
    b = np.where(small, 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0, (t - np.sin(t)) / t**3)
    with np.errstate(divide="ignore", invalid="ignore"):
        c_large = 1.0 / (t * t) - (1.0 + np.cos(t)) / (2.0 * t * np.sin(t))
    c = np.where(small, 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0, c_large)
    return a, b, c


def right_jacobian(phi: ArrayLike) -> FloatArray:
    """Right Jacobian Jr with Exp(phi + d) ~ Exp(phi) Exp(Jr(phi) d)."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1)
    a, b, _ = _coefficients(theta)
    k = hat(phi)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye - a[..., None, None] * k + b[..., None, None] * (k @ k)


def right_jacobian_inv(phi: ArrayLike) -> FloatArray:
    """Inverse right Jacobian with Log(Exp(phi) Exp(d)) ~ phi + Jr^-1(phi) d."""
    phi = np.asarray(phi, dtype=float)
    theta = np.linalg.norm(phi, axis=-1)
    _, _, c = _coefficients(theta)
    k = hat(phi)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + 0.5 * k + c[..., None, None] * (k @ k)


def to_quaternions(r: ArrayLike) -> FloatArray:
    """Unit quaternions (x, y, z, w) from rotation matrices."""
    r = np.asarray(r, dtype=float)
    quats = Rotation.from_matrix(r.reshape(-1, 3, 3)).as_quat()
    return np.asarray(quats, dtype=float).reshape(r.shape[:-2] + (4,))


def from_quaternions(q: ArrayLike) -> FloatArray:
    """Rotation matrices from (x, y, z, w) quaternions; normalizes first."""
    q = np.asarray(q, dtype=float)
    matrices = Rotation.from_quat(q.reshape(-1, 4)).as_matrix()
    return np.asarray(matrices, dtype=float).reshape(q.shape[:-1] + (3, 3))


def make_continuous(quats: ArrayLike) -> FloatArray:
    """Normalize a quaternion sequence and flip signs so neighbours have dot >= 0."""
    q = np.array(quats, dtype=float).reshape(-1, 4)
    norms = np.linalg.norm(q, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(q)):
        raise InvalidInputError("quaternions must be finite and nonzero")
    q /= norms
    for i in range(1, q.shape[0]):
        if np.dot(q[i - 1], q[i]) < 0:
            q[i] = -q[i]
    return q
