"""
Spline Error Weighting.

Frequency response of least-squares spline fits, the quality function,
knot-spacing selection and prediction of the residual variance that turns
into per-modality residual weights.

A spline fit with knot spacing dt acts on a signal spectrum X as a filter
H(f * dt). The fitted signal keeps the energy sum(H^2 |X|^2), and the
residual variance is the approximation error sum((1 - H)^2 |X|^2) / N plus
the noise that survives the fit, sigma_n^2 * sum(H^2) / N.
"""

import logging
import math
import warnings
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike
from scipy import optimize, special

from .errors import (
    BracketError,
    DegenerateInputError,
    DegenerateWeightError,
    InvalidInputError,
    SaturationWarning,
)
from .models import (
    FloatArray,
    FusionConfig,
    ImuLog,
    ResidualPrediction,
    ResidualWeightPlan,
    ScalarSpectrum,
)
from .spectral import vector_spectrum

logger = logging.getLogger(__name__)

# Default Brent tolerance on the knot spacing (s).
KNOT_TOLERANCE = 1e-10


@dataclass(frozen=True)
class FrequencyResponseModel:
    """Frequency response of a least-squares B-spline fit of order n.

    H(nu) = sinc(nu)^(2(n+1)) / sum_k sinc(nu + k)^(2(n+1)), evaluated in
    closed form through the polygamma function. H(0) = 1, H(k) = 0 for
    nonzero integers k and H is even.

    Attributes:
        spline_order: Polynomial degree n of the spline (3 for cubic)
    """

    spline_order: int = 3

    def __post_init__(self) -> None:
        if self.spline_order < 0:
            raise InvalidInputError(f"spline order must be >= 0, got {self.spline_order}")

    def __call__(self, nu: ArrayLike) -> FloatArray:
        """Evaluate H at normalized frequencies nu = f * dt."""
        nu_arr = np.asarray(nu, dtype=float)
        if not np.all(np.isfinite(nu_arr)):
            raise InvalidInputError("normalized frequency must be finite")
        s = 2 * (self.spline_order + 1)
        m = np.rint(nu_arr)
        r = nu_arr - m
        # sum_{j>=1} (j + r)^-s + (j - r)^-s
        rest = (special.polygamma(s - 1, 1.0 + r) + special.polygamma(s - 1, 1.0 - r)) / (
            math.factorial(s - 1)
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(m == 0, 1.0, (r / np.where(nu_arr == 0, 1.0, nu_arr)) ** s)
        return np.asarray(ratio / (1.0 + r**s * rest), dtype=float)


CUBIC = FrequencyResponseModel(3)


def frequency_response(model: FrequencyResponseModel, nu: ArrayLike) -> FloatArray | float:
    """H(nu) of a spline fit; scalar nu returns a float."""
    values = model(nu)
    return float(values) if values.ndim == 0 else values


def _responses(spectrum: ScalarSpectrum, dt: float, model: FrequencyResponseModel) -> FloatArray:
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidInputError(f"knot spacing must be positive, got {dt}")
    return model(spectrum.frequencies * dt)


def quality(
    spectrum: ScalarSpectrum, dt: float, model: FrequencyResponseModel = CUBIC
) -> float:
    """Fraction of spectral energy a spline with knot spacing dt keeps.

    Args:
        spectrum: Magnitude spectrum with zeroed DC
        dt: Knot spacing in seconds
        model: Spline frequency response

    Returns:
        q(dt) = sum(H^2 |X|^2) / sum(|X|^2), in [0, 1]

    Raises:
        DegenerateInputError: If the spectrum has zero energy
    """
    power = spectrum.magnitudes**2
    total = float(np.sum(power))
    if total <= 0:
        raise DegenerateInputError("quality is undefined for a zero-energy spectrum")
    h = _responses(spectrum, dt, model)
    return float(np.sum(h * h * power) / total)


def brent_root(
    f: Callable[[float], float], a: float, b: float, tol: float = 1e-12, max_iterations: int = 200
) -> float:
    """Root of f inside [a, b] by Brent's method.

    Args:
        f: Side-effect free scalar function
        a: Lower bracket bound
        b: Upper bracket bound
        tol: Absolute tolerance on the root
        max_iterations: Iteration limit

    Returns:
        x with a bracket of width <= tol around the root

    Raises:
        BracketError: If f(a) and f(b) have the same sign
    """
    if not a < b:
        raise BracketError(f"bracket must satisfy a < b, got [{a}, {b}]")
    fa, fb = f(a), f(b)
    if fa * fb > 0:
        raise BracketError(f"no sign change on [{a}, {b}]: f(a)={fa:.6g}, f(b)={fb:.6g}")
    root, result = optimize.brentq(
        f, a, b, xtol=tol, maxiter=max_iterations, full_output=True, disp=False
    )
    if not result.converged:
        logger.warning("Brent search stopped after %d iterations", result.iterations)
    return float(root)


def select_knot_spacing(
    spectrum: ScalarSpectrum,
    q_hat: float,
    dt_max: float,
    model: FrequencyResponseModel = CUBIC,
) -> float:
    """Largest knot spacing whose quality reaches q_hat.

    Starts at dt_max and halves the spacing until the quality is reached,
    then solves q(dt) = q_hat inside the last halving interval. The search
    never goes below two sample intervals.

    Args:
        spectrum: Magnitude spectrum of the measurement signal
        q_hat: Requested quality in (0, 1]
        dt_max: Largest allowed knot spacing in seconds
        model: Spline frequency response

    Returns:
        Selected knot spacing in seconds

    Warns:
        SaturationWarning: If q_hat is not reached at the minimum spacing
    """
    if not 0.0 < q_hat <= 1.0:
        raise InvalidInputError(f"requested quality must be in (0, 1], got {q_hat}")
    dt_min = 2.0 / spectrum.sample_rate
    if not dt_max >= dt_min:
        raise InvalidInputError(
            f"dt_max {dt_max} s is below the minimum knot spacing {dt_min} s"
        )
    if float(np.sum(spectrum.magnitudes**2)) <= 0:
        logger.debug("zero-energy spectrum, using dt_max=%g", dt_max)
        return dt_max

    def shortfall(dt: float) -> float:
        return quality(spectrum, dt, model) - q_hat

    if shortfall(dt_max) >= 0:
        return dt_max

    upper = dt_max
    lower = max(dt_max / 2.0, dt_min)
    while shortfall(lower) < 0:
        if lower <= dt_min:
            warnings.warn(
                f"quality {q_hat} not reached at the minimum knot spacing {dt_min:.6g} s "
                f"(q={quality(spectrum, dt_min, model):.6f})",
                SaturationWarning,
                stacklevel=2,
            )
            return dt_min
        upper = lower
        lower = max(lower / 2.0, dt_min)

    logger.debug("knot spacing bracket [%g, %g] for q_hat=%g", lower, upper, q_hat)
    return brent_root(shortfall, lower, upper, tol=KNOT_TOLERANCE)


def predict_residual_variance(
    spectrum: ScalarSpectrum,
    dt: float,
    sigma_n: float,
    model: FrequencyResponseModel = CUBIC,
) -> ResidualPrediction:
    """Predicted residual variance of a spline fit and the matching weight.

    Args:
        spectrum: Magnitude spectrum of the measurement signal
        dt: Knot spacing in seconds
        sigma_n: Measurement noise standard deviation (signal units)
        model: Spline frequency response

    Returns:
        ResidualPrediction with gamma = 1 / sigma_r2

    Raises:
        DegenerateWeightError: If the predicted variance is zero
    """
    if not (np.isfinite(sigma_n) and sigma_n >= 0):
        raise InvalidInputError(f"noise std must be finite and >= 0, got {sigma_n}")
    h = _responses(spectrum, dt, model)
    n = spectrum.n
    sigma_e2 = float(np.sum((1.0 - h) ** 2 * spectrum.magnitudes**2) / n)
    sigma_f2 = float(sigma_n**2 * np.sum(h * h) / n)
    sigma_r2 = sigma_e2 + sigma_f2
    if sigma_r2 <= 0:
        raise DegenerateWeightError(
            "predicted residual variance is zero; supply a positive noise std"
        )
    return ResidualPrediction(sigma_e2, sigma_f2, sigma_r2, 1.0 / sigma_r2)


def weights_from_quality(
    gyro_spectrum: ScalarSpectrum,
    accel_spectrum: ScalarSpectrum,
    quality_gyro: float,
    quality_accel: float,
    sigma_gyro: float,
    sigma_accel: float,
    dt_max: float,
    model: FrequencyResponseModel = CUBIC,
) -> ResidualWeightPlan:
    """Knot spacings and IMU weights for requested qualities.

    The gyroscope quality sets the rotation spline spacing and the
    accelerometer quality sets the position spline spacing.
    """
    dt_so3 = select_knot_spacing(gyro_spectrum, quality_gyro, dt_max, model)
    dt_r3 = select_knot_spacing(accel_spectrum, quality_accel, dt_max, model)
    plan = ResidualWeightPlan(
        dt_so3=dt_so3,
        dt_r3=dt_r3,
        gyro=predict_residual_variance(gyro_spectrum, dt_so3, sigma_gyro, model),
        accel=predict_residual_variance(accel_spectrum, dt_r3, sigma_accel, model),
        requested_quality=(quality_gyro, quality_accel),
    )
    logger.info(
        "knot spacing so3=%.4f s r3=%.4f s, gamma gyro=%.4g accel=%.4g",
        plan.dt_so3,
        plan.dt_r3,
        plan.gyro.gamma,
        plan.accel.gamma,
    )
    return plan


def inverse_noise_plan(sigma_gyro: float, sigma_accel: float, dt: float) -> ResidualWeightPlan:
    """Fixed knot spacing with weights 1 / sigma_n^2 (no approximation error term)."""
    predictions = []
    for name, sigma in (("gyro", sigma_gyro), ("accel", sigma_accel)):
        if not (np.isfinite(sigma) and sigma > 0):
            raise DegenerateWeightError(f"{name} noise std must be positive, got {sigma}")
        predictions.append(ResidualPrediction(0.0, sigma**2, sigma**2, 1.0 / sigma**2))
    return ResidualWeightPlan(dt_so3=dt, dt_r3=dt, gyro=predictions[0], accel=predictions[1])


def plan_from_imu(
    imu: ImuLog, config: FusionConfig, model: FrequencyResponseModel = CUBIC
) -> ResidualWeightPlan:
    """Weight plan from the spectra of an IMU log."""
    rate = imu.sample_rate
    return weights_from_quality(
        vector_spectrum(imu.gyro, rate),
        vector_spectrum(imu.accel, rate),
        config.quality_gyro,
        config.quality_accel,
        config.sigma_gyro,
        config.sigma_accel,
        config.dt_max,
        model,
    )
