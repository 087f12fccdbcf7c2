"""
Spectral Analysis.

Unitary discrete Fourier transforms of uniformly sampled signals, per-bin
magnitude spectra of scalar and 3-vector signals, energy accounting and a
zero-phase decimator for IMU logs.

The forward transform is the adjoint of the inverse DFT matrix
M[k, n] = exp(2j*pi*k*n/N) / sqrt(N), so both directions preserve energy.
"""

import numpy as np
from numpy.typing import ArrayLike
from scipy import fft, signal

from .errors import InvalidInputError
from .models import FloatArray, ScalarSpectrum, Spectrum, UniformSignal

# Relative size of the imaginary part idft is allowed to drop.
IMAG_TOLERANCE = 1e-9

# 1.4826 * MAD estimates the std of a Gaussian.
_MAD_SCALE = 1.4826


def dft(sig: UniformSignal) -> Spectrum:
    """Unitary DFT of a uniformly sampled signal.

    Args:
        sig: Signal with at least 2 samples

    Returns:
        Spectrum with ||bins||^2 == ||samples||^2
    """
    return Spectrum(
        bins=fft.fft(sig.samples, norm="ortho"),
        sample_rate=sig.sample_rate,
        start_time=sig.start_time,
    )


def idft(spectrum: Spectrum) -> UniformSignal:
    """Inverse of dft.

    The imaginary residue of a conjugate-symmetric spectrum is discarded.

    Raises:
        InvalidInputError: If the spectrum is not conjugate symmetric
    """
    values = fft.ifft(spectrum.bins, norm="ortho")
    scale = max(float(np.max(np.abs(values))), 1.0)
    if float(np.max(np.abs(values.imag))) > IMAG_TOLERANCE * scale:
        raise InvalidInputError("spectrum is not conjugate symmetric; inverse is complex")
    return UniformSignal(
        samples=np.ascontiguousarray(values.real),
        sample_rate=spectrum.sample_rate,
        start_time=spectrum.start_time,
    )


def bin_frequencies(n: int, sample_rate: float) -> FloatArray:
    """Frequency of every DFT bin in Hz (upper half negative)."""
    if n < 2:
        raise InvalidInputError(f"need at least 2 bins, got {n}")
    return np.asarray(fft.fftfreq(n, d=1.0 / sample_rate), dtype=float)


def scalar_spectrum(sig: UniformSignal) -> ScalarSpectrum:
    """Magnitude spectrum of a scalar signal with the DC bin zeroed."""
    magnitudes = np.abs(dft(sig).bins)
    magnitudes[0] = 0.0
    return ScalarSpectrum(magnitudes=magnitudes, sample_rate=sig.sample_rate)


def vector_spectrum(samples: ArrayLike, sample_rate: float) -> ScalarSpectrum:
    """Per-bin scalar spectrum of a 3-vector signal.

    Each bin holds sqrt(1/3) times the L2 norm of the three axis spectra,
    so a signal with the same trace on every axis keeps that trace's
    magnitudes. The DC bin is set to 0.

    Args:
        samples: Array of shape (N, 3)
        sample_rate: Sample rate in Hz

    Returns:
        ScalarSpectrum of length N
    """
    values = np.asarray(samples, dtype=float)
    if values.ndim != 2 or values.shape[1] != 3:
        raise InvalidInputError(f"expected samples of shape (N, 3), got {values.shape}")
    if values.shape[0] < 2:
        raise InvalidInputError("a vector signal needs at least 2 samples")
    if not np.all(np.isfinite(values)):
        raise InvalidInputError("vector signal contains non-finite samples")
    bins = fft.fft(values, axis=0, norm="ortho")
    magnitudes = np.sqrt(np.sum(np.abs(bins) ** 2, axis=1) / 3.0)
    magnitudes[0] = 0.0
    return ScalarSpectrum(magnitudes=magnitudes, sample_rate=sample_rate)


def energy(spectrum: Spectrum | ScalarSpectrum) -> float:
    """Sum of squared bin magnitudes."""
    if isinstance(spectrum, ScalarSpectrum):
        return float(np.sum(spectrum.magnitudes**2))
    return float(np.sum(np.abs(spectrum.bins) ** 2))


def decimate(samples: ArrayLike, in_rate: float, out_rate: float) -> FloatArray:
    """Low-pass and downsample a signal by an integer ratio.

    A moving average of width in_rate/out_rate is run forward and backward
    (zero phase), then every ratio-th sample is kept. Works along axis 0,
    so (N,) and (N, 3) inputs are both accepted.

    Args:
        samples: Input samples
        in_rate: Input sample rate in Hz
        out_rate: Output sample rate in Hz

    Returns:
        Decimated samples, ceil(N / ratio) long

    Raises:
        InvalidInputError: If out_rate does not divide in_rate
    """
    values = np.asarray(samples, dtype=float)
    if in_rate <= 0 or out_rate <= 0:
        raise InvalidInputError("sample rates must be positive")
    ratio_float = in_rate / out_rate
    ratio = int(round(ratio_float))
    if ratio < 1 or abs(ratio_float - ratio) > 1e-9 * ratio_float:
        raise InvalidInputError(
            f"output rate {out_rate} Hz must divide input rate {in_rate} Hz"
        )
    if ratio == 1:
        return values.copy()
    n = values.shape[0]
    if n < 2:
        raise InvalidInputError("need at least 2 samples to decimate")
    taps = np.full(ratio, 1.0 / ratio)
    padlen = min(3 * ratio, n - 1)
    filtered = signal.filtfilt(taps, [1.0], values, axis=0, padlen=padlen)
    return np.asarray(filtered[::ratio], dtype=float)


def estimate_noise_std(samples: ArrayLike) -> FloatArray | float:
    """Heuristic white-noise std from first differences.

    Uses the median absolute deviation of the differences, divided by
    sqrt(2) since differencing doubles the noise variance. Smooth motion
    inflates the estimate, so treat it as an upper bound.

    Args:
        samples: Array of shape (N,) or (N, d)

    Returns:
        A float for 1D input, otherwise one value per column
    """
    values = np.asarray(samples, dtype=float)
    if values.shape[0] < 3:
        raise InvalidInputError("need at least 3 samples to estimate noise")
    diffs = np.diff(values, axis=0)
    mad = np.median(np.abs(diffs - np.median(diffs, axis=0)), axis=0)
    result = _MAD_SCALE * mad / np.sqrt(2.0)
    if values.ndim == 1:
        return float(result)
    return np.asarray(result, dtype=float)
