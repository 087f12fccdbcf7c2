"""
Tests for spectral analysis.
"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from sew_fusion import (
    InvalidInputError,
    ScalarSpectrum,
    Spectrum,
    UniformSignal,
    bin_frequencies,
    decimate,
    dft,
    energy,
    estimate_noise_std,
    idft,
    scalar_spectrum,
    vector_spectrum,
)

# =============================================================================
# Signal and Spectrum Types
# =============================================================================


class TestSignalTypes:
    """Tests for UniformSignal, Spectrum and ScalarSpectrum invariants."""

    def test_signal_needs_two_samples(self):
        """A single sample is not a signal."""
        with pytest.raises(InvalidInputError):
            UniformSignal(np.array([1.0]), 100.0)

    def test_signal_rejects_bad_rate(self):
        """Sample rate must be positive and finite."""
        with pytest.raises(InvalidInputError):
            UniformSignal(np.zeros(4), 0.0)
        with pytest.raises(InvalidInputError):
            UniformSignal(np.zeros(4), np.inf)

    def test_signal_times(self):
        """Timestamps start at start_time and step by 1/rate."""
        sig = UniformSignal(np.zeros(4), 4.0, start_time=1.0)
        np.testing.assert_allclose(sig.times, [1.0, 1.25, 1.5, 1.75])

    def test_bin_frequency(self):
        """Upper half of the bins holds negative frequencies."""
        spectrum = Spectrum(np.zeros(8, dtype=complex), 8.0)
        assert spectrum.bin_frequency(1) == 1.0
        assert spectrum.bin_frequency(7) == -1.0

    def test_scalar_spectrum_requires_zero_dc(self):
        """A nonzero DC magnitude is rejected."""
        with pytest.raises(InvalidInputError):
            ScalarSpectrum(np.array([1.0, 0.0, 0.0, 0.0]), 10.0)

    def test_scalar_spectrum_rejects_negative(self):
        """Magnitudes must be nonnegative."""
        with pytest.raises(InvalidInputError):
            ScalarSpectrum(np.array([0.0, -1.0, 0.0, 0.0]), 10.0)

    def test_bin_frequencies(self):
        """bin_frequencies follows the DFT bin ordering."""
        np.testing.assert_allclose(
            bin_frequencies(8, 8.0), [0.0, 1.0, 2.0, 3.0, -4.0, -3.0, -2.0, -1.0]
        )


# =============================================================================
# DFT
# =============================================================================


class TestDft:
    """Tests for the unitary DFT and its inverse."""

    def test_constant_signal(self):
        """All energy of a constant lands in bin 0."""
        spectrum = dft(UniformSignal(np.array([3.0, 3.0, 3.0, 3.0]), 4.0))
        assert spectrum.bins[0] == pytest.approx(6.0)
        np.testing.assert_allclose(np.abs(spectrum.bins[1:]), 0.0, atol=1e-12)

    def test_pure_sinusoid(self):
        """A cosine on an integer bin gives exactly two nonzero bins."""
        n, k0 = 64, 5
        samples = np.cos(2.0 * np.pi * k0 * np.arange(n) / n)
        magnitudes = np.abs(dft(UniformSignal(samples, 64.0)).bins)
        nonzero = np.flatnonzero(magnitudes > 1e-9)
        assert list(nonzero) == [k0, n - k0]

    def test_parseval(self):
        """Bin energy equals sample energy."""
        rng = np.random.default_rng(0)
        samples = rng.standard_normal(256)
        spectrum = dft(UniformSignal(samples, 100.0))
        assert energy(spectrum) == pytest.approx(float(np.sum(samples**2)), rel=1e-9)

    def test_parseval_odd_length(self):
        """Parseval holds for lengths that are not powers of two."""
        rng = np.random.default_rng(1)
        samples = rng.standard_normal(999)
        spectrum = dft(UniformSignal(samples, 100.0))
        assert energy(spectrum) == pytest.approx(float(np.sum(samples**2)), rel=1e-9)

    def test_round_trip(self):
        """idft(dft(x)) reproduces x."""
        rng = np.random.default_rng(2)
        samples = rng.standard_normal(1000)
        back = idft(dft(UniformSignal(samples, 50.0, start_time=2.0)))
        np.testing.assert_allclose(back.samples, samples, rtol=1e-9, atol=1e-12)
        assert back.start_time == 2.0
        assert back.sample_rate == 50.0

    def test_idft_zero(self):
        """Zero bins give a zero signal."""
        back = idft(Spectrum(np.zeros(16, dtype=complex), 10.0))
        np.testing.assert_array_equal(back.samples, 0.0)

    def test_idft_dc_bin(self):
        """A DC bin of sqrt(N) c gives the constant c."""
        bins = np.zeros(16, dtype=complex)
        bins[0] = 4.0 * 2.5
        back = idft(Spectrum(bins, 10.0))
        np.testing.assert_allclose(back.samples, 2.5)

    def test_idft_rejects_complex_result(self):
        """A spectrum without conjugate symmetry has no real inverse."""
        bins = np.zeros(8, dtype=complex)
        bins[1] = 1.0
        with pytest.raises(InvalidInputError):
            idft(Spectrum(bins, 10.0))

    def test_scalar_spectrum_zeroes_dc(self):
        """scalar_spectrum drops the mean."""
        samples = 5.0 + np.sin(np.linspace(0.0, 2.0 * np.pi, 32, endpoint=False))
        spectrum = scalar_spectrum(UniformSignal(samples, 32.0))
        assert spectrum.magnitudes[0] == 0.0
        assert spectrum.magnitudes[1] > 0.0


# =============================================================================
# Vector Spectrum
# =============================================================================


class TestVectorSpectrum:
    """Tests for the per-bin scalar spectrum of 3-vector signals."""

    def test_zero_signal(self):
        """All-zero input gives all-zero magnitudes."""
        spectrum = vector_spectrum(np.zeros((64, 3)), 100.0)
        np.testing.assert_array_equal(spectrum.magnitudes, 0.0)

    def test_identical_axes(self):
        """The same trace on every axis keeps the scalar magnitudes."""
        rng = np.random.default_rng(3)
        trace = rng.standard_normal(128)
        spectrum = vector_spectrum(np.column_stack([trace, trace, trace]), 100.0)
        expected = np.abs(dft(UniformSignal(trace, 100.0)).bins)
        np.testing.assert_allclose(spectrum.magnitudes[1:], expected[1:], rtol=1e-12)
        assert spectrum.magnitudes[0] == 0.0

    def test_constant_vector(self):
        """A constant vector signal lives entirely in the zeroed DC bin."""
        samples = np.tile([1.0, -2.0, 9.81], (50, 1))
        spectrum = vector_spectrum(samples, 100.0)
        np.testing.assert_allclose(spectrum.magnitudes, 0.0, atol=1e-12)

    def test_rotation_invariant(self):
        """A fixed rotation of every sample leaves the magnitudes unchanged."""
        rng = np.random.default_rng(4)
        samples = rng.standard_normal((200, 3))
        rotation = Rotation.from_rotvec([0.3, -1.2, 0.7]).as_matrix()
        a = vector_spectrum(samples, 100.0).magnitudes
        b = vector_spectrum(samples @ rotation.T, 100.0).magnitudes
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_rejects_non_finite(self):
        """NaN samples are invalid input."""
        samples = np.zeros((10, 3))
        samples[4, 1] = np.nan
        with pytest.raises(InvalidInputError):
            vector_spectrum(samples, 100.0)

    def test_rejects_wrong_shape(self):
        """Only (N, 3) arrays are vector signals."""
        with pytest.raises(InvalidInputError):
            vector_spectrum(np.zeros((10, 2)), 100.0)


# =============================================================================
# Energy
# =============================================================================


class TestEnergy:
    """Tests for the energy functional."""

    def test_zero_spectrum(self):
        """A zero spectrum has zero energy."""
        assert energy(Spectrum(np.zeros(8, dtype=complex), 10.0)) == 0.0

    def test_unit_impulse(self):
        """A unit impulse has unit energy."""
        samples = np.zeros(32)
        samples[7] = 1.0
        assert energy(dft(UniformSignal(samples, 10.0))) == pytest.approx(1.0)

    def test_scalar_spectrum_energy(self):
        """ScalarSpectrum energy is the sum of squared magnitudes."""
        spectrum = ScalarSpectrum(np.array([0.0, 3.0, 4.0, 0.0]), 10.0)
        assert energy(spectrum) == pytest.approx(25.0)


# =============================================================================
# Decimation
# =============================================================================


class TestDecimate:
    """Tests for zero-phase decimation."""

    def test_constant_signal(self):
        """A constant stays constant at a quarter of the length."""
        out = decimate(np.full(1000, 2.5), 1000.0, 250.0)
        assert out.shape == (250,)
        np.testing.assert_allclose(out, 2.5, rtol=1e-12)

    def test_length_contract(self):
        """Ratio 3 on 999 samples gives 333 samples."""
        assert decimate(np.zeros(999), 300.0, 100.0).shape == (333,)

    def test_vector_input(self):
        """Columns are decimated independently."""
        out = decimate(np.ones((1000, 3)), 1000.0, 250.0)
        assert out.shape == (250, 3)

    def test_nyquist_attenuated(self):
        """A sinusoid at the input Nyquist rate is removed."""
        samples = np.cos(np.pi * np.arange(1000))
        out = decimate(samples, 1000.0, 250.0)
        assert np.mean(out**2) < 0.05 * np.mean(samples**2)

    def test_non_integer_ratio(self):
        """The output rate must divide the input rate."""
        with pytest.raises(InvalidInputError):
            decimate(np.zeros(100), 1000.0, 300.0)

    def test_unit_ratio_copies(self):
        """Equal rates return an independent copy."""
        samples = np.arange(10.0)
        out = decimate(samples, 100.0, 100.0)
        np.testing.assert_array_equal(out, samples)
        out[0] = -1.0
        assert samples[0] == 0.0


# =============================================================================
# Noise Estimate
# =============================================================================


class TestEstimateNoiseStd:
    """Tests for the first-difference noise heuristic."""

    def test_white_noise(self):
        """Recovers the std of white noise."""
        rng = np.random.default_rng(5)
        estimate = estimate_noise_std(0.1 * rng.standard_normal(20000))
        assert isinstance(estimate, float)
        assert estimate == pytest.approx(0.1, rel=0.05)

    def test_per_column(self):
        """Returns one value per column for 2D input."""
        rng = np.random.default_rng(6)
        samples = rng.standard_normal((20000, 3)) * np.array([0.01, 0.1, 1.0])
        estimate = estimate_noise_std(samples)
        np.testing.assert_allclose(estimate, [0.01, 0.1, 1.0], rtol=0.05)

    def test_too_short(self):
        """Needs at least three samples."""
        with pytest.raises(InvalidInputError):
            estimate_noise_std(np.zeros(2))
