"""
Tests for knot spacing selection and residual weighting.
"""

import warnings

import numpy as np
import pytest

from sew_fusion import (
    CUBIC,
    BracketError,
    DegenerateInputError,
    DegenerateWeightError,
    FrequencyResponseModel,
    FusionConfig,
    ImuLog,
    InvalidInputError,
    SaturationWarning,
    ScalarSpectrum,
    brent_root,
    frequency_response,
    inverse_noise_plan,
    plan_from_imu,
    predict_residual_variance,
    quality,
    select_knot_spacing,
    vector_spectrum,
    weights_from_quality,
)


def tone_spectrum(n: int = 1000, fs: float = 100.0, k: int = 10, amplitude: float = 1.0):
    """Spectrum with all energy in bins k and n - k (frequency k * fs / n)."""
    magnitudes = np.zeros(n)
    magnitudes[k] = amplitude
    magnitudes[n - k] = amplitude
    return ScalarSpectrum(magnitudes, fs)


def noise_spectrum(seed: int, n: int = 2000, fs: float = 200.0, scale: float = 1.0):
    rng = np.random.default_rng(seed)
    return vector_spectrum(scale * np.cumsum(rng.standard_normal((n, 3)), axis=0) / fs, fs)


# =============================================================================
# Frequency Response
# =============================================================================


class TestFrequencyResponse:
    """Tests for the spline fit frequency response H."""

    def test_dc_passes(self):
        """H(0) is exactly one."""
        assert frequency_response(CUBIC, 0.0) == pytest.approx(1.0, abs=1e-14)

    def test_integer_zeros(self):
        """H vanishes at nonzero integers."""
        values = CUBIC(np.array([1.0, 2.0, 3.0, -1.0, -5.0]))
        np.testing.assert_allclose(values, 0.0, atol=1e-14)

    def test_even(self):
        """H(-nu) equals H(nu)."""
        nu = np.linspace(0.0, 3.0, 61)
        np.testing.assert_allclose(CUBIC(-nu), CUBIC(nu), atol=1e-14)

    def test_matches_truncated_sum(self):
        """Closed form agrees with the direct sinc series."""
        k = np.arange(-10000, 10001)
        for nu in (0.1, 0.25, 0.5, 0.8, 1.3):
            direct = np.sinc(nu) ** 8 / np.sum(np.sinc(nu + k) ** 8)
            assert frequency_response(CUBIC, nu) == pytest.approx(direct, rel=1e-9)

    def test_half_band_value(self):
        """At nu = 0.5 two aliases share the energy, so H <= 0.5."""
        assert 0.0 < frequency_response(CUBIC, 0.5) <= 0.5

    def test_range(self):
        """H stays within [0, 1]."""
        values = CUBIC(np.linspace(-4.0, 4.0, 801))
        assert np.all(values >= -1e-15)
        assert np.all(values <= 1.0 + 1e-12)

    def test_scalar_returns_float(self):
        """A scalar argument gives a Python float."""
        assert isinstance(frequency_response(CUBIC, 0.3), float)

    def test_other_orders(self):
        """Linear splines have a wider transition than cubic ones."""
        linear = FrequencyResponseModel(1)
        assert frequency_response(linear, 0.0) == pytest.approx(1.0)
        assert frequency_response(linear, 0.3) < frequency_response(CUBIC, 0.3)

    def test_rejects_bad_input(self):
        """Negative orders and non-finite frequencies are invalid."""
        with pytest.raises(InvalidInputError):
            FrequencyResponseModel(-1)
        with pytest.raises(InvalidInputError):
            CUBIC(np.array([0.1, np.nan]))


# =============================================================================
# Quality
# =============================================================================


class TestQuality:
    """Tests for the quality function."""

    def test_tone_quality(self):
        """A single tone keeps H(f dt)^2 of its energy."""
        spectrum = tone_spectrum()
        for dt in (0.05, 0.3, 0.6):
            expected = frequency_response(CUBIC, 1.0 * dt) ** 2
            assert quality(spectrum, dt) == pytest.approx(expected, rel=1e-12)

    def test_bounds(self):
        """Quality lies in [0, 1]."""
        spectrum = noise_spectrum(0)
        for dt in (0.01, 0.05, 0.2, 1.0):
            assert 0.0 <= quality(spectrum, dt) <= 1.0

    def test_zero_energy(self):
        """An all-zero spectrum has no defined quality."""
        with pytest.raises(DegenerateInputError):
            quality(ScalarSpectrum(np.zeros(16), 10.0), 0.1)

    def test_rejects_bad_spacing(self):
        """Knot spacing must be positive."""
        with pytest.raises(InvalidInputError):
            quality(tone_spectrum(), 0.0)


# =============================================================================
# Brent Root
# =============================================================================


class TestBrentRoot:
    """Tests for the scalar root finder."""

    def test_sqrt_two(self):
        """Finds sqrt(2) from x^2 - 2 on [0, 2]."""
        assert brent_root(lambda x: x * x - 2.0, 0.0, 2.0) == pytest.approx(np.sqrt(2.0), abs=1e-10)

    def test_symmetric_root(self):
        """Finds 0 for f(x) = x on [-1, 1]."""
        assert brent_root(lambda x: x, -1.0, 1.0) == pytest.approx(0.0, abs=1e-10)

    def test_cosine(self):
        """Finds pi/2 for cos on [0, 3]."""
        assert brent_root(np.cos, 0.0, 3.0) == pytest.approx(np.pi / 2, abs=1e-10)

    def test_no_sign_change(self):
        """A bracket without a sign change raises."""
        with pytest.raises(BracketError):
            brent_root(lambda x: x * x + 1.0, -1.0, 1.0)

    def test_reversed_bracket(self):
        """The lower bound must be below the upper bound."""
        with pytest.raises(BracketError):
            brent_root(lambda x: x, 1.0, -1.0)


# =============================================================================
# Knot Spacing Selection
# =============================================================================


class TestSelectKnotSpacing:
    """Tests for select_knot_spacing."""

    def test_dt_max_early_exit(self):
        """When dt_max already reaches the quality it is returned."""
        assert select_knot_spacing(tone_spectrum(), 0.9, 0.05) == 0.05

    def test_hits_requested_quality(self):
        """The selected spacing reaches q_hat to within 1e-4."""
        spectrum = tone_spectrum()
        for q_hat in (0.9, 0.95, 0.99):
            dt = select_knot_spacing(spectrum, q_hat, 1.0)
            assert 2.0 / 100.0 <= dt <= 1.0
            assert abs(quality(spectrum, dt) - q_hat) <= 1e-4

    def test_noise_spectrum_quality(self):
        """Works on a broadband spectrum too."""
        spectrum = noise_spectrum(1)
        dt = select_knot_spacing(spectrum, 0.97, 0.5)
        assert abs(quality(spectrum, dt) - 0.97) <= 1e-4

    def test_higher_quality_shorter_spacing(self):
        """A stricter quality never selects a longer spacing."""
        spectrum = noise_spectrum(2)
        spacings = [select_knot_spacing(spectrum, q, 0.5) for q in (0.9, 0.95, 0.99)]
        assert spacings[0] >= spacings[1] >= spacings[2]

    def test_unit_quality_saturates(self):
        """q_hat = 1 is unreachable and returns the minimum spacing with a warning."""
        with pytest.warns(SaturationWarning):
            dt = select_knot_spacing(tone_spectrum(), 1.0, 1.0)
        assert dt == pytest.approx(2.0 / 100.0)

    def test_zero_energy_returns_dt_max(self):
        """A flat signal needs no knots beyond dt_max."""
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert select_knot_spacing(ScalarSpectrum(np.zeros(64), 100.0), 0.99, 0.4) == 0.4

    def test_rejects_bad_arguments(self):
        """Quality outside (0, 1] or dt_max below two samples is invalid."""
        spectrum = tone_spectrum()
        with pytest.raises(InvalidInputError):
            select_knot_spacing(spectrum, 0.0, 1.0)
        with pytest.raises(InvalidInputError):
            select_knot_spacing(spectrum, 1.5, 1.0)
        with pytest.raises(InvalidInputError):
            select_knot_spacing(spectrum, 0.9, 0.01)


# =============================================================================
# Residual Variance
# =============================================================================


class TestPredictResidualVariance:
    """Tests for predict_residual_variance."""

    def test_noise_only(self):
        """With no signal energy only the filtered noise remains."""
        spectrum = ScalarSpectrum(np.zeros(500), 100.0)
        prediction = predict_residual_variance(spectrum, 0.1, 0.2)
        h = CUBIC(spectrum.frequencies * 0.1)
        assert prediction.sigma_e2 == 0.0
        assert prediction.sigma_f2 == pytest.approx(0.04 * np.sum(h * h) / 500)
        assert prediction.gamma == pytest.approx(1.0 / prediction.sigma_r2)

    def test_dense_knots_limit(self):
        """As dt goes to zero the fit keeps everything: sigma_r2 -> sigma_n^2."""
        prediction = predict_residual_variance(noise_spectrum(3), 1e-7, 0.1)
        assert prediction.sigma_e2 == pytest.approx(0.0, abs=1e-12)
        assert prediction.sigma_r2 == pytest.approx(0.01, rel=1e-6)

    def test_tone_error(self):
        """Approximation error of a tone is (1 - H)^2 of its energy over N."""
        spectrum = tone_spectrum(amplitude=3.0)
        h = frequency_response(CUBIC, 0.4)
        prediction = predict_residual_variance(spectrum, 0.4, 0.0)
        assert prediction.sigma_e2 == pytest.approx((1.0 - h) ** 2 * 18.0 / 1000, rel=1e-12)
        assert prediction.sigma_f2 == 0.0

    def test_total_is_sum(self):
        """sigma_r2 is the error plus the filtered noise."""
        prediction = predict_residual_variance(noise_spectrum(4), 0.05, 0.02)
        assert prediction.sigma_r2 == pytest.approx(prediction.sigma_e2 + prediction.sigma_f2)

    def test_degenerate_weight(self):
        """Zero signal and zero noise give no usable weight."""
        with pytest.raises(DegenerateWeightError):
            predict_residual_variance(ScalarSpectrum(np.zeros(64), 100.0), 0.1, 0.0)

    def test_rejects_negative_noise(self):
        """Noise std must be nonnegative."""
        with pytest.raises(InvalidInputError):
            predict_residual_variance(tone_spectrum(), 0.1, -1.0)


# =============================================================================
# Weight Plans
# =============================================================================


class TestWeightPlans:
    """Tests for weights_from_quality, inverse_noise_plan and plan_from_imu."""

    def test_plan_fields(self):
        """Each modality gets its own spacing and weight."""
        gyro, accel = noise_spectrum(5), noise_spectrum(6, scale=5.0)
        plan = weights_from_quality(gyro, accel, 0.99, 0.97, 0.01, 0.05, 0.5)
        assert plan.requested_quality == (0.99, 0.97)
        assert plan.dt_so3 == pytest.approx(select_knot_spacing(gyro, 0.99, 0.5))
        assert plan.dt_r3 == pytest.approx(select_knot_spacing(accel, 0.97, 0.5))
        assert plan.gyro.gamma == pytest.approx(1.0 / plan.gyro.sigma_r2)

    def test_noise_changes_weight_not_spacing(self):
        """Doubling the gyroscope noise keeps dt_so3 and lowers its weight."""
        gyro, accel = noise_spectrum(7), noise_spectrum(8)
        a = weights_from_quality(gyro, accel, 0.99, 0.97, 0.01, 0.05, 0.5)
        b = weights_from_quality(gyro, accel, 0.99, 0.97, 0.02, 0.05, 0.5)
        assert a.dt_so3 == b.dt_so3
        assert b.gyro.gamma < a.gyro.gamma
        assert b.accel.gamma == pytest.approx(a.accel.gamma)

    def test_inverse_noise_plan(self):
        """Baseline weights are 1 / sigma^2 with a fixed spacing."""
        plan = inverse_noise_plan(0.01, 0.1, 0.1)
        assert plan.dt_so3 == plan.dt_r3 == 0.1
        assert plan.gyro.gamma == pytest.approx(1e4)
        assert plan.accel.gamma == pytest.approx(100.0)
        assert plan.gyro.sigma_e2 == 0.0
        assert plan.requested_quality is None

    def test_inverse_noise_plan_needs_noise(self):
        """A zero noise std gives no weight."""
        with pytest.raises(DegenerateWeightError):
            inverse_noise_plan(0.0, 0.1, 0.1)

    def test_plan_from_imu(self):
        """Plans straight from an IMU log honor the config."""
        fs = 200.0
        times = np.arange(2000) / fs
        rng = np.random.default_rng(9)
        gyro = np.column_stack([np.sin(2 * np.pi * 0.7 * times), np.cos(times), 0.1 * times])
        wobble = 0.3 * np.sin(2 * np.pi * 1.5 * times)[:, None]
        accel = np.tile([0.0, 0.0, 9.81], (2000, 1)) + wobble
        imu = ImuLog(times, gyro + 0.01 * rng.standard_normal((2000, 3)), accel)
        config = FusionConfig(quality_gyro=0.98, quality_accel=0.95, dt_max=0.4)
        plan = plan_from_imu(imu, config)
        assert plan.requested_quality == (0.98, 0.95)
        assert 2.0 / fs <= plan.dt_so3 <= 0.4
        assert 2.0 / fs <= plan.dt_r3 <= 0.4
        spectrum = vector_spectrum(imu.gyro, fs)
        if plan.dt_so3 < 0.4:
            assert abs(quality(spectrum, plan.dt_so3) - 0.98) <= 1e-4

    def test_static_pure_noise_saturates(self):
        """A static log holds only white noise, so both spacings saturate at two samples."""
        fs = 200.0
        times = np.arange(2000) / fs
        rng = np.random.default_rng(11)
        gyro = 0.01 * rng.standard_normal((2000, 3))
        accel = np.array([0.0, 0.0, 9.81]) + 0.05 * rng.standard_normal((2000, 3))
        with pytest.warns(SaturationWarning) as record:
            plan = plan_from_imu(ImuLog(times, gyro, accel), FusionConfig())
        assert sum(issubclass(w.category, SaturationWarning) for w in record) == 2
        assert plan.dt_so3 == pytest.approx(2.0 / fs)
        assert plan.dt_r3 == pytest.approx(2.0 / fs)
        assert plan.gyro.gamma > 0 and plan.accel.gamma > 0
