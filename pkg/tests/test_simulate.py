"""
Tests for synthetic scenario generation.
"""

import numpy as np
import pytest

from sew_fusion import (
    PRESETS,
    Band,
    ConfigError,
    InvalidInputError,
    ScenarioConfig,
    TrackSet,
    apply_dropout,
    generate_imu,
    generate_observations,
    generate_scenario,
    generate_test_signal,
    generate_trajectory,
    generate_truth,
    predict_gyro,
    preset_config,
    project,
)
from sew_fusion.simulate import band_limited_noise, frame_times, imu_times, noise_free


def small_config(**overrides) -> ScenarioConfig:
    values = {"seed": 4, "duration": 2.0, "imu_rate": 100.0, "n_landmarks": 8}
    values.update(overrides)
    return preset_config("handheld", **values)


# =============================================================================
# Presets
# =============================================================================


class TestPresets:
    """Tests for named scenario presets."""

    def test_all_presets_build(self):
        """Every preset yields a valid config."""
        for name in PRESETS:
            config = preset_config(name, duration=3.0)
            assert config.duration == 3.0
            assert len(config.position_bands) >= 1

    def test_unknown_preset(self):
        """Unknown names list the valid ones."""
        with pytest.raises(ConfigError, match="handheld"):
            preset_config("skydiving")

    def test_overrides_win(self):
        """Keyword overrides replace preset values."""
        bands = [{"low": 0.0, "high": 1.0, "amplitude": 0.1}]
        config = preset_config("fast", position_bands=bands)
        assert config.position_bands == (Band(0.0, 1.0, 0.1),)

    def test_noise_free(self):
        """noise_free removes every noise source."""
        config = noise_free(small_config(outlier_rate=0.1), knot_spacing=0.1)
        assert config.sigma_gyro == config.sigma_accel == config.pixel_noise == 0.0
        assert config.outlier_rate == 0.0
        assert config.knot_spacing == 0.1


# =============================================================================
# Filtered Noise
# =============================================================================


class TestBandLimitedNoise:
    """Tests for band_limited_noise and generate_test_signal."""

    def test_amplitude(self):
        """A single band has the requested standard deviation."""
        rng = np.random.default_rng(0)
        x = band_limited_noise(rng, 4000, 100.0, [Band(1.0, 5.0, 0.3)])
        assert x.shape == (4000,)
        assert np.std(x) == pytest.approx(0.3, rel=1e-9)

    def test_band_limited(self):
        """No energy leaks outside the band."""
        rng = np.random.default_rng(1)
        x = band_limited_noise(rng, 2000, 100.0, [Band(2.0, 4.0, 1.0)], dim=3)
        spectrum = np.abs(np.fft.rfft(x, axis=0))
        freqs = np.fft.rfftfreq(2000, d=0.01)
        outside = (freqs < 2.0) | (freqs >= 4.0)
        assert np.max(spectrum[outside]) <= 1e-9 * np.max(spectrum)

    def test_empty_band_skipped(self):
        """A band without frequency bins contributes nothing."""
        rng = np.random.default_rng(2)
        x = band_limited_noise(rng, 10, 10.0, [Band(0.1, 0.2, 1.0)])
        np.testing.assert_array_equal(x, 0.0)

    def test_test_signal(self):
        """The test signal has duration * rate samples and is reproducible."""
        a = generate_test_signal(7, 10.0, 500.0)
        b = generate_test_signal(7, 10.0, 500.0)
        assert a.n == 5000
        assert a.sample_rate == 500.0
        np.testing.assert_array_equal(a.samples, b.samples)


# =============================================================================
# Trajectory and Measurements
# =============================================================================


class TestTruth:
    """Tests for ground-truth generation."""

    def test_anchored_at_origin(self):
        """The first control pose is the identity at the origin."""
        traj = generate_trajectory(small_config())
        np.testing.assert_allclose(traj.rotation.matrices[0], np.eye(3), atol=1e-12)
        np.testing.assert_allclose(traj.position.control_points[0], 0.0, atol=1e-12)

    def test_valid_interval_covers_duration(self):
        """The truth can be evaluated over the whole scenario."""
        config = small_config()
        lo, hi = generate_trajectory(config).valid_interval
        assert lo <= 0.0 + 1e-12
        assert hi >= config.duration - 1e-12

    def test_closed_loop(self):
        """A closed loop ends at its starting pose."""
        config = small_config(closed_loop=True, duration=4.0)
        traj = generate_trajectory(config)
        lo, hi = traj.valid_interval
        np.testing.assert_allclose(
            traj.position.evaluate(hi), traj.position.evaluate(lo), atol=1e-9
        )
        np.testing.assert_allclose(
            traj.rotation.evaluate(hi), traj.rotation.evaluate(lo), atol=1e-9
        )

    def test_landmarks_in_range(self):
        """Landmarks lie within the configured distance range."""
        config = small_config(n_landmarks=200)
        distances = np.linalg.norm(generate_truth(config).landmarks, axis=1)
        lo, hi = config.landmark_distance
        assert np.all((distances >= lo) & (distances <= hi))


class TestMeasurements:
    """Tests for IMU and camera measurement generation."""

    def test_noise_free_imu(self):
        """Without noise the IMU reads the true rates."""
        config = noise_free(small_config())
        truth = generate_truth(config)
        imu = generate_imu(truth, config)
        np.testing.assert_allclose(imu.gyro, predict_gyro(truth.trajectory, imu.times))
        assert imu.times[0] == 0.0
        assert imu.times[-1] == pytest.approx(config.duration)

    def test_imu_noise_level(self):
        """IMU noise has the configured standard deviation."""
        config = small_config(sigma_gyro=0.05, imu_rate=400.0, duration=10.0)
        clean = noise_free(config)
        truth = generate_truth(config)
        diff = generate_imu(truth, config).gyro - generate_imu(truth, clean).gyro
        assert np.std(diff) == pytest.approx(0.05, rel=0.05)

    def test_rolling_shutter_consistency(self):
        """Noise-free pixels project from the pose at their own row time."""
        config = noise_free(small_config())
        scenario = generate_scenario(config)
        camera = scenario.camera
        tracks = scenario.tracks
        traj = scenario.truth.trajectory
        times = tracks.frame_time + camera.readout_time * tracks.pixels[:, 1] / camera.height
        rotation = traj.rotation.evaluate(times)
        position = traj.position.evaluate(times)
        points = scenario.truth.landmarks[tracks.track_id]
        local = np.einsum("mji,mj->mi", rotation, points - position)
        pixels, valid = project(local, camera)
        assert np.all(valid)
        np.testing.assert_allclose(pixels, tracks.pixels, atol=1e-6)

    def test_observations_inside_image(self):
        """Every kept observation lies in the image and frames end in time."""
        config = small_config(outlier_rate=0.2)
        scenario = generate_scenario(config)
        camera = scenario.camera
        px = scenario.tracks.pixels
        assert np.all((px[:, 0] >= 0) & (px[:, 0] <= camera.width))
        assert np.all((px[:, 1] >= 0) & (px[:, 1] <= camera.height))
        starts = frame_times(config, camera)
        assert starts[-1] + camera.readout_time <= config.duration + 1e-9

    def test_tracks_sorted(self):
        """Observations are ordered by track then frame."""
        tracks = generate_observations(
            generate_truth(small_config()), small_config().camera, small_config()
        )
        order = np.lexsort((tracks.frame, tracks.track_id))
        np.testing.assert_array_equal(order, np.arange(len(tracks)))

    def test_deterministic(self):
        """Equal seeds give identical scenarios; different seeds differ."""
        a = generate_scenario(small_config())
        b = generate_scenario(small_config())
        c = generate_scenario(small_config(seed=5))
        np.testing.assert_array_equal(a.imu.gyro, b.imu.gyro)
        np.testing.assert_array_equal(a.tracks.pixels, b.tracks.pixels)
        assert not np.array_equal(a.imu.gyro, c.imu.gyro)

    def test_imu_times(self):
        """IMU samples cover [0, duration] at the configured rate."""
        times = imu_times(small_config(duration=3.0, imu_rate=50.0))
        assert times.size == 151
        assert times[-1] == pytest.approx(3.0)


# =============================================================================
# Dropout
# =============================================================================


class TestApplyDropout:
    """Tests for trailing frame dropout."""

    @pytest.fixture
    def tracks(self):
        frame = np.arange(10)
        return TrackSet(np.zeros(10), frame, np.full((10, 2), 5.0), frame * 0.5)

    def test_removes_trailing_frames(self, tracks):
        """Without an end time the recording ends one frame interval after the last start."""
        kept = apply_dropout(tracks, 1.0)
        assert kept.frame_time.max() == pytest.approx(4.0)
        assert len(kept) == 9

    def test_explicit_end(self, tracks):
        """The recording end can be given explicitly."""
        kept = apply_dropout(tracks, 1.0, t_end=5.0)
        assert kept.frame_time.max() == pytest.approx(4.0)
        kept = apply_dropout(tracks, 1.0, t_end=4.5)
        assert kept.frame_time.max() == pytest.approx(3.5)

    def test_zero_dropout(self, tracks):
        """Zero dropout keeps every observation."""
        assert len(apply_dropout(tracks, 0.0)) == 10

    def test_negative_dropout(self, tracks):
        """Negative dropout is invalid."""
        with pytest.raises(InvalidInputError):
            apply_dropout(tracks, -1.0)

    def test_almost_whole_recording(self, tracks):
        """A dropout just short of the recording keeps the first frame."""
        kept = apply_dropout(tracks, 5.0 - 1e-6, t_end=5.0)
        assert len(kept) == 1
        assert kept.frame_time.tolist() == [0.0]

    @pytest.mark.parametrize("dropout", [5.0, 7.5])
    def test_whole_recording(self, tracks, dropout):
        """A dropout covering the recording is invalid."""
        with pytest.raises(InvalidInputError, match="whole recording"):
            apply_dropout(tracks, dropout, t_end=5.0)

    def test_generated_scenario(self):
        """On a generated scenario only first-frame observations survive a near-total dropout."""
        scenario = generate_scenario(small_config())
        tracks = scenario.tracks
        duration = scenario.config.duration
        first = tracks.frame_time.min()
        kept = apply_dropout(tracks, duration - first - 1e-6, t_end=duration)
        assert len(kept) >= 1
        assert len(kept) == np.count_nonzero(tracks.frame_time == first)
        np.testing.assert_array_equal(kept.frame_time, first)
