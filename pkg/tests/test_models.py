"""
Tests for data classes and configuration documents.
"""

import numpy as np
import pytest

from sew_fusion import (
    Band,
    CameraModel,
    ConfigError,
    FusionConfig,
    ImuBiases,
    ImuLog,
    InvalidInputError,
    Landmark,
    Metrics,
    Observation,
    ResidualPrediction,
    ResidualWeightPlan,
    ScenarioConfig,
    TrackSet,
)


class TestImuLog:
    """Tests for ImuLog validation."""

    def test_valid_log(self):
        """Rows are exposed as ImuSample objects."""
        imu = ImuLog([0.0, 0.5, 1.0], np.zeros((3, 3)), np.ones((3, 3)))
        assert len(imu) == 3
        assert imu.sample_rate == pytest.approx(2.0)
        samples = list(imu)
        assert samples[1].t == 0.5
        np.testing.assert_array_equal(samples[2].accel, [1.0, 1.0, 1.0])

    def test_not_increasing(self):
        """Timestamps must be strictly increasing."""
        with pytest.raises(InvalidInputError):
            ImuLog([0.0, 0.0], np.zeros((2, 3)), np.zeros((2, 3)))

    def test_mismatched_lengths(self):
        """All columns must have the same length."""
        with pytest.raises(InvalidInputError):
            ImuLog([0.0, 1.0], np.zeros((3, 3)), np.zeros((2, 3)))

    def test_non_finite(self):
        """NaN measurements are rejected."""
        gyro = np.zeros((2, 3))
        gyro[1, 1] = np.nan
        with pytest.raises(InvalidInputError):
            ImuLog([0.0, 1.0], gyro, np.zeros((2, 3)))


class TestTrackSet:
    """Tests for TrackSet."""

    def test_sorted_and_select(self):
        """Rows sort by track then frame; select keeps masked rows."""
        tracks = TrackSet([2, 1, 1], [0, 1, 0], np.zeros((3, 2)), [0.0, 0.1, 0.0])
        ordered = tracks.sorted()
        assert ordered.track_id.tolist() == [1, 1, 2]
        assert ordered.frame.tolist() == [0, 1, 0]
        assert len(tracks.select(tracks.track_id == 1)) == 2

    def test_observation(self):
        """Rows are exposed as Observation objects."""
        tracks = TrackSet([4], [7], [[10.0, 20.0]], [0.5])
        obs = tracks.observation(0)
        assert (obs.track_id, obs.frame_index, obs.frame_start_time) == (4, 7, 0.5)

    def test_empty(self):
        """An empty track set has no rows."""
        assert len(TrackSet.empty()) == 0


class TestCameraModel:
    """Tests for CameraModel."""

    def test_readout_bounds(self):
        """Readout time must be in [0, frame_period)."""
        CameraModel(readout_time=0.0)
        with pytest.raises(InvalidInputError):
            CameraModel(readout_time=0.05, frame_period=0.04)
        with pytest.raises(InvalidInputError):
            CameraModel(readout_time=-0.01)

    def test_from_dict_defaults(self):
        """Missing keys take defaults; unknown keys are rejected."""
        camera = CameraModel.from_dict({"fx": 700.0})
        assert camera.fx == 700.0
        assert camera.fy == CameraModel().fy
        with pytest.raises(ConfigError):
            CameraModel.from_dict({"focal": 700.0})

    def test_from_dict_bad_type(self):
        """Badly typed values are config errors, not type errors."""
        with pytest.raises(ConfigError, match="camera"):
            CameraModel.from_dict({"fx": "wide"})


class TestLandmark:
    """Tests for Landmark."""

    def test_negative_inverse_depth(self):
        """Inverse depth must be nonnegative."""
        obs = Observation(1, 0, np.zeros(2), 0.0)
        assert Landmark(1, obs).inverse_depth == 0.0
        with pytest.raises(InvalidInputError):
            Landmark(1, obs, -0.5)


class TestWeightPlan:
    """Tests for residual predictions and weight plans."""

    def test_dict_round_trip(self):
        """Plans survive to_dict and from_dict."""
        prediction = ResidualPrediction(0.1, 0.2, 0.3, 1 / 0.3)
        plan = ResidualWeightPlan(0.05, 0.1, prediction, prediction, (0.99, 0.97))
        assert ResidualWeightPlan.from_dict(plan.to_dict()) == plan

    def test_fixed_plan_has_no_quality(self):
        """Plans without requested qualities omit the key."""
        prediction = ResidualPrediction(0.0, 1.0, 1.0, 1.0)
        plan = ResidualWeightPlan(0.1, 0.1, prediction, prediction)
        assert "requested_quality" not in plan.to_dict()

    def test_positive_spacing(self):
        """Knot spacings must be positive."""
        prediction = ResidualPrediction(0.0, 1.0, 1.0, 1.0)
        with pytest.raises(InvalidInputError):
            ResidualWeightPlan(0.0, 0.1, prediction, prediction)


class TestFusionConfig:
    """Tests for FusionConfig."""

    def test_defaults_round_trip(self):
        """Defaults survive to_dict and from_dict."""
        config = FusionConfig()
        assert FusionConfig.from_dict(config.to_dict()) == config

    def test_unknown_key(self):
        """Unknown keys are named in the error."""
        with pytest.raises(ConfigError, match="qualiti_gyro"):
            FusionConfig.from_dict({"qualiti_gyro": 0.9})

    def test_quality_range(self):
        """Qualities must be in (0, 1]."""
        FusionConfig(quality_gyro=1.0)
        with pytest.raises(ConfigError):
            FusionConfig(quality_accel=0.0)

    def test_gravity_tuple(self):
        """Gravity lists become tuples."""
        config = FusionConfig.from_dict({"gravity": [0, 0, -9.8]})
        assert config.gravity == (0.0, 0.0, -9.8)

    @pytest.mark.parametrize(
        "data",
        [
            {"huber_c": "abc"},
            {"max_iterations": None},
            {"gravity": 3},
            {"gravity": ["down", 0, 0]},
        ],
    )
    def test_bad_type(self, data):
        """Badly typed values are config errors naming the section."""
        with pytest.raises(ConfigError, match="fusion"):
            FusionConfig.from_dict(data)

    def test_warm_start_spacing(self):
        """The warm-up knot spacing defaults to 0.1 s; 0 turns it off."""
        assert FusionConfig().coarse_knot_spacing == 0.1
        assert FusionConfig(coarse_knot_spacing=0.0).coarse_knot_spacing == 0.0
        with pytest.raises(ConfigError, match="coarse_knot_spacing"):
            FusionConfig(coarse_knot_spacing=-0.1)
        with pytest.raises(ConfigError, match="knot_margin"):
            FusionConfig(knot_margin=-1)


class TestScenarioConfig:
    """Tests for ScenarioConfig."""

    def test_minimum_duration(self):
        """Scenarios last at least 2 s."""
        with pytest.raises(ConfigError):
            ScenarioConfig(duration=1.0)

    def test_camera_follows_timing(self):
        """The default camera takes the scenario's rolling-shutter timing."""
        config = ScenarioConfig(readout_time=0.01, frame_rate=20.0)
        assert config.camera.readout_time == 0.01
        assert config.camera.frame_period == pytest.approx(0.05)

    def test_truth_knot_spacing(self):
        """The truth knot spacing defaults to four IMU samples."""
        assert ScenarioConfig(imu_rate=200.0).knot_spacing == pytest.approx(0.02)
        assert ScenarioConfig(truth_knot_spacing=0.1).knot_spacing == 0.1

    def test_dict_round_trip(self):
        """Scenario configs survive to_dict and from_dict."""
        config = ScenarioConfig(seed=5, closed_loop=True)
        again = ScenarioConfig.from_dict(config.to_dict())
        assert again.to_dict() == config.to_dict()

    def test_bad_band(self):
        """Band edges must be ordered."""
        with pytest.raises(ConfigError):
            Band(2.0, 1.0, 0.1)

    @pytest.mark.parametrize(
        "data",
        [{"gravity": 3}, {"duration": "long"}, {"landmark_distance": "far"}],
    )
    def test_bad_type(self, data):
        """Badly typed values are config errors naming the section."""
        with pytest.raises(ConfigError, match="scenario"):
            ScenarioConfig.from_dict(data)


class TestSmallTypes:
    """Tests for biases and metrics."""

    def test_biases(self):
        """Biases need three finite components."""
        assert ImuBiases().to_dict() == {"gyro": [0.0, 0.0, 0.0], "accel": [0.0, 0.0, 0.0]}
        with pytest.raises(InvalidInputError):
            ImuBiases(gyro=[0.0, 1.0])

    def test_metrics_optional_fields(self):
        """Unset metrics are omitted."""
        assert Metrics(epe=0.5).to_dict() == {"epe": 0.5}
        assert Metrics(epe=0.5, epd=0.1).to_dict() == {"epe": 0.5, "epd": 0.1}
