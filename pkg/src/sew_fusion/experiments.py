"""
Experiments.

Synthetic sweeps that regenerate the evaluation curves as data: the 1D
spline fit illustration, quality tracking, the IMU weight sweep and the
visual dropout ladder. Each driver returns an ExperimentResult holding
one CSV table and a JSON summary with the acceptance statistics.
"""

import inspect
import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
from scipy import fft, ndimage

from .bspline import Trajectory, fit_least_squares_1d, trajectory_length
from .errors import ConfigError, DegenerateInputError
from .fusion import FusionResult, endpoint_distortion, scale_error, solve
from .io import write_csv, write_json
from .models import FusionConfig, ResidualWeightPlan, ScenarioConfig, UniformSignal
from .sensors import predict_accel, predict_gyro
from .sew import inverse_noise_plan, plan_from_imu, predict_residual_variance
from .simulate import Scenario, apply_dropout, generate_scenario, generate_test_signal
from .spectral import scalar_spectrum

logger = logging.getLogger(__name__)

QUALITY_LEVELS = (0.90, 0.95, 0.97, 0.99, 0.995)
WEIGHT_SCALES = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)
DROPOUT_LADDER = (0.0, 0.5, 1.0, 2.0, 4.0)

# Knot spacing of the fixed-spacing inverse-noise baseline (s).
BASELINE_KNOT_SPACING = 0.1

# Band over which the measured IMU transfer is averaged (Hz).
TRANSFER_SMOOTHING_HZ = 0.5


@dataclass
class ExperimentResult:
    """Table and summary produced by one experiment.

    Attributes:
        name: Experiment name; also the CSV file stem
        header: CSV column names
        rows: Table rows
        summary: JSON-ready acceptance statistics
    """

    name: str
    header: tuple[str, ...]
    rows: list[tuple[float, ...]] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        """One column of the table as a float array."""
        index = self.header.index(name)
        return np.array([row[index] for row in self.rows], dtype=float)

    def write(self, out_dir: str | Path) -> list[Path]:
        """Write <name>.csv and summary.json into out_dir."""
        directory = Path(out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        table = directory / f"{self.name}.csv"
        summary = directory / "summary.json"
        write_csv(table, self.header, self.rows)
        write_json(summary, {"experiment": self.name, **self.summary})
        return [table, summary]


def _endpoint_error(estimate: Trajectory, truth: Trajectory, t0: float, t1: float) -> float:
    # Displacement error over [t0, t1]; the plain EPE when the truth is a closed loop.
    return endpoint_distortion(estimate, truth, t1, t0)


def _span(scenario: Scenario) -> tuple[float, float]:
    return float(scenario.imu.times[0]), float(scenario.imu.times[-1])


def _fuse(
    scenario: Scenario, plan: ResidualWeightPlan, config: FusionConfig, dropout: float = 0.0
) -> FusionResult:
    tracks = scenario.tracks
    if dropout > 0:
        tracks = apply_dropout(tracks, dropout, t_end=_span(scenario)[1])
    return solve(tracks, scenario.imu, scenario.camera, plan, config)[1]


# =============================================================================
# Spline fit illustration
# =============================================================================


def run_spline_fit(
    scenario: ScenarioConfig,
    fusion: FusionConfig,
    duration: float = 10.0,
    sample_rate: float = 500.0,
    sigma_n: float = 0.1,
    n_points: int = 30,
    dt_min: float = 0.02,
    dt_max: float = 1.0,
) -> ExperimentResult:
    """Residual standard deviations of 1D spline fits across knot spacings.

    A filtered-noise signal plus white noise of std sigma_n is fitted at
    log-spaced knot spacings. For each spacing the table holds the
    empirical residual std against the noisy signal, the predicted std,
    sigma_n and the std of the error against the noise-free signal.
    """
    clean = generate_test_signal(scenario.seed, duration, sample_rate)
    noise_rng = np.random.default_rng(np.random.SeedSequence(scenario.seed).spawn(2)[1])
    noisy = UniformSignal(
        clean.samples + sigma_n * noise_rng.standard_normal(clean.n), sample_rate, 0.0
    )
    spectrum = scalar_spectrum(noisy)

    result = ExperimentResult(
        "fig2", ("dt", "sigma_r_empirical", "sigma_r_predicted", "sigma_n", "sigma_r0")
    )
    for dt in np.geomspace(dt_min, dt_max, n_points):
        fitted = fit_least_squares_1d(noisy, float(dt)).evaluate(noisy.times)[:, 0]
        predicted = predict_residual_variance(spectrum, float(dt), sigma_n)
        result.rows.append(
            (
                float(dt),
                float(np.std(noisy.samples - fitted)),
                float(np.sqrt(predicted.sigma_r2)),
                sigma_n,
                float(np.std(clean.samples - fitted)),
            )
        )

    dts = result.column("dt")
    empirical = result.column("sigma_r_empirical")
    predicted_std = result.column("sigma_r_predicted")
    r0 = result.column("sigma_r0")
    best = int(np.argmin(r0))
    above = dts >= dts[best]
    result.summary = {
        "seed": scenario.seed,
        "optimal_dt": float(dts[best]),
        "interior_minimum": 0 < best < len(dts) - 1,
        "max_relative_error_above_optimum": float(
            np.max(np.abs(predicted_std[above] - empirical[above]) / empirical[above])
        ),
        "noise_underestimate_at_max_dt": float(empirical[-1] / sigma_n),
    }
    logger.info("fig2: sigma_r0 minimum at dt=%.3f s", dts[best])
    return result


# =============================================================================
# Quality tracking
# =============================================================================


def output_quality(
    imu_samples: np.ndarray,
    predicted: np.ndarray,
    sample_rate: float,
    smoothing_hz: float = TRANSFER_SMOOTHING_HZ,
) -> float:
    """Quality of a predicted IMU signal measured through its transfer function.

    The response of the prediction to the measurement is estimated per bin
    as Re(S_xy) / S_xx, with cross and auto spectra summed over the axes and
    averaged over a band of width smoothing_hz. The quality is the squared
    response weighted by the measured power. Unlike a plain energy ratio it
    is not inflated by content the prediction holds that the measurement
    does not (DC excluded).

    Raises:
        DegenerateInputError: If the measured signal has no energy
    """
    measured = np.asarray(imu_samples, dtype=float)
    measured = measured.reshape(measured.shape[0], -1)
    fitted = np.asarray(predicted, dtype=float).reshape(measured.shape)
    x = fft.fft(measured, axis=0)
    y = fft.fft(fitted, axis=0)
    x[0] = 0.0
    y[0] = 0.0
    cross = np.sum(np.real(np.conj(x) * y), axis=1)
    power = np.sum(np.abs(x) ** 2, axis=1)
    total = float(np.sum(power))
    if total <= 0.0:
        raise DegenerateInputError("measured IMU signal has no energy")

    width = max(1, round(smoothing_hz * measured.shape[0] / sample_rate))
    cross_band = ndimage.uniform_filter1d(cross, width, mode="wrap")
    power_band = ndimage.uniform_filter1d(power, width, mode="wrap")
    response = np.divide(
        cross_band, power_band, out=np.zeros_like(cross_band), where=power_band > 0.0
    )
    return float(np.sum(response**2 * power) / total)


def run_quality(
    scenario: ScenarioConfig,
    fusion: FusionConfig,
    qualities: tuple[float, ...] | list[float] = QUALITY_LEVELS,
    n_seeds: int = 5,
) -> ExperimentResult:
    """Requested versus obtained quality over seeded scenarios.

    The same quality is requested for both modalities. The obtained
    quality is measured on the IMU signal predicted by the converged
    trajectory.
    """
    result = ExperimentResult(
        "quality", ("seed", "q_hat", "q_out_gyro", "q_out_accel", "dt_so3", "dt_r3")
    )
    for offset in range(n_seeds):
        seeded = generate_scenario(replace(scenario, seed=scenario.seed + offset))
        imu = seeded.imu
        for q_hat in qualities:
            config = replace(fusion, quality_gyro=q_hat, quality_accel=q_hat)
            plan = plan_from_imu(imu, config)
            fused = _fuse(seeded, plan, config)
            rate = imu.sample_rate
            gyro = predict_gyro(fused.trajectory, imu.times, fused.biases)
            accel = predict_accel(fused.trajectory, imu.times, fused.biases, config.gravity)
            result.rows.append(
                (
                    seeded.config.seed,
                    float(q_hat),
                    output_quality(imu.gyro, gyro, rate),
                    output_quality(imu.accel, accel, rate),
                    plan.dt_so3,
                    plan.dt_r3,
                )
            )
            logger.info("quality: seed=%d q_hat=%g done", seeded.config.seed, q_hat)

    q_hat_col = result.column("q_hat")
    gyro_gap = result.column("q_out_gyro") - q_hat_col
    accel_gap = result.column("q_out_accel") - q_hat_col
    result.summary = {
        "seeds": [scenario.seed + i for i in range(n_seeds)],
        "max_abs_gyro_gap": float(np.max(np.abs(gyro_gap))),
        "max_accel_gap": float(np.max(accel_gap)),
        "min_accel_gap": float(np.min(accel_gap)),
    }
    return result


# =============================================================================
# Weight sweep
# =============================================================================


def _run_metrics(scenario: Scenario, fused: FusionResult) -> dict[str, float]:
    t0, t1 = _span(scenario)
    truth = scenario.truth.trajectory
    stats = fused.report.residual_stats
    return {
        "epe": _endpoint_error(fused.trajectory, truth, t0, t1),
        "scale_error": scale_error(
            trajectory_length(fused.trajectory, t0, t1), trajectory_length(truth, t0, t1)
        ),
        "gyro_std": stats["gyro"]["std"],
        "accel_std": stats["accel"]["std"],
    }


def run_weights(
    scenario: ScenarioConfig,
    fusion: FusionConfig,
    scales: tuple[float, ...] | list[float] = WEIGHT_SCALES,
    baseline_dt: float = BASELINE_KNOT_SPACING,
) -> ExperimentResult:
    """Endpoint and scale error as the IMU weights are scaled by a common factor.

    Knot spacings and base weights come from the requested qualities and
    are kept fixed across the sweep. An inverse-noise run at a fixed knot
    spacing is added to the summary as the baseline.
    """
    generated = generate_scenario(scenario)
    plan = plan_from_imu(generated.imu, fusion)
    result = ExperimentResult(
        "weights", ("weight_scale", "epe", "scale_error", "gyro_std", "accel_std")
    )
    for scale in scales:
        config = replace(fusion, weight_scale_factor=float(scale))
        metrics = _run_metrics(generated, _fuse(generated, plan, config))
        result.rows.append(
            (
                float(scale),
                metrics["epe"],
                metrics["scale_error"],
                metrics["gyro_std"],
                metrics["accel_std"],
            )
        )
        logger.info("weights: scale=%g epe=%.4g m", scale, metrics["epe"])

    baseline_plan = inverse_noise_plan(fusion.sigma_gyro, fusion.sigma_accel, baseline_dt)
    baseline = _run_metrics(generated, _fuse(generated, baseline_plan, fusion))

    scale_col = result.column("weight_scale")
    epe = result.column("epe")
    best = int(np.argmin(epe))
    unit = np.flatnonzero(np.isclose(scale_col, 1.0))
    result.summary = {
        "seed": scenario.seed,
        "plan": plan.to_dict(),
        "argmin_weight_scale": float(scale_col[best]),
        "min_epe": float(epe[best]),
        "epe_at_unit_scale": float(epe[unit[0]]) if unit.size else None,
        "baseline": {"knot_spacing": baseline_dt, **baseline},
    }
    return result


# =============================================================================
# Dropout ladder
# =============================================================================


def run_dropout(
    scenario: ScenarioConfig,
    fusion: FusionConfig,
    dropouts: tuple[float, ...] | list[float] = DROPOUT_LADDER,
) -> ExperimentResult:
    """Endpoint error and endpoint distortion as trailing frames are removed.

    The IMU log is kept whole. The endpoint distortion compares each run
    against the run without dropout.
    """
    generated = generate_scenario(scenario)
    plan = plan_from_imu(generated.imu, fusion)
    t0, t1 = _span(generated)
    truth = generated.truth.trajectory
    full = _fuse(generated, plan, fusion)

    result = ExperimentResult("dropout", ("dropout", "epe", "epd"))
    for dropout in dropouts:
        fused = full if dropout == 0 else _fuse(generated, plan, fusion, dropout=float(dropout))
        result.rows.append(
            (
                float(dropout),
                _endpoint_error(fused.trajectory, truth, t0, t1),
                endpoint_distortion(fused.trajectory, full.trajectory, t1, t0),
            )
        )
        logger.info("dropout: %.2f s done", dropout)

    epd = result.column("epd")
    drops = result.column("dropout")
    ratio = None
    if np.any(drops > 0):
        shortest = int(np.argmin(np.where(drops > 0, drops, np.inf)))
        longest = int(np.argmax(drops))
        if epd[longest] > 0:
            ratio = float(epd[shortest] / epd[longest])
    result.summary = {
        "seed": scenario.seed,
        "plan": plan.to_dict(),
        "epd_inversions": int(np.count_nonzero(np.diff(epd) < 0)),
        "epd_ratio_shortest_to_longest": ratio,
    }
    return result


EXPERIMENTS: dict[str, Callable[..., ExperimentResult]] = {
    "fig2": run_spline_fit,
    "quality": run_quality,
    "weights": run_weights,
    "dropout": run_dropout,
}

# Former names still accepted on the command line and in scenario files.
EXPERIMENT_ALIASES = {"spline_fit": "fig2"}


def canonical_name(name: str) -> str:
    """Registered experiment name for a name or alias."""
    return EXPERIMENT_ALIASES.get(name, name)


def run_experiment(
    name: str,
    scenario: ScenarioConfig | None = None,
    fusion: FusionConfig | None = None,
    **settings: Any,
) -> ExperimentResult:
    """Run a named experiment.

    Args:
        name: One of EXPERIMENTS, or an alias from EXPERIMENT_ALIASES
        scenario: Scenario settings (defaults when omitted)
        fusion: Fusion settings (defaults when omitted)
        **settings: Experiment-specific keyword settings

    Raises:
        ConfigError: On an unknown experiment name or setting
    """
    name = canonical_name(name)
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{name}' (valid: {', '.join(EXPERIMENTS)})")
    driver = EXPERIMENTS[name]
    accepted = set(inspect.signature(driver).parameters) - {"scenario", "fusion"}
    unknown = sorted(set(settings) - accepted)
    if unknown:
        raise ConfigError(f"unknown {name} setting(s): {', '.join(unknown)}")
    logger.info("running experiment %s", name)
    return driver(scenario or ScenarioConfig(), fusion or FusionConfig(), **settings)
