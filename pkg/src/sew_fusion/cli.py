"""
Spline Error Weighting CLI.

Command-line interface: IMU log analysis, experiment reproduction and
end-to-end visual-inertial fusion runs.

Exit codes: 0 success, 2 input or configuration error, 3 numerical failure.
"""

import argparse
import logging
import sys
import warnings
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bspline import trajectory_length
from .errors import DegenerateWeightError, FitError, SewError, SolverAbortError
from .experiments import BASELINE_KNOT_SPACING, EXPERIMENTS, canonical_name, run_experiment
from .fusion import (
    FusionResult,
    endpoint_distortion,
    endpoint_error,
    report_dict,
    residual_histograms,
    scale_error,
    solve,
)
from .io import (
    analysis_to_dict,
    dumps,
    experiment_settings,
    load_fusion_config,
    load_yaml,
    read_imu_csv,
    read_tracks_csv,
    scenario_from_dict,
    write_csv,
    write_json,
    write_trajectory_csv,
)
from .models import CameraModel, FusionConfig, Metrics, ScenarioConfig
from .sew import inverse_noise_plan, plan_from_imu
from .simulate import apply_dropout, generate_scenario
from .spectral import estimate_noise_std, vector_spectrum

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

NUMERICAL_ERRORS = (SolverAbortError, FitError, DegenerateWeightError)

# Command-line flags that override FusionConfig fields.
CONFIG_FLAGS = {
    "quality_gyro": "quality_gyro",
    "quality_accel": "quality_accel",
    "sigma_gyro": "sigma_gyro",
    "sigma_accel": "sigma_accel",
    "dt_max": "dt_max",
    "weight_scale": "weight_scale_factor",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--quality-gyro", type=float, metavar="Q", help="Requested gyro quality")
    parser.add_argument("--quality-accel", type=float, metavar="Q", help="Requested accel quality")
    parser.add_argument("--sigma-gyro", type=float, metavar="S", help="Gyro noise std (rad/s)")
    parser.add_argument("--sigma-accel", type=float, metavar="S", help="Accel noise std (m/s^2)")
    parser.add_argument("--dt-max", type=float, metavar="SEC", help="Largest knot spacing (s)")


def create_parser() -> argparse.ArgumentParser:
    """Create the argument parser."""
    parser = argparse.ArgumentParser(
        prog="sew-fusion",
        description="Spline Error Weighting - knot spacing, residual weights and fusion",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s analyze imu.csv --sigma-gyro 0.01 --sigma-accel 0.05
  %(prog)s experiment fig2 --scenario scenarios/fig2.yaml --out results/fig2
  %(prog)s fuse --scenario scenarios/bodycam.yaml --out results/bodycam
  %(prog)s fuse --tracks tracks.csv --imu imu.csv --config fusion.yaml --out run
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Warnings and errors only")

    commands = parser.add_subparsers(dest="command", metavar="COMMAND")

    analyze = commands.add_parser("analyze", help="Knot spacings and IMU weights for an IMU log")
    analyze.add_argument("imu", type=Path, help="IMU CSV (t,gx,gy,gz,ax,ay,az)")
    _add_config_flags(analyze)
    analyze.add_argument(
        "--estimate-noise",
        action="store_true",
        help="Estimate missing noise stds from the log (heuristic)",
    )
    analyze.add_argument("--out", type=Path, metavar="FILE", help="Output JSON (stdout if omitted)")

    experiment = commands.add_parser("experiment", help="Run a synthetic experiment")
    experiment.add_argument("name", help=f"Experiment ({', '.join(EXPERIMENTS)})")
    experiment.add_argument("--scenario", type=Path, metavar="YAML", help="Scenario file")
    experiment.add_argument("--seed", type=int, help="Override the scenario seed")
    experiment.add_argument("--out", type=Path, default=Path("results"), metavar="DIR")

    fuse = commands.add_parser("fuse", help="Visual-inertial spline fusion")
    fuse.add_argument("--scenario", type=Path, metavar="YAML", help="Synthetic scenario file")
    fuse.add_argument("--tracks", type=Path, metavar="CSV", help="Tracks CSV")
    fuse.add_argument("--imu", type=Path, metavar="CSV", help="IMU CSV")
    fuse.add_argument("--config", type=Path, metavar="YAML", help="Fusion and camera settings")
    _add_config_flags(fuse)
    fuse.add_argument("--seed", type=int, help="Override the scenario seed")
    fuse.add_argument("--weight-scale", type=float, metavar="F", help="IMU weight factor")
    fuse.add_argument("--dropout", type=float, default=0.0, metavar="SEC", help="Trailing dropout")
    fuse.add_argument(
        "--baseline",
        action="store_true",
        help=f"Inverse-noise weights at a fixed {BASELINE_KNOT_SPACING:g} s knot spacing",
    )
    fuse.add_argument("--sample-rate", type=float, default=100.0, metavar="HZ")
    fuse.add_argument("--out", type=Path, default=Path("results"), metavar="DIR")

    return parser


def _configure_logging(parsed_args: argparse.Namespace) -> None:
    level = logging.INFO
    if parsed_args.verbose:
        level = logging.DEBUG
    elif parsed_args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def _apply_overrides(config: FusionConfig, parsed_args: argparse.Namespace) -> FusionConfig:
    values = config.to_dict()
    for flag, key in CONFIG_FLAGS.items():
        value = getattr(parsed_args, flag, None)
        if value is not None:
            values[key] = value
    return FusionConfig.from_dict(values)


def _warning_messages(caught: list[warnings.WarningMessage]) -> list[str]:
    messages = []
    for item in caught:
        message = str(item.message)
        print(f"Warning: {message}", file=sys.stderr)
        messages.append(message)
    return messages


# =============================================================================
# analyze
# =============================================================================


def cmd_analyze(parsed_args: argparse.Namespace) -> int:
    imu = read_imu_csv(parsed_args.imu)
    sigma = {"sigma_gyro": parsed_args.sigma_gyro, "sigma_accel": parsed_args.sigma_accel}
    for key, samples in (("sigma_gyro", imu.gyro), ("sigma_accel", imu.accel)):
        if sigma[key] is not None:
            continue
        if not parsed_args.estimate_noise:
            print(
                f"Error: --{key.replace('_', '-')} is required (or pass --estimate-noise)",
                file=sys.stderr,
            )
            return EXIT_INPUT
        sigma[key] = float(np.mean(estimate_noise_std(samples)))
        logger.info("estimated %s = %.6g (heuristic)", key, sigma[key])
    parsed_args.sigma_gyro = sigma["sigma_gyro"]
    parsed_args.sigma_accel = sigma["sigma_accel"]
    config = _apply_overrides(FusionConfig(), parsed_args)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        plan = plan_from_imu(imu, config)
    document = analysis_to_dict(
        plan,
        vector_spectrum(imu.gyro, imu.sample_rate),
        vector_spectrum(imu.accel, imu.sample_rate),
        _warning_messages(caught),
    )
    document["noise"] = {
        "sigma_gyro": config.sigma_gyro,
        "sigma_accel": config.sigma_accel,
        "estimated": bool(parsed_args.estimate_noise),
    }
    if parsed_args.out:
        write_json(parsed_args.out, document)
        logger.info("wrote %s", parsed_args.out)
    else:
        sys.stdout.write(dumps(document))
    return EXIT_OK


# =============================================================================
# experiment
# =============================================================================


def _load_scenario(
    path: Path | None, seed: int | None
) -> tuple[ScenarioConfig, FusionConfig, dict[str, Any]]:
    data = load_yaml(path) if path else {}
    if seed is not None:
        data["seed"] = seed
    scenario, fusion = scenario_from_dict(data)
    return scenario, fusion, data


def cmd_experiment(parsed_args: argparse.Namespace) -> int:
    scenario, fusion, data = _load_scenario(parsed_args.scenario, parsed_args.seed)
    name = canonical_name(parsed_args.name)
    settings = experiment_settings(data, parsed_args.name) | experiment_settings(data, name)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = run_experiment(name, scenario, fusion, **settings)
    result.summary["warnings"] = _warning_messages(caught)
    for path in result.write(parsed_args.out):
        print(f"Wrote {path}")
    return EXIT_OK


# =============================================================================
# fuse
# =============================================================================


def _write_histograms(path: Path, histograms: dict[str, tuple[Any, Any]]) -> None:
    edges = histograms["gyro"][0]
    names = ("reprojection", "gyro", "accel")
    rows = [
        (float(edges[i]), float(edges[i + 1]), *(int(histograms[n][1][i]) for n in names))
        for i in range(edges.size - 1)
    ]
    write_csv(path, ("bin_low", "bin_high", *names), rows)


def cmd_fuse(parsed_args: argparse.Namespace) -> int:
    if parsed_args.scenario and (parsed_args.tracks or parsed_args.imu):
        print("Error: use either --scenario or --tracks/--imu, not both", file=sys.stderr)
        return EXIT_INPUT
    if not parsed_args.scenario and not (parsed_args.tracks and parsed_args.imu):
        print("Error: fuse needs --scenario or both --tracks and --imu", file=sys.stderr)
        return EXIT_INPUT

    truth = None
    if parsed_args.scenario:
        scenario_config, config, _ = _load_scenario(parsed_args.scenario, parsed_args.seed)
        scenario = generate_scenario(scenario_config)
        tracks, imu, camera = scenario.tracks, scenario.imu, scenario.camera
        truth = scenario.truth.trajectory
    else:
        tracks = read_tracks_csv(parsed_args.tracks)
        imu = read_imu_csv(parsed_args.imu)
        config, loaded_camera = (
            load_fusion_config(parsed_args.config) if parsed_args.config else (FusionConfig(), None)
        )
        camera = loaded_camera or CameraModel()
    config = _apply_overrides(config, parsed_args)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if parsed_args.baseline:
            plan = inverse_noise_plan(config.sigma_gyro, config.sigma_accel, BASELINE_KNOT_SPACING)
        else:
            plan = plan_from_imu(imu, config)
        kept = apply_dropout(tracks, parsed_args.dropout, t_end=float(imu.times[-1]))
        problem, result = solve(kept, imu, camera, plan, config)
        full: FusionResult | None = None
        if parsed_args.dropout > 0:
            full = solve(tracks, imu, camera, plan, config)[1]

    t0, t1 = float(imu.times[0]), float(imu.times[-1])
    metrics = Metrics(epe=endpoint_error(result.trajectory, t0, t1))
    if full is not None:
        metrics.epd = endpoint_distortion(result.trajectory, full.trajectory, t1, t0)
    if truth is not None:
        true_length = trajectory_length(truth, t0, t1)
        if true_length > 0:
            metrics.scale_error = scale_error(
                trajectory_length(result.trajectory, t0, t1), true_length
            )

    out_dir: Path = parsed_args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    write_trajectory_csv(out_dir / "trajectory.csv", result.trajectory, parsed_args.sample_rate)
    _write_histograms(out_dir / "residuals.csv", residual_histograms(problem, result.state))
    write_json(
        out_dir / "metrics.json",
        {
            "metrics": metrics.to_dict(),
            "plan": plan.to_dict(),
            "config": config.to_dict(),
            "report": report_dict(result),
            "warnings": _warning_messages(caught),
        },
    )
    report = result.report
    print(f"EPE: {metrics.epe:.6g} m ({report.termination}, {report.iterations} iterations)")
    print(f"Wrote {out_dir}")
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "experiment": cmd_experiment, "fuse": cmd_fuse}


def main(args: list[str] | None = None) -> int:
    """Main entry point for the CLI."""
    parser = create_parser()
    parsed_args = parser.parse_args(args)

    if parsed_args.command is None:
        parser.print_help()
        return EXIT_OK

    _configure_logging(parsed_args)
    try:
        return COMMANDS[parsed_args.command](parsed_args)
    except NUMERICAL_ERRORS as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except SewError as exc:
        print(f"Error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
