import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from cache import get_cached_result, set_cached_result
from channel.noise import calibrate_noise
from config import Settings, load_scenario
from export.artifacts import CALIBRATION_FILE, DIAGNOSTICS_FILE, persist_results, write_json
from models import (
    ConfigError,
    FilterDesignError,
    NoiseKind,
    NoiseModelSpec,
    ScenarioConfig,
    TreeError,
    WpdmError,
)
from simulation.engine import Stage, override, run_campaign, stream
from simulation.presets import PRESET_NAMES, preset_config
from wavelets.filters import (
    TOL_ORTH,
    TOL_PROTOTYPE,
    build_packet_tree,
    design_prototype_filters,
    filter_diagnostics,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
MIN_CALIBRATION_SAMPLES = 100_000


def _scenario(args: argparse.Namespace) -> ScenarioConfig:
    if getattr(args, "preset", None):
        config = preset_config(args.preset)
    elif args.config:
        config = load_scenario(args.config)
    else:
        config = ScenarioConfig()
    extra = {}
    if getattr(args, "snr", None) is not None:
        extra["snr_grid_db"] = [args.snr]
    if getattr(args, "snr_grid", None):
        extra["snr_grid_db"] = _parse_grid(args.snr_grid)
    try:
        return override(config, master_seed=args.seed, trials_per_point=args.trials, **extra)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def _parse_grid(text: str) -> list[float]:
    """'0,5,10' or 'start:stop:step' (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            count = int(round((stop - start) / step)) + 1
            return [float(v) for v in np.round(start + step * np.arange(count), 9)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"bad SNR grid {text!r}: {e}") from e


def cmd_run(args: argparse.Namespace, settings: Settings) -> int:
    config = _scenario(args)
    workers = args.workers or settings.workers
    out = Path(args.out or settings.output_dir)

    result = None if args.no_cache else get_cached_result(config.config_hash(), settings.cache_path)
    if result is not None:
        logger.info(f"campaign {config.config_hash()[:12]} loaded from cache")
    else:
        result = run_campaign(config, workers=workers)
        if not args.no_cache:
            set_cached_result(result, settings.cache_path)

    persist_results(result, out)
    if result.partial:
        logger.error(f"campaign incomplete: {result.trials_executed} trials executed")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_validate_filters(args: argparse.Namespace, settings: Settings) -> int:
    pair = design_prototype_filters(args.Q, args.K, args.B)
    tree = build_packet_tree(pair, args.Z)
    report = filter_diagnostics(pair, tree, args.tol_orth, args.tol_prototype)

    residuals = ", ".join(f"{r:+.4f}" for r in report.prototype_residuals) or "none"
    print(f"Q={args.Q} K={args.K} B={args.B:.6g} Z={args.Z}: D={report.delay:.5f} K0={report.regularity}")
    print(f"prototype even-shift residuals: {residuals}")
    print(f"max prototype residual {report.prototype_residual:.4f} (tol {report.tol_prototype})")
    print(f"max leaf cross-correlation {report.leaf_cross_correlation_max:.4f} (tol {report.tol_orth})")

    if args.out:
        write_json(args.out, DIAGNOSTICS_FILE, {"filters": report.model_dump(mode="json")})
    return EXIT_OK if report.within_tolerance else EXIT_CONFIG


def cmd_calibrate_noise(args: argparse.Namespace, settings: Settings) -> int:
    if args.samples < MIN_CALIBRATION_SAMPLES:
        raise ConfigError(f"samples: need at least {MIN_CALIBRATION_SAMPLES}, got {args.samples}")
    try:
        spec = NoiseModelSpec(
            kind=NoiseKind(args.kind),
            p_imp=args.p_imp,
            gamma_ratio=args.gamma_ratio,
            impulse_index=args.impulse_index,
            bernoulli_p=args.bernoulli_p,
            occurrence=args.occurrence,
            sensors=args.sensors,
        )
    except ValidationError as e:
        raise ConfigError(str(e)) from e

    report = calibrate_noise(spec, args.samples, stream(args.seed, 0, Stage.CALIBRATION), args.tolerance)
    print(
        f"{spec.kind.value} p_imp={spec.p_imp}: variance {report.empirical_variance:.5f} "
        f"(expected {report.expected_variance:.5f}, {100 * report.relative_error:+.2f}%), "
        f"excess kurtosis {report.excess_kurtosis:.4f}, impulsive fraction {report.impulsive_fraction:.4f}"
    )
    if args.out:
        write_json(args.out, CALIBRATION_FILE, report.model_dump(mode="json"))
    return EXIT_OK if report.within_tolerance else EXIT_CONFIG


def _campaign_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat TOML scenario file")
    p.add_argument("--preset", choices=PRESET_NAMES, help="named scenario instead of --config")
    p.add_argument("--out", help="output directory (default WPDM_OUTPUT_DIR)")
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--workers", type=int, help="worker processes (default WPDM_WORKERS)")
    p.add_argument("--trials", type=int, help="trials per hypothesis and SNR point")
    p.add_argument("--no-cache", action="store_true", help="ignore and do not update the result cache")
    p.set_defaults(handler=cmd_run)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wpdm-fusion", description="Monte Carlo simulator for WPDM-aided decision fusion"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    _campaign_flags(sub.add_parser("run", help="run a full campaign"))
    roc = sub.add_parser("roc", help="ROC campaign at a single SNR")
    _campaign_flags(roc)
    roc.add_argument("--snr", type=float, help="SNR in dB")
    sweep = sub.add_parser("sweep-snr", help="false-detection probability over an SNR grid")
    _campaign_flags(sweep)
    sweep.add_argument("--snr-grid", help="'0,5,10' or 'start:stop:step' in dB")

    preset = sub.add_parser("preset", help="run a named scenario")
    preset.add_argument("preset", choices=PRESET_NAMES)
    preset.add_argument("--out")
    preset.add_argument("--seed", type=int)
    preset.add_argument("--workers", type=int)
    preset.add_argument("--trials", type=int)
    preset.add_argument("--no-cache", action="store_true")
    preset.set_defaults(handler=cmd_run, config=None)

    filters = sub.add_parser("validate-filters", help="check prototype and leaf orthogonality")
    filters.add_argument("--Q", type=int, default=14)
    filters.add_argument("--K", type=int, default=2)
    filters.add_argument("--B", type=float, default=2**0.5)
    filters.add_argument("--Z", type=int, default=4)
    filters.add_argument("--tol-orth", type=float, default=TOL_ORTH)
    filters.add_argument("--tol-prototype", type=float, default=TOL_PROTOTYPE)
    filters.add_argument("--out")
    filters.set_defaults(handler=cmd_validate_filters)

    noise = sub.add_parser("calibrate-noise", help="compare noise samples with the mixture formulas")
    noise.add_argument("--kind", choices=[k.value for k in NoiseKind], default=NoiseKind.CLASS_A.value)
    noise.add_argument("--p-imp", type=float, default=0.3)
    noise.add_argument("--gamma-ratio", type=float, default=0.25)
    noise.add_argument("--impulse-index", type=float, default=0.1)
    noise.add_argument("--bernoulli-p", type=float, default=0.3)
    noise.add_argument("--occurrence", type=float, default=1.0)
    noise.add_argument("--sensors", type=int, default=8)
    noise.add_argument("--samples", type=int, default=MIN_CALIBRATION_SAMPLES)
    noise.add_argument("--tolerance", type=float, default=0.05)
    noise.add_argument("--seed", type=int, default=0)
    noise.add_argument("--out")
    noise.set_defaults(handler=cmd_calibrate_noise)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = Settings.from_env()
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    logging.basicConfig(
        level=settings.log_level,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stdout,
    )

    try:
        return args.handler(args, settings)
    except (ConfigError, FilterDesignError, TreeError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except WpdmError as e:
        logger.exception("simulation failed")
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception("unexpected failure")
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
