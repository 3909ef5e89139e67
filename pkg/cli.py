#!/usr/bin/env python3
"""
Command-line entry point for the fractional tunneling simulator.

Usage:
    python cli.py ground-state --alphas 1.1 1.4 1.7 2.0 --out results/gs
    python cli.py calibrate --alphas 1.2 1.4 1.6 1.8 --Ip-target 0.67
    python cli.py propagate --alpha 2.0 --field 0.05
    python cli.py benchmark --out results/benchmark
    python cli.py sweep --protocol B --config run_config.json
    python cli.py fadk-curves --alphas 1.1 1.5 2.0
    python cli.py robustness --alphas 2.0
    python cli.py slopes --rates results/a/sweep_A_rates.csv results/b/sweep_A_rates.csv
    python cli.py config-reference

Every numeric flag overrides the matching field of the JSON config given with
--config (or of the defaults). Exit code 0 only if every requested point succeeded,
1 if some failed, 2 for invalid configuration.
"""
import argparse
import logging
import sys
from pathlib import Path

from config import config_reference_markdown, load_run_config, save_run_config
from core.errors import ConfigurationError, ProvenanceError, TunnelingError
from scenarios import (
    refit_slopes,
    run_benchmark,
    run_calibration,
    run_fadk_curves,
    run_ground_state,
    run_propagation,
    run_protocol_sweep,
    run_robustness,
)
from utils.logging import LOG_FILE_NAME, setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_POINTS = 1
EXIT_CONFIG_ERROR = 2

PROJECT_ROOT = Path(__file__).parent
CONFIG_REFERENCE_FILE = PROJECT_ROOT / "docs" / "CONFIG_REFERENCE.md"

# (flag, dotted config path, argparse kwargs)
CONFIG_FLAGS = [
    ("--L", "grid.L", {"type": float, "help": "Box half-width (bohr)"}),
    ("--N", "grid.N", {"type": int, "help": "Number of grid points"}),
    ("--alphas", "system.alphas", {"type": float, "nargs": "+", "help": "Fractional orders"}),
    ("--Z", "system.Z", {"type": float, "help": "Soft-core charge"}),
    ("--a", "system.a", {"type": float, "help": "Soft-core softening parameter (Protocol A)"}),
    ("--Ip-target", "system.Ip_target", {"type": float, "help": "Target ionization potential (Protocol B)"}),
    ("--F0", "field.F0_list", {"type": float, "nargs": "+", "help": "Field strengths to sweep"}),
    ("--ramp-shape", "field.ramp_shape", {"choices": ["none", "linear", "sin2"], "help": "Field turn-on envelope"}),
    ("--T-ramp", "field.T_ramp", {"type": float, "help": "Ramp duration"}),
    ("--F-ref", "field.F_ref", {"type": float, "help": "Reference field for normalized comparisons"}),
    ("--dt", "propagation.dt", {"type": float, "help": "Real-time step"}),
    ("--dtau", "propagation.dtau", {"type": float, "help": "Imaginary-time step"}),
    ("--T-total", "propagation.T_total", {"type": float, "help": "Fixed propagation time (default: adaptive)"}),
    ("--T-min", "propagation.T_min", {"type": float, "help": "Lower bound of the adaptive propagation time"}),
    ("--T-max", "propagation.T_max", {"type": float, "help": "Cap of the adaptive propagation time"}),
    ("--stride", "propagation.observer_stride", {"type": int, "help": "Steps between P_b samples"}),
    ("--x-cap", "mask.x_cap", {"type": float, "help": "Absorber onset (default 0.8 L)"}),
    ("--eta", "mask.eta", {"type": float, "help": "Absorber strength"}),
    ("--m", "mask.m", {"type": float, "help": "Absorber exponent"}),
    ("--x-c", "rates.x_c", {"type": float, "help": "Bound-region half-width (default: from the ground state)"}),
    ("--plateau-tolerance", "rates.plateau_tolerance", {"type": float, "help": "Relative plateau tolerance"}),
    ("--min-window", "rates.min_window", {"type": float, "help": "Shortest fit window"}),
    ("--tol-Ip", "calibration.tol_Ip", {"type": float, "help": "Calibration tolerance on Ip"}),
    ("--workers", "workers", {"type": int, "help": "Worker processes (default: one per job)"}),
    ("--out", "out_dir", {"help": "Output directory"}),
]


def _config_parent() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", "-c", type=Path, help="JSON run config")
    parent.add_argument("--verbose", "-v", action="store_true", help="Show debug output on the console")
    parent.add_argument(
        "--allow-over-barrier", action="store_true", default=None, help="Run fields above Ip^2/(4Z)"
    )
    for flag, dotted, kwargs in CONFIG_FLAGS:
        parent.add_argument(flag, dest=dotted.replace(".", "__"), **kwargs)
    return parent


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Static-field tunneling in space-fractional quantum mechanics",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__.split("Usage:")[1].split("Every numeric")[0],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _config_parent()

    sub.add_parser("ground-state", parents=[parent], help="Field-free ground states per alpha")
    sub.add_parser("calibrate", parents=[parent], help="Protocol B calibration of the softening parameter")
    propagate = sub.add_parser("propagate", parents=[parent], help="One (alpha, F0) propagation and rate fit")
    propagate.add_argument("--alpha", type=float, help="Fractional order (default: first of --alphas)")
    propagate.add_argument("--field", type=float, help="Field strength (default: first of --F0)")
    propagate.add_argument("--protocol", choices=["A", "B"], help="A: fixed a, B: calibrated a")
    sub.add_parser("benchmark", parents=[parent], help="alpha = 2 sweep against conventional ADK")
    sweep = sub.add_parser("sweep", parents=[parent], help="Protocol A or B sweep over alphas and fields")
    sweep.add_argument("--protocol", choices=["A", "B"], required=True)
    curves = sub.add_parser("fadk-curves", parents=[parent], help="Analytic -ln(Gamma) against 1/F0")
    curves.add_argument("--Ip", type=float, help="Ionization potential (default: Ip_target)")
    robustness = sub.add_parser("robustness", parents=[parent], help="Rate stability under absorber/grid/time-step changes")
    robustness.add_argument("--protocol", choices=["A", "B"])
    slopes = sub.add_parser("slopes", help="Refit slopes from saved rate tables")
    slopes.add_argument("--rates", type=Path, nargs="+", required=True, help="Rate CSV files from one config")
    slopes.add_argument("--out", type=Path, default=Path("results"), help="Output directory")
    slopes.add_argument("--verbose", "-v", action="store_true")
    reference = sub.add_parser("config-reference", help="Regenerate docs/CONFIG_REFERENCE.md")
    reference.add_argument("--output", type=Path, default=CONFIG_REFERENCE_FILE)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    overrides = {dotted: getattr(args, dotted.replace(".", "__"), None) for _, dotted, _ in CONFIG_FLAGS}
    overrides["field.allow_over_barrier"] = getattr(args, "allow_over_barrier", None)
    if getattr(args, "protocol", None) is not None:
        overrides["protocol"] = args.protocol
    return overrides


def _run(args: argparse.Namespace) -> int:
    if args.command == "config-reference":
        args.output.parent.mkdir(parents=True, exist_ok=True)
        args.output.write_text(config_reference_markdown(), encoding="utf-8")
        print(f"Wrote {args.output}")
        return EXIT_OK

    if args.command == "slopes":
        setup_logging(args.out / LOG_FILE_NAME, args.verbose)
        slopes, path = refit_slopes(args.rates, args.out)
        for alpha, fit in sorted(slopes.items()):
            if fit is not None:
                logger.info(f"alpha={alpha:g}: m_alpha={fit.m_alpha:.6f}, r2={fit.r_squared:.6f}")
        logger.info(f"Slopes written to {path}")
        return EXIT_OK if all(fit is not None for fit in slopes.values()) else EXIT_FAILED_POINTS

    cfg = load_run_config(args.config, _overrides(args))
    out_dir = Path(cfg.out_dir)
    setup_logging(out_dir / LOG_FILE_NAME, args.verbose)
    save_run_config(cfg, out_dir / f"{args.command.replace('-', '_')}.config.json")
    logger.info(f"{args.command}: output in {out_dir}")

    if args.command == "ground-state":
        preparations = run_ground_state(cfg)
        return EXIT_OK if all(p.ok for p in preparations) else EXIT_FAILED_POINTS
    if args.command == "calibrate":
        preparations = run_calibration(cfg)
        for prep in preparations:
            if prep.ok:
                logger.info(f"alpha={prep.alpha:g}: a*={prep.a:.8g}, Ip={prep.Ip:.8f}")
        return EXIT_OK if all(p.ok for p in preparations) else EXIT_FAILED_POINTS
    if args.command == "propagate":
        point = run_propagation(cfg, alpha=args.alpha, F0=args.field)
        return EXIT_OK if point.ok else EXIT_FAILED_POINTS
    if args.command == "benchmark":
        return EXIT_OK if run_benchmark(cfg).ok else EXIT_FAILED_POINTS
    if args.command == "sweep":
        return EXIT_OK if run_protocol_sweep(cfg).ok else EXIT_FAILED_POINTS
    if args.command == "fadk-curves":
        run_fadk_curves(cfg, Ip=args.Ip)
        return EXIT_OK
    if args.command == "robustness":
        rows = run_robustness(cfg)
        for row in rows:
            logger.info(f"{row['variant']}: Gamma={row['gamma']:.6e}, relative change {row['relative_change']:.3%}")
        return EXIT_OK if all(row["status"] == "ok" for row in rows) else EXIT_FAILED_POINTS
    raise ValueError(f"Unknown command {args.command}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except (ConfigurationError, ProvenanceError) as e:
        logger.error(str(e))
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except TunnelingError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILED_POINTS


if __name__ == "__main__":
    sys.exit(main())
