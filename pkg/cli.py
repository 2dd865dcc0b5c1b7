#!/usr/bin/env python3
"""
Band-Edge Superradiance Simulator - CLI Tool

This script provides a command-line interface for running scenario files
(or flag-only scenarios) and writing CSV, summary and manifest artifacts.
"""

import argparse
import json
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from src.bandedge.service import execute
from src.core.config import configure_logging
from src.core.errors import EXIT_CONFIG, EXIT_OK, BandEdgeError, exit_code_for
from src.core.scenario import COMMANDS, load_scenario, scenario_for

logger = logging.getLogger("bandedge.cli")

COMMAND_HELP = {
    "kernel": "Tabulate the memory kernel at the configured lags",
    "osc": "Low-excitation population, Mandel Q and bound-state fraction",
    "spectrum": "Emission spectrum near the band edge",
    "meanfield": "Mean-field inversion and polarization (optional dephasing)",
    "transparent": "Search the detuning with a non-rotating steady polarization",
    "ensemble": "Quantum-fluctuation ensemble over sampled initial polarizations",
    "noise": "Generate colored noise and measure its autocorrelation",
    "stochastic": "Noise-driven mean field compared with the quantum ensemble",
    "oracle-compare": "Check a dynamics mode against the explicit discrete bath",
}


def build_overrides(args: argparse.Namespace) -> List[str]:
    """Turn dedicated flags into section.key=value overrides (applied after --set)."""
    overrides = list(args.set or [])
    overrides.append(f"run.command={args.command}")
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"run.workers={args.workers}")
    if args.convergence_check:
        overrides.append("run.convergence_check=true")
    if getattr(args, "case", None):
        overrides.append(f"oracle.case={args.case}")
    return overrides


def print_results(result: dict) -> None:
    print(f"\n=== {result['command'].upper()} RESULTS ===")
    print(json.dumps(result["summary"], indent=2, sort_keys=True, default=str))
    print(f"\n📁 Output directory: {result['out_dir']}")
    for path in result["files"]:
        print(f"   • {path}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Band-Edge Superradiance Simulator CLI",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python cli.py osc --config recipes/fig01_population.ini
  python cli.py transparent --config recipes/fig06_phase_angle.ini
  python cli.py ensemble --config recipes/fig11_ensemble_means.ini --workers 4 --seed 7
  python cli.py meanfield --set model.kind=anisotropic --set detuning.values=0.1,0,-0.3
  python cli.py oracle-compare --case lowexc --set grid.tau_max=20
        """,
    )
    parser.add_argument("--log-level", help="Override BANDEDGE_LOG_LEVEL")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=COMMAND_HELP[command])
        sub.add_argument("--config", help="INI scenario file")
        sub.add_argument("--seed", type=int, help="Master seed (overrides [run] seed)")
        sub.add_argument("--out", help="Output directory (default BANDEDGE_OUTPUT_DIR)")
        sub.add_argument("--workers", type=int, help="Worker processes; never changes results")
        sub.add_argument(
            "--set",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="Override one scenario value (repeatable)",
        )
        sub.add_argument(
            "--convergence-check",
            action="store_true",
            help="Repeat mean-field runs at dtau/2 and fail if the final inversion moves",
        )
        if command == "oracle-compare":
            sub.add_argument("--case", choices=["lowexc", "meanfield", "gain"], help="Dynamics mode to check")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_CONFIG

    configure_logging(args.log_level)

    try:
        overrides = build_overrides(args)
        if args.config:
            scenario = load_scenario(args.config, overrides)
        else:
            scenario = scenario_for(args.command, overrides)
        result = execute(scenario, out_dir=args.out)
    except ValidationError as e:
        print(f"❌ Invalid scenario: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BandEdgeError as e:
        code = exit_code_for(e)
        kind = "Numeric failure" if code != EXIT_CONFIG else "Configuration error"
        print(f"❌ {kind} ({type(e).__name__}): {e}", file=sys.stderr)
        return code

    print_results(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
