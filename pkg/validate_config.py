#!/usr/bin/env python3
"""
Configuration Validator for the Band-Edge Superradiance Simulator

This script validates the environment settings and scenario files (every
recipe by default) without running any simulation.
"""

import sys
from pathlib import Path
from typing import List, Optional

from src.bandedge.models import Grid
from src.bandedge.service import build_scenario_model
from src.core.config import get_settings
from src.core.errors import BandEdgeError
from src.core.scenario import load_scenario

RECIPE_DIR = Path(__file__).resolve().parent / "recipes"


def validate_environment() -> bool:
    """Validate environment-driven settings"""
    print("\n🔍 Validating Environment Settings...")
    try:
        settings = get_settings()
    except ValueError as e:
        print(f"❌ Could not parse environment settings: {e}")
        return False

    ok = True
    print(f"✅ Output directory: {settings.output_dir}")
    if settings.workers < 1:
        print(f"❌ BANDEDGE_WORKERS must be at least 1 (got {settings.workers})")
        ok = False
    else:
        print(f"✅ Workers: {settings.workers}")
    if settings.chunk_size < 1:
        print(f"❌ BANDEDGE_CHUNK_SIZE must be at least 1 (got {settings.chunk_size})")
        ok = False
    else:
        print(f"✅ Chunk size: {settings.chunk_size}")
    if settings.default_dtau <= 0:
        print(f"❌ BANDEDGE_DEFAULT_DTAU must be positive (got {settings.default_dtau})")
        ok = False
    else:
        print(f"✅ Default dtau: {settings.default_dtau}")
    return ok


def validate_scenario(path: Path) -> bool:
    """Parse one scenario and build its model and grid"""
    try:
        scenario = load_scenario(str(path))
        model = build_scenario_model(scenario)
        Grid(tau_max=scenario.grid.tau_max, dtau=scenario.grid.dtau or get_settings().default_dtau)
    except BandEdgeError as e:
        print(f"  ❌ {path.name}: {e}")
        return False
    print(f"  ✅ {path.name}: {scenario.run.command} ({model.kind})")
    return True


def validate_scenarios(paths: List[Path]) -> bool:
    print(f"\n🔍 Validating {len(paths)} Scenario File(s)...")
    if not paths:
        print("⚠️  No scenario files found")
        return False
    results = [validate_scenario(p) for p in paths]
    return all(results)


def main(argv: Optional[List[str]] = None) -> bool:
    """Main validation function"""
    print("🔧 Band-Edge Superradiance Simulator - Configuration Validator")
    print("=" * 70)

    args = sys.argv[1:] if argv is None else argv
    paths = [Path(a) for a in args] if args else sorted(RECIPE_DIR.glob("*.ini"))

    env_valid = validate_environment()
    scenarios_valid = validate_scenarios(paths)

    # Summary
    print("\n📊 Validation Summary")
    print("=" * 30)
    print(f"Environment Settings: {'✅ Valid' if env_valid else '❌ Invalid'}")
    print(f"Scenario Files: {'✅ Valid' if scenarios_valid else '❌ Invalid'}")

    if env_valid and scenarios_valid:
        print("\n🎉 All validations passed! Scenarios are ready to run.")
        print("\nNext steps:")
        print("1. Run: python quick_start.py")
        print("2. Start API: python api_server.py")
        print("3. Test CLI: python cli.py --help")
        return True
    print("\n❌ Some validations failed. Please check the errors above.")
    return False


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
