#!/usr/bin/env python3
"""
Quick Start Script for the Band-Edge Superradiance Simulator

This script checks dependencies and runs a short demonstration of the
closed-form and mean-field paths.
"""

import tempfile

from dotenv import load_dotenv


def check_dependencies():
    """Check if required dependencies are installed"""
    print("🔍 Checking dependencies...")

    required_packages = ['numpy', 'scipy', 'pydantic', 'fastapi', 'uvicorn', 'dotenv']

    missing_packages = []

    for package in required_packages:
        try:
            __import__(package.replace('-', '_'))
            print(f"  ✅ {package}")
        except ImportError:
            print(f"  ❌ {package}")
            missing_packages.append(package)

    if missing_packages:
        print(f"\n❌ Missing packages: {', '.join(missing_packages)}")
        print("Install them with: pip install -r requirements.txt")
        return False

    print("✅ All dependencies are installed!")
    return True


def run_demo():
    """Run a short demonstration"""
    print("\n🚀 Running Band-Edge Demo")
    print("=" * 50)

    try:
        from src.bandedge import lowexc, quantum
        from src.bandedge.models import FreeSpace, IsotropicEffMass
        from src.bandedge.service import execute
        from src.core.scenario import scenario_for

        for delta_c in (-0.5, 0.0, 0.5):
            sol = lowexc.solve_roots(delta_c)
            print(f"\n⚛️  delta_c={delta_c:+.1f}")
            print(f"  |B(10)|^2 = {lowexc.excited_population(sol, 10.0):.4f}")
            print(f"  Bound-state fraction: {lowexc.localized_fraction(sol):.4f}")

        print(f"\n⏱️  Crossover time (free space): {quantum.crossover_time(FreeSpace(), 0.0):.4f}")
        print(f"⏱️  Crossover time (isotropic):  {quantum.crossover_time(IsotropicEffMass(), 0.0):.4f}")

        with tempfile.TemporaryDirectory() as out:
            scenario = scenario_for("meanfield", ["grid.tau_max=10", "detuning.values=0", "init.r=0.001"])
            result = execute(scenario, out_dir=out)
            row = result["summary"]["meanfield"]["delta+0"]
            print(f"\n📈 Mean field (isotropic, r=1e-3): final j3 = {row['final_j3']:+.4f}")
            print(f"   wrote {len(result['files'])} files")

        print("\n✅ Demo completed successfully!")
        return True

    except Exception as e:
        print(f"\n❌ Demo failed: {e}")
        return False


def show_next_steps():
    """Show next steps for using the simulator"""
    print("\n🎯 Next Steps")
    print("=" * 20)

    print("\n1. Validate the figure recipes:")
    print("   python validate_config.py")

    print("\n2. Use the command line interface:")
    print("   python cli.py osc --config recipes/fig01_population.ini")
    print("   python cli.py ensemble --config recipes/fig11_ensemble_means.ini --workers 4")

    print("\n3. Start the API server:")
    print("   python api_server.py")
    print("   # Then visit: http://localhost:8000/docs")

    print("\n4. Query the API with curl:")
    print("   curl -X POST 'http://localhost:8000/crossover' \\")
    print("     -H 'Content-Type: application/json' \\")
    print("     -d '{\"model\": {\"kind\": \"isotropic\"}, \"delta_c\": 0}'")


def main():
    """Main quick start function"""
    print("🚀 Band-Edge Superradiance Simulator - Quick Start")
    print("=" * 60)

    load_dotenv()

    if not check_dependencies():
        print("\n❌ Please install dependencies first:")
        print("   pip install -r requirements.txt")
        return

    if not run_demo():
        print("\n❌ Demo failed. Please check your installation.")
        return

    show_next_steps()

    print("\n🎉 Quick start completed successfully!")


if __name__ == "__main__":
    main()
