"""Run both shipped comparisons and print their summary tables.

    python3 scripts/run_experiments.py [--jobs N]
"""
import argparse
import pathlib
import sys

from speedmaps.cli import main

SCENARIOS = pathlib.Path(__file__).resolve().parents[1] / "scenarios"

EXPERIMENTS = [
    ("corridor.scn", "fixed_max(1.0),speedmap"),
    ("guidance.scn", "guidance_fixed,guidance_profile"),
]


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--jobs", type=int, default=2)
    args = ap.parse_args()
    worst = 0
    for scn, controllers in EXPERIMENTS:
        code = main(["compare", "--scenario", str(SCENARIOS / scn), "--controllers", controllers,
                     "--jobs", str(args.jobs)])
        worst = max(worst, code)
        print()
    sys.exit(worst)
