"""Run every bundled scenario and print a one-line summary for each.

usage: python3 scripts/run_all_scenarios.py [--out runs] [--svg]
"""
import argparse
from pathlib import Path

from bbsimplex.config import bundled_scenarios, load_config
from bbsimplex.runner import run_scenario, write_outputs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="runs")
    ap.add_argument("--svg", action="store_true")
    args = ap.parse_args()
    for name, path in bundled_scenarios().items():
        res = run_scenario(load_config(path))
        write_outputs(res, Path(args.out) / name, svg=args.svg)
        s = res.summary
        print(f"{name:20s} steps={s['steps_run']:4d} min_sep={s['min_separation']:10.4f} "
              f"acc={s['accepted']:4d} rej={s['rejected']:3d} violations={s['safety_violations']}")


if __name__ == "__main__":
    main()
