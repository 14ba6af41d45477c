"""Seven aircraft at several separation thresholds: observed minimum distance per threshold.

usage: python3 scripts/sweep_safety_distance.py [--thresholds 1500 1000 500] [--steps 100]
"""
import argparse
from dataclasses import replace

from bbsimplex.config import bundled_scenarios, load_config
from bbsimplex.runner import run_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--thresholds", type=float, nargs="+", default=[1500, 1000, 500])
    ap.add_argument("--scenario", default="aircraft7")
    ap.add_argument("--steps", type=int)
    args = ap.parse_args()
    base = load_config(bundled_scenarios()[args.scenario]).with_overrides(n_steps=args.steps)
    print("threshold_ft,min_separation_ft,rejected")
    for thr in args.thresholds:
        cfg = replace(base, aircraft=replace(base.aircraft, safety_distance=thr))
        s = run_scenario(cfg).summary
        print(f"{thr:.0f},{s['min_separation']:.1f},{s['rejected']}")


if __name__ == "__main__":
    main()
