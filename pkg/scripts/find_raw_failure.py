"""Raw advisory baseline (no decision module) over fleet sizes and diameters:
which bundled-style geometries lose separation on their own.

usage: python3 scripts/find_raw_failure.py [--steps 100]
"""
import argparse
from dataclasses import replace

from bbsimplex.config import KernelSpec, bundled_scenarios, load_config
from bbsimplex.runner import run_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=100)
    ap.add_argument("--sizes", type=int, nargs="+", default=[3, 4, 7, 15])
    ap.add_argument("--diameters", type=float, nargs="+", default=[50000, 70000, 90000])
    args = ap.parse_args()
    base = load_config(bundled_scenarios()["aircraft3_raw"]).with_overrides(n_steps=args.steps)
    base = replace(base, kernel=KernelSpec(mode="baseline_only"))
    print("aircraft,diameter_ft,min_separation_ft,violates")
    for n in args.sizes:
        for dia in args.diameters:
            cfg = replace(base, aircraft=replace(base.aircraft, n=n, circle_diameter=dia))
            s = run_scenario(cfg).summary
            print(f"{n},{dia:.0f},{s['min_separation']:.1f},{s['min_separation'] < cfg.aircraft.safety_distance}")


if __name__ == "__main__":
    main()
