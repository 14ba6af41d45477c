"""Timing and generator counts of the reachability check for both uncertainty modes.

usage: python3 scripts/bench_reach.py [--reps 50]
"""
import argparse

from bbsimplex.config import bundled_scenarios, load_config
from bbsimplex.runner import bench_decision_module


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=50)
    args = ap.parse_args()
    for name in ("mas7_sensor", "mas7_disturbance"):
        r = bench_decision_module(load_config(bundled_scenarios()[name]), args.reps)
        print(f"{name:18s} generators {r['generators_per_step'][0]}..{r['final_generators']} "
              f"median {r['median_ms']:.2f} ms  p95 {r['p95_ms']:.2f} ms  verdict {r['verdict']}")


if __name__ == "__main__":
    main()
