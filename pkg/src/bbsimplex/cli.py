"""Command line: run / bench / validate scenario files.

Exit codes: 0 ok, 2 bad scenario, 3 safety violation observed.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import ConfigurationError, bundled_scenarios, load_config
from .runner import bench_decision_module, build_setup, run_scenario, write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_VIOLATION = 3


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        named = bundled_scenarios()
        if path in named:
            return named[path]
    return p


def cmd_run(args) -> int:
    cfg = load_config(_resolve(args.scenario)).with_overrides(args.seed, args.steps)
    res = run_scenario(cfg)
    out = Path(args.out) if args.out else Path("runs") / cfg.name
    files = write_outputs(res, out, svg=args.svg)
    s = res.summary
    print(f"{cfg.name}: steps={s['steps_run']} min_separation={s['min_separation']:.6g} "
          f"accepted={s['accepted']} rejected={s['rejected']} timed_out={s['timed_out']} "
          f"violations={s['safety_violations']} -> {out} ({', '.join(files)})")
    if s["plant_error"]:
        print(f"plant error: {s['plant_error']}", file=sys.stderr)
    return EXIT_VIOLATION if res.violated else EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(_resolve(args.scenario))
    report = bench_decision_module(cfg, args.reps)
    print(json.dumps(report, indent=2))
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = load_config(_resolve(args.scenario))
    setup = build_setup(cfg)
    verdict = setup.checker.is_permanently_safe(setup.x0, setup.s0)
    if not verdict.accepted:
        raise ConfigurationError(f"initial plan is not permanently safe: {verdict.describe()}")
    print(f"{cfg.name}: ok ({cfg.case_study}, {cfg.n_steps} steps, mode={cfg.kernel.mode})")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bbsimplex", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write logs")
    r.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
    r.add_argument("--seed", type=int)
    r.add_argument("--steps", type=int)
    r.add_argument("--out", help="output directory (default runs/<name>)")
    r.add_argument("--svg", action="store_true", help="also write plot.svg")
    r.set_defaults(func=cmd_run)
    b = sub.add_parser("bench", help="time the reachability check")
    b.add_argument("scenario")
    b.add_argument("--reps", type=int, default=50)
    b.set_defaults(func=cmd_bench)
    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("scenario")
    v.set_defaults(func=cmd_validate)
    sub.add_parser("list", help="list bundled scenarios").set_defaults(
        func=lambda a: print("\n".join(bundled_scenarios())) or EXIT_OK)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
