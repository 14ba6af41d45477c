"""Acceptance criteria, one test each. Every test prints a single
``criterion N: PASS|FAIL ...`` line, collected again in the terminal summary."""
import random
from dataclasses import replace

import numpy as np
import pytest

import conftest
from bbsimplex.config import bundled_scenarios, load_config, parse_config
from bbsimplex.core import ACCEPTED, REJECTED, CommandSequence, SafetyChecker, SafetyVerdict, dm_step, dm_update
from bbsimplex.mas import MasState, _disc_noise, mas_step
from bbsimplex.reach import initial_set, reach_sequence
from bbsimplex.runner import bench_decision_module, build_setup, run_scenario, write_outputs
from bbsimplex.safety import Ray, min_future_distance, rays_intersect

from oracles import rays_intersect_by_segments, sampled_min_distance


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def scenario(name, **kw):
    cfg = load_config(bundled_scenarios()[name])
    return replace(cfg, **kw) if kw else cfg


def test_criterion_01_safety_under_random_faults():
    text = """
[scenario]
case_study = mas
n_steps = 30
[mas]
agents = 7
radius = 10
[kernel]
ac_budget = 0.5
lbc_budget = 0.5
[faults]
random_rate = 0.1
random_kinds = corrupt, garbage, hang
hang_seconds = 0.6
"""
    base = parse_config(text)
    worst, bad, faults = np.inf, 0, 0
    for seed in range(100):
        res = run_scenario(replace(base, seed=seed, name=f"faults{seed}"))
        worst = min(worst, res.summary["min_separation"])
        bad += res.summary["safety_violations"] + (res.summary["steps_run"] != 30)
        faults += sum(r.reason != "ok" for r in res.records)
    report(1, bad == 0 and worst >= 1.7,
           f"100 runs x 30 steps, {faults} non-ok decisions, violations={bad}, min separation {worst:.4f} >= 1.7")


def test_criterion_02_recovery():
    res = run_scenario(scenario("mas7_recovery"))
    rec = res.records
    r11 = rec[11]
    after = res.summary["safety_violations"]
    tail_start = next(k for k in range(len(rec)) if all(not np.any(r.applied) for r in rec[k:]))
    zero_tail = tail_start < len(rec) - 1
    ok = r11.verdict == REJECTED and all(r.verdict != ACCEPTED for r in rec[11:]) and after == 0 and zero_tail
    report(2, ok, f"k=11 {r11.verdict} ({r11.reason}), violations={after}, "
                  f"applied command all-zero from k={tail_start} to {len(rec) - 1}")


def test_criterion_03_transparency():
    res = run_scenario(scenario("mas2_lanes"))
    rec = res.records
    rejects = sum(r.verdict != ACCEPTED for r in rec)
    same = sum(np.array_equal(r.applied, r.advanced) for r in rec)
    report(3, rejects == 0 and same == len(rec) >= 200,
           f"{len(rec)} steps, rejects={rejects}, applied == advanced at {same}/{len(rec)}")


def test_criterion_04_stress():
    s = run_scenario(scenario("mas12")).summary
    ok = s["rejected"] >= 1 and s["max_target_error"] <= 0.5 and s["min_separation"] >= 1.7
    report(4, ok, f"rejections={s['rejected']}, max target error {s['max_target_error']:.4f} <= 0.5, "
                  f"min separation {s['min_separation']:.4f} >= 1.7")


def _first_proposal(name):
    cfg = scenario(name)
    setup = build_setup(cfg)
    seq = setup.lbc(setup.x0, setup.ac(setup.x0))
    sets = reach_sequence(initial_set(setup.x0, cfg.uncertainty), seq, cfg.uncertainty, cfg.mas)
    return cfg, setup.x0, seq, sets


def test_criterion_05_generator_counts():
    _, _, seq_s, sensor = _first_proposal("mas7_sensor")
    _, _, seq_d, dist = _first_proposal("mas7_disturbance")
    s_counts = {Z.num_generators for Z in sensor}
    ok = s_counts == {112} and len(seq_d) == 12 and dist[0].num_generators == 28 \
        and dist[-1].num_generators == 364
    report(5, ok, f"sensor {sorted(s_counts)} at all {len(sensor)} steps; disturbance "
                  f"{dist[0].num_generators} -> {dist[-1].num_generators} after {len(seq_d)} steps")


@pytest.mark.parametrize("mode", ["sensor", "disturbance"])
def test_criterion_06_monte_carlo(mode):
    cfg, x, seq, sets = _first_proposal(f"mas7_{mode}")
    u, prm = cfg.uncertainty, cfg.mas
    rng = np.random.default_rng(2024)
    escapes = 0
    for _ in range(1000):
        if mode == "sensor":
            y = MasState(x.p + _disc_noise(rng, x.n, u.sensor_position_radius),
                         x.v + _disc_noise(rng, x.n, u.sensor_velocity_radius), x.targets, x.center)
        else:
            b = u.initial_box
            y = MasState(x.p + rng.uniform(-b, b, (x.n, 2)), x.v + rng.uniform(-b, b, (x.n, 2)),
                         x.targets, x.center)
        escapes += not sets[0].contains_box(y.vector())
        for a, Z in zip(seq, sets[1:]):
            w = None
            if u.disturbance_bound > 0:
                w = rng.uniform(-u.disturbance_bound, u.disturbance_bound, (x.n, 4))
            y = mas_step(y, a, prm, w)
            escapes += not Z.contains_box(y.vector())
    report(6, escapes == 0, f"{mode}: 1000 realizations x {len(sets)} steps, escapes={escapes}")


def test_criterion_07_bench():
    s = bench_decision_module(scenario("mas7_sensor"), 30)
    d = bench_decision_module(scenario("mas7_disturbance"), 30)
    ok = s["median_ms"] <= 50 and d["median_ms"] <= 50
    report(7, ok, f"median sensor {s['median_ms']:.2f} ms, disturbance {d['median_ms']:.2f} ms (<= 50)")


def _substep_min(res):
    return res.summary["min_separation"]


def test_criterion_08_aircraft():
    parts, ok = [], True
    for name in ("aircraft3", "aircraft4", "aircraft7", "aircraft15"):
        res = run_scenario(scenario(name))
        d = _substep_min(res)
        ok &= d >= 1500 and res.summary["safety_violations"] == 0
        parts.append(f"{name} {d:.1f}")
    raw = run_scenario(scenario("aircraft3_raw"))
    ok &= _substep_min(raw) < 1500
    report(8, ok, "simplex min ft: " + ", ".join(parts)
           + f"; raw baseline aircraft3_raw {_substep_min(raw):.1f} < 1500")


def test_criterion_09_safety_distance():
    base = scenario("aircraft7")
    mins = []
    for thr in (1500.0, 1000.0, 500.0):
        cfg = replace(base, aircraft=replace(base.aircraft, safety_distance=thr))
        mins.append(_substep_min(run_scenario(cfg)))
    ok = all(m >= t for m, t in zip(mins, (1500, 1000, 500))) and mins[0] >= mins[1] >= mins[2]
    report(9, ok, "1500/1000/500 ft -> " + " / ".join(f"{m:.1f}" for m in mins))


class ReferenceDM:
    """Plain list-based decision module."""

    def __init__(self, plan):
        self.plan, self.k = list(plan), 0

    def update(self, proposal, accept):
        if accept:
            self.plan, self.k = list(proposal), 0

    def step(self):
        u = self.plan[min(self.k, len(self.plan) - 1)]
        self.k += 1
        return u


def test_criterion_10_unit_oracles():
    rng = random.Random(10)
    mism = 0
    for _ in range(10_000):
        plan = [rng.randint(-9, 9) for _ in range(rng.randint(1, 6))]
        ref, stored = ReferenceDM(plan), CommandSequence(plan)
        for _ in range(rng.randint(1, 12)):
            prop = [rng.randint(-9, 9) for _ in range(rng.randint(1, 6))]
            accept = rng.random() < 0.5
            chk = SafetyChecker(lambda x, s, a=accept: SafetyVerdict.ok() if a else SafetyVerdict.reject("no"))
            stored, _ = dm_update(None, stored, CommandSequence(prop), chk)
            ref.update(prop, accept)
            u, stored = dm_step(stored)
            mism += u != ref.step()
    nrng = np.random.default_rng(10)
    worst = 0.0
    for _ in range(2000):
        p1, v1, p2, v2 = nrng.uniform(-10, 10, (4, 2))
        d, _ = min_future_distance(p1, v1, p2, v2)
        worst = max(worst, abs(d - sampled_min_distance(p1, v1, p2, v2)))
    ray_mism = 0
    for _ in range(10_000):
        o1, d1, o2, d2 = (tuple(nrng.integers(-4, 5, 2)) for _ in range(4))
        ray_mism += rays_intersect(Ray(o1, d1), Ray(o2, d2)) != rays_intersect_by_segments(o1, d1, o2, d2)
    ok = mism == 0 and worst <= 1e-9 and ray_mism == 0
    report(10, ok, f"dm mismatches {mism}/10000 sequences; min_future_distance max error {worst:.1e}; "
                   f"ray mismatches {ray_mism}/10000")


def test_criterion_11_determinism(tmp_path):
    same = []
    for name in ("mas7_faults", "aircraft3"):
        cfg = scenario(name, n_steps=15, seed=5)
        outs = []
        for d in ("a", "b"):
            write_outputs(run_scenario(cfg), tmp_path / name / d, svg=True)
            outs.append({f: (tmp_path / name / d / f).read_bytes()
                         for f in ("trajectory.csv", "decisions.csv", "summary.json", "plot.svg")})
        same.append(outs[0] == outs[1])
    report(11, all(same), f"mas7_faults and aircraft3 re-runs byte-identical: {same}")
