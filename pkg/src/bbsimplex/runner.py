"""Build a scenario from its config, run it through the kernel, write artifacts."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from . import aircraft as air
from .core import (ACCEPTED, CommandSequence, ConfigurationError, FaultSchedule, PlantModel,
                   SafetyChecker, SafetyVerdict, count_verdicts, run_execution)
from .config import ScenarioConfig
from .mas import (MasAdvancedController, MasLookaheadBaseline, MasState, make_circle_scenario,
                  mas_plant, min_separation, mpc_solve, zero_command)
from .reach import (initial_set, mas_permanently_safe_uncertain, reach_sequence, uncertain_checker)
from .safety import mas_checker, simulate_sequence


@dataclass
class Setup:
    x0: Any
    s0: CommandSequence
    ac: Callable
    lbc: Callable
    plant: PlantModel
    checker: SafetyChecker
    faults: Optional[FaultSchedule]
    threshold: float


@dataclass
class RunResult:
    config: ScenarioConfig
    setup: Setup
    records: list
    states: list
    summary: dict
    substeps: Optional[np.ndarray] = None      # aircraft only, (k, n, 2)
    timing: dict = field(default_factory=dict)

    @property
    def violated(self) -> bool:
        return self.summary["safety_violations"] > 0


def accept_all(x, seq) -> SafetyVerdict:
    return SafetyVerdict.ok()


def _single(x, z):
    return CommandSequence([z])


# --- fault payloads ---------------------------------------------------------

def _mas_corrupt_ac(params):
    """Full thrust in a random direction for every agent."""
    def corrupt(z, rng, x):
        ang = rng.uniform(0, 2 * np.pi, x.n)
        return params.a_max * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return corrupt


def _mas_corrupt_lbc(params):
    """Keep the head, then drive every agent at full thrust toward the swarm centroid."""
    def corrupt(seq, rng, x, z):
        d = x.p.mean(axis=0) - x.p
        nrm = np.linalg.norm(d, axis=1, keepdims=True)
        a = params.a_max * d / np.where(nrm > 0, nrm, 1.0)
        k = int(rng.integers(params.horizon // 2, params.horizon + 1))
        return CommandSequence([seq[0]] + [a] * k + [zero_command(x.n)])
    return corrupt


def _air_corrupt_ac(z, rng, x):
    return rng.integers(0, 5, size=x.n)


def _air_corrupt_lbc(seq, rng, x, z):
    k = int(rng.integers(1, 30))
    return CommandSequence([seq[0]] + [rng.integers(0, 5, size=x.n) for _ in range(k)])


def fault_schedule(cfg: ScenarioConfig, corrupt_ac, corrupt_lbc) -> Optional[FaultSchedule]:
    f = cfg.faults
    ac, lbc = dict(f.ac), dict(f.lbc)
    if f.random_rate > 0:
        rng = np.random.default_rng([cfg.seed, 4242])
        kinds = list(f.random_kinds)
        for i in range(cfg.n_steps):
            for table in (ac, lbc):
                if rng.random() < f.random_rate and i not in table:
                    table[i] = kinds[int(rng.integers(len(kinds)))]
    if not ac and not lbc:
        return None
    return FaultSchedule(ac, lbc, corrupt_ac, corrupt_lbc, hang_seconds=f.hang_seconds)


# --- setups -----------------------------------------------------------------

def lanes_scenario(cfg: ScenarioConfig):
    ln = cfg.lanes
    p = np.array([[0.0, ln.gap / 2], [0.0, -ln.gap / 2]])
    v = np.array([[ln.speed, 0.0], [ln.speed, 0.0]])
    tgt = p + np.array([ln.separation, 0.0])
    return MasState(p, v, tgt, np.zeros(2)), CommandSequence([zero_command(2)])


def build_setup(cfg: ScenarioConfig) -> Setup:
    mode = cfg.kernel.mode
    budget = cfg.kernel.check_budget
    if cfg.case_study in ("mas", "mas_uncertain"):
        params = cfg.mas
        if cfg.case_study == "mas" and cfg.lanes.enabled:
            x0, s0 = lanes_scenario(cfg)
        else:
            x0, s0 = make_circle_scenario(cfg.agents, cfg.radius, params)
        ac = MasAdvancedController(params, cfg.seed)
        lbc = MasLookaheadBaseline(params, cfg.seed)
        if cfg.case_study == "mas":
            checker = mas_checker(params, budget)
            plant = mas_plant(params, x0.n)
        else:
            u = cfg.uncertainty
            checker = uncertain_checker(u, params, budget)
            if cfg.plant_noise:
                plant = mas_plant(params, x0.n, u.disturbance_bound,
                                  u.sensor_position_radius, u.sensor_velocity_radius)
            else:
                plant = mas_plant(params, x0.n)
        faults = fault_schedule(cfg, _mas_corrupt_ac(params), _mas_corrupt_lbc(params))
        threshold = params.d_min
        if mode == "baseline_only":
            ac = lambda x: mpc_solve(x, "bc", params, cfg.seed)[0]
    else:
        acfg = cfg.aircraft
        x0 = air.make_fleet(acfg)
        s0 = air.initial_circles_plan(x0, acfg)
        ac = air.waypoint_controller
        lbc = air.AircraftLookaheadBaseline(acfg)
        checker = air.aircraft_checker(acfg, budget)
        plant = air.aircraft_plant(acfg)
        faults = fault_schedule(cfg, _air_corrupt_ac, _air_corrupt_lbc)
        threshold = acfg.safety_distance
        if mode == "baseline_only":
            ac = lambda x: air.fleet_baseline_advisories(x, acfg)
    if mode != "simplex":
        lbc = _single
        checker = SafetyChecker(accept_all)
    return Setup(x0, s0, ac, lbc, plant, checker, faults, threshold)


# --- running ----------------------------------------------------------------

def _mas_min(states, n_valid):
    best = (np.inf, -1, (0, 0))
    for k in range(n_valid):
        d, pair = min_separation(states[k].p)
        if d < best[0]:
            best = (d, k, pair)
    return best


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    setup = build_setup(cfg)
    t0 = time.perf_counter()
    records = run_execution(setup.x0, setup.s0, setup.ac, setup.lbc, setup.plant, setup.checker,
                            cfg.n_steps, cfg.seed, ac_budget=cfg.kernel.ac_budget,
                            lbc_budget=cfg.kernel.lbc_budget, faults=setup.faults,
                            reverse_switching=cfg.kernel.reverse_switching,
                            check_invariant=cfg.kernel.check_invariant)
    total = time.perf_counter() - t0
    states = [setup.x0] + [r.state_after for r in records if r.state_after is not None]
    counts = count_verdicts(records)
    summary = {"case_study": cfg.case_study, "name": cfg.name, "seed": cfg.seed,
               "n_steps": cfg.n_steps, "steps_run": len(states) - 1,
               "mode": cfg.kernel.mode, "safety_threshold": setup.threshold}
    substeps = None
    if cfg.case_study == "aircraft":
        n = setup.x0.n
        substeps = air.replay_substeps(setup.x0, [r.applied for r in records if r.state_after is not None],
                                       cfg.aircraft)
        d, k, pair = np.inf, -1, (0, 0)
        for s, p in enumerate(substeps):
            dd, pp = air.min_pair_distance(p)
            if dd < d:
                d, k, pair = dd, s, pp
        per = cfg.aircraft.substeps_per_period
        dec = [air.min_pair_distance(s.p)[0] for s in states]
        kd = int(np.argmin(dec))
        summary.update(min_separation=float(d), min_separation_step=k // per if k >= 0 else -1,
                       min_separation_time=round(k * cfg.aircraft.substep, 6),
                       min_separation_i=pair[0], min_separation_j=pair[1],
                       min_separation_decision=float(dec[kd]),
                       safety_violations=int(sum(air.min_pair_distance(p)[0] < setup.threshold
                                                 for p in substeps)) if n > 1 else 0)
        fin = states[-1]
        passed = air._passed(fin.p, fin.waypoints, fin.center)
        summary.update(targets_reached=bool(passed.all()), agents_at_target=int(passed.sum()))
    else:
        d, k, pair = _mas_min(states, len(states))
        viol = sum(min_separation(s.p)[0] < setup.threshold for s in states) if states[0].n > 1 else 0
        fin = states[-1]
        err = np.linalg.norm(fin.p - fin.targets, axis=1)
        summary.update(min_separation=float(d), min_separation_step=int(k),
                       min_separation_i=pair[0], min_separation_j=pair[1],
                       safety_violations=int(viol),
                       targets_reached=bool(np.all(err <= cfg.target_tolerance)),
                       agents_at_target=int(np.sum(err <= cfg.target_tolerance)),
                       max_target_error=float(err.max()))
    summary.update(accepted=counts[ACCEPTED], rejected=counts["rejected"],
                   timed_out=counts["timed_out"], reverse_switches=counts["reverse_switches"],
                   plant_error=next((r.error for r in records if r.error), "") or "")
    dm = np.array([r.dm_seconds for r in records]) * 1e6
    timing = {"total_seconds": total,
              "dm_p50_us": float(np.percentile(dm, 50)) if dm.size else 0.0,
              "dm_p95_us": float(np.percentile(dm, 95)) if dm.size else 0.0,
              "dm_max_us": float(dm.max()) if dm.size else 0.0}
    if cfg.record_timing:
        summary.update(timing)
    return RunResult(cfg, setup, records, states, summary, substeps, timing)


# --- artifacts --------------------------------------------------------------

def _f(v) -> str:
    return repr(float(v))


def trajectory_csv(res: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if res.config.case_study == "aircraft":
        w.writerow(["step", "aircraft", "px", "py", "heading", "advisory"])
        applied = [r.applied for r in res.records]
        for k, s in enumerate(res.states):
            adv = applied[k] if k < len(applied) else None
            for i in range(s.n):
                w.writerow([k, i, _f(s.p[i, 0]), _f(s.p[i, 1]), _f(s.heading[i]),
                            "" if adv is None else air.Advisory(int(adv[i])).name.lower()])
    else:
        w.writerow(["step", "agent", "px", "py", "vx", "vy"])
        for k, s in enumerate(res.states):
            for i in range(s.n):
                w.writerow([k, i, _f(s.p[i, 0]), _f(s.p[i, 1]), _f(s.v[i, 0]), _f(s.v[i, 1])])
    return buf.getvalue()


def decisions_csv(res: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "verdict", "reason", "reverse_switch", "dm_micros"])
    for r in res.records:
        micros = f"{r.dm_seconds * 1e6:.1f}" if res.config.record_timing else ""
        w.writerow([r.step, r.verdict, r.reason, int(r.reverse_switch), micros])
    return buf.getvalue()


def substeps_csv(res: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["substep", "time", "aircraft", "px", "py"])
    dt = res.config.aircraft.substep
    for k, P in enumerate(res.substeps):
        for i in range(P.shape[0]):
            w.writerow([k, _f(round(k * dt, 9)), i, _f(P[i, 0]), _f(P[i, 1])])
    return buf.getvalue()


def summary_json(res: RunResult) -> str:
    return json.dumps(res.summary, indent=2, sort_keys=True) + "\n"


def overlays(res: RunResult) -> list:
    """Predicted paths of checked proposals: list of (step, accepted, (k, n, 2) positions)."""
    out = []
    last_ok = None
    for r in res.records:
        if r.proposal is None or r.verdict == "timed_out":
            continue
        if r.verdict == ACCEPTED:
            last_ok = r
            continue
        if r.reason.startswith(("lookahead_mismatch", "malformed", "reverse_switching_disabled")):
            continue
        path = _predict(res, r.state_before, r.proposal)
        if path is not None:
            out.append((r.step, False, path))
    if last_ok is not None:
        path = _predict(res, last_ok.state_before, last_ok.proposal)
        if path is not None:
            out.append((last_ok.step, True, path))
    return out


def _predict(res: RunResult, x, seq):
    try:
        if res.config.case_study == "aircraft":
            return air.replay_substeps(x, list(seq), res.config.aircraft)
        return np.stack([s.p for s in simulate_sequence(x, seq, res.config.mas)])
    except Exception:
        return None


def write_outputs(res: RunResult, out_dir, svg: bool = False) -> list:
    from .plot import emit_svg
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"trajectory.csv": trajectory_csv(res), "decisions.csv": decisions_csv(res),
             "summary.json": summary_json(res)}
    if res.substeps is not None:
        files["substeps.csv"] = substeps_csv(res)
    if res.config.record_timing:
        files["timing.json"] = json.dumps(res.timing, indent=2, sort_keys=True) + "\n"
    if svg or res.config.svg:
        files["plot.svg"] = emit_svg(res)
    for name, text in files.items():
        (out / name).write_text(text)
    return sorted(files)


# --- benchmark --------------------------------------------------------------

def bench_decision_module(cfg: ScenarioConfig, reps: int = 50) -> dict:
    """Time the full reachability check on the first look-ahead proposal of the scenario."""
    if cfg.case_study != "mas_uncertain":
        raise ConfigurationError("bench needs a mas_uncertain scenario")
    if reps < 1:
        raise ConfigurationError("reps must be >= 1")
    setup = build_setup(cfg)
    x = setup.x0
    z = setup.ac(x)
    seq = setup.lbc(x, z)
    model, params = cfg.uncertainty, cfg.mas
    sets = reach_sequence(initial_set(x, model), seq, model, params)
    samples = []
    verdict = None
    for _ in range(reps):
        t0 = time.perf_counter()
        Z0 = initial_set(x, model)
        verdict = mas_permanently_safe_uncertain(Z0, seq, model, params, exhaustive=True)
        samples.append(time.perf_counter() - t0)
    ms = np.array(samples) * 1e3
    return {"scenario": cfg.name, "reps": reps, "steps": len(seq),
            "generators_per_step": [Z.num_generators for Z in sets],
            "final_generators": sets[-1].num_generators,
            "median_ms": float(np.median(ms)), "p95_ms": float(np.percentile(ms, 95)),
            "min_ms": float(ms.min()), "max_ms": float(ms.max()),
            "verdict": verdict.describe()}
