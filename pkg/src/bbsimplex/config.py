"""Scenario files: INI sections with a fixed schema per case study.

Every key is optional and falls back to the module defaults; unknown
sections and keys are errors. See README for the full schema.
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .aircraft import AdvisoryConfig, AircraftConfig
from .core import ConfigurationError, Fault
from .mas import MasParams
from .reach import UncertaintyModel

CASE_STUDIES = ("mas", "mas_uncertain", "aircraft")
MODES = ("simplex", "advanced_only", "baseline_only")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s: str) -> Optional[float]:
    return None if s.strip().lower() in ("none", "") else float(s)


def _fault_map(s: str) -> dict:
    """'11:corrupt, 20:garbage' -> {11: Fault.CORRUPT, 20: Fault.GARBAGE}"""
    out = {}
    for item in s.split(","):
        item = item.strip()
        if not item:
            continue
        step, _, kind = item.partition(":")
        out[int(step)] = Fault(kind.strip())
    return out


def _kinds(s: str) -> tuple:
    return tuple(Fault(k.strip()) for k in s.split(",") if k.strip())


SCHEMA = {
    "scenario": {"case_study": str, "name": str, "n_steps": int, "seed": int},
    "mas": {"agents": int, "radius": float, "dt": float, "v_max": float, "a_max": float,
            "d_min": float, "horizon": int, "control_weight": float, "w_sep": float,
            "w_target": float, "w_div": float, "w_speed": float, "restarts": int,
            "iterations": int, "speed_limit": _opt_float, "target_tolerance": float},
    "lanes": {"enabled": _bool, "gap": float, "speed": float, "separation": float},
    "uncertainty": {"sensor_position_radius": float, "sensor_velocity_radius": float,
                    "polygon_sides": int, "disturbance_bound": float, "initial_box": float,
                    "separation_threshold": _opt_float, "terminal_window": float,
                    "plant_noise": _bool},
    "aircraft": {"aircraft": int, "circle_diameter": float, "safety_distance": float,
                 "decision_period": float, "substep": float, "speed": float,
                 "divergence_window": float, "rollout_cap": float, "waypoint_overshoot": float,
                 "rotation_deg": float, "heading_jitter": float},
    "advisory": {"alert_distance": float, "alert_time": float, "strong_time": float,
                 "strong_distance": float},
    "kernel": {"mode": str, "reverse_switching": _bool, "ac_budget": _opt_float,
               "lbc_budget": _opt_float, "check_budget": _opt_float, "check_invariant": _bool},
    "faults": {"ac": _fault_map, "lbc": _fault_map, "random_rate": float, "random_kinds": _kinds,
               "hang_seconds": float},
    "output": {"record_timing": _bool, "svg": _bool},
}

SECTIONS_FOR = {
    "mas": {"scenario", "mas", "lanes", "kernel", "faults", "output"},
    "mas_uncertain": {"scenario", "mas", "uncertainty", "kernel", "faults", "output"},
    "aircraft": {"scenario", "aircraft", "advisory", "kernel", "faults", "output"},
}


@dataclass(frozen=True)
class LaneSpec:
    """Two agents on parallel lanes, both cruising the same way."""
    enabled: bool = False
    gap: float = 17.0
    speed: float = 1.0
    separation: float = 200.0      # target distance ahead


@dataclass(frozen=True)
class KernelSpec:
    mode: str = "simplex"
    reverse_switching: bool = True
    ac_budget: Optional[float] = None
    lbc_budget: Optional[float] = None
    check_budget: Optional[float] = None
    check_invariant: bool = False


@dataclass(frozen=True)
class FaultSpec:
    ac: dict = field(default_factory=dict)
    lbc: dict = field(default_factory=dict)
    random_rate: float = 0.0
    random_kinds: tuple = (Fault.CORRUPT, Fault.GARBAGE)
    hang_seconds: float = 5.0


@dataclass(frozen=True)
class ScenarioConfig:
    case_study: str = "mas"
    name: str = "scenario"
    n_steps: int = 60
    seed: int = 0
    agents: int = 7
    radius: float = 10.0
    target_tolerance: float = 0.5
    mas: MasParams = field(default_factory=MasParams)
    lanes: LaneSpec = field(default_factory=LaneSpec)
    uncertainty: UncertaintyModel = field(default_factory=UncertaintyModel)
    plant_noise: bool = True
    aircraft: AircraftConfig = field(default_factory=AircraftConfig)
    kernel: KernelSpec = field(default_factory=KernelSpec)
    faults: FaultSpec = field(default_factory=FaultSpec)
    record_timing: bool = False
    svg: bool = False

    def __post_init__(self):
        if self.case_study not in CASE_STUDIES:
            raise ConfigurationError(f"case_study must be one of {CASE_STUDIES}")
        if self.kernel.mode not in MODES:
            raise ConfigurationError(f"kernel mode must be one of {MODES}")
        if self.n_steps < 0:
            raise ConfigurationError("n_steps must be non-negative")
        if not 0 <= self.faults.random_rate <= 1:
            raise ConfigurationError("random_rate must be in [0, 1]")
        for k in list(self.faults.ac) + list(self.faults.lbc):
            if k < 0:
                raise ConfigurationError("fault steps must be non-negative")
        hang = Fault.HANG in set(self.faults.ac.values()) | set(self.faults.lbc.values())
        hang = hang or (self.faults.random_rate > 0 and Fault.HANG in self.faults.random_kinds)
        if hang and (self.kernel.ac_budget is None or self.kernel.lbc_budget is None):
            raise ConfigurationError("hang faults need ac_budget and lbc_budget")

    def with_overrides(self, seed=None, n_steps=None) -> "ScenarioConfig":
        kw = {}
        if seed is not None:
            kw["seed"] = int(seed)
        if n_steps is not None:
            kw["n_steps"] = int(n_steps)
        return replace(self, **kw) if kw else self


def _read_section(cp, name):
    schema = SCHEMA[name]
    out = {}
    for key, raw in cp.items(name):
        if key not in schema:
            raise ConfigurationError(f"[{name}] unknown key {key!r}")
        try:
            out[key] = schema[key](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigurationError(f"[{name}] {key}: {exc}") from None
    return out


def _build(cls, values: dict, **extra):
    names = {f.name for f in fields(cls)}
    kw = {k: v for k, v in values.items() if k in names}
    kw.update(extra)
    try:
        return cls(**kw)
    except ConfigurationError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"{cls.__name__}: {exc}") from None


def parse_config(text: str) -> ScenarioConfig:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"unreadable scenario: {exc}") from None
    if not cp.has_section("scenario"):
        raise ConfigurationError("missing [scenario] section")
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigurationError(f"unknown section [{sec}]")
    sc = _read_section(cp, "scenario")
    case = sc.get("case_study", "mas")
    if case not in CASE_STUDIES:
        raise ConfigurationError(f"case_study must be one of {CASE_STUDIES}, got {case!r}")
    allowed = SECTIONS_FOR[case]
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigurationError(f"section [{sec}] does not apply to case_study={case}")
    sections = {s: (_read_section(cp, s) if cp.has_section(s) else {}) for s in SCHEMA}

    m = sections["mas"]
    mas = _build(MasParams, m)
    lanes = _build(LaneSpec, sections["lanes"])
    u = dict(sections["uncertainty"])
    plant_noise = u.pop("plant_noise", True)
    unc = _build(UncertaintyModel, u)
    a = dict(sections["aircraft"])
    rot = a.pop("rotation_deg", 0.0)
    n_air = a.pop("aircraft", 3)
    adv = _build(AdvisoryConfig, sections["advisory"])
    air = _build(AircraftConfig, a, n=n_air, rotation=math.radians(rot), advisory=adv)
    kernel = _build(KernelSpec, sections["kernel"])
    faults = _build(FaultSpec, sections["faults"])
    out = sections["output"]
    extra = {k: m[k] for k in ("agents", "radius", "target_tolerance") if k in m}
    return _build(ScenarioConfig, sc, mas=mas, lanes=lanes, uncertainty=unc, plant_noise=plant_noise,
                  aircraft=air, kernel=kernel, faults=faults,
                  record_timing=out.get("record_timing", False), svg=out.get("svg", False), **extra)


def load_config(path) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {p}: {exc}") from None
    cfg = parse_config(text)
    if cfg.name == "scenario":
        cfg = replace(cfg, name=p.stem)
    return cfg


def bundled_scenarios() -> dict:
    """name -> path of the scenario files shipped with the package."""
    root = Path(__file__).parent / "scenarios"
    return {p.stem: p for p in sorted(root.glob("*.cfg"))}
