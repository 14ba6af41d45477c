"""Planar multi-aircraft collision avoidance with turn advisories.

Aircraft fly at constant speed with a commanded turn rate. Headings are
math angles (counter-clockwise from +x), so a positive turn rate is a left
turn. A fleet command is an integer array with one advisory per aircraft.

The advisory logic is a small geometric rule set, pairwise by design and then
stretched to many aircraft through nearest-intruder arbitration; it is not
meant to be reliable on its own.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CommandSequence, ConfigurationError, PlantModel, SafetyChecker, SafetyVerdict

DEG = np.pi / 180.0
ALIGN_TOL = 1e-9          # heading error below which the waypoint follower flies straight


class Advisory(enum.IntEnum):
    CLEAR = 0
    WEAK_LEFT = 1
    WEAK_RIGHT = 2
    STRONG_LEFT = 3
    STRONG_RIGHT = 4


# deg/s, left positive; CLEAR means "follow the waypoint"
TURN_RATE = {Advisory.WEAK_LEFT: 1.5, Advisory.WEAK_RIGHT: -1.5,
             Advisory.STRONG_LEFT: 3.0, Advisory.STRONG_RIGHT: -3.0}
MAX_TURN_RATE = 3.0
_RATES = np.array([0.0, 1.5, -1.5, 3.0, -3.0]) * DEG


class TurnRateError(ValueError):
    pass


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    out = np.pi - np.mod(np.pi - a, 2 * np.pi)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class AircraftState:
    position: np.ndarray
    heading: float
    speed: float = 807.0

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("speed must be positive")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def velocity(self) -> np.ndarray:
        return self.speed * np.array([np.cos(self.heading), np.sin(self.heading)])


def aircraft_step(x: AircraftState, turn_rate: float, dt: float) -> AircraftState:
    """Exact constant-speed arc over ``dt`` seconds; ``turn_rate`` in deg/s."""
    if abs(turn_rate) > MAX_TURN_RATE + 1e-12:
        raise TurnRateError(f"turn rate {turn_rate} deg/s exceeds {MAX_TURN_RATE}")
    p, h = _arc(x.position[None], np.array([x.heading]), x.speed, np.array([turn_rate * DEG]), dt)
    return AircraftState(p[0], float(h[0]), x.speed)


def _arc(p, h, speed, w, dt):
    """Vectorized arc update; ``w`` in rad/s."""
    h1 = h + w * dt
    straight = w == 0
    safe_w = np.where(straight, 1.0, w)
    dx = np.where(straight, speed * dt * np.cos(h), speed / safe_w * (np.sin(h1) - np.sin(h)))
    dy = np.where(straight, speed * dt * np.sin(h), speed / safe_w * (np.cos(h) - np.cos(h1)))
    return p + np.stack([dx, dy], axis=1), wrap_angle(h1)


@dataclass(frozen=True)
class AdvisoryConfig:
    alert_distance: float = 5000.0     # ft, predicted miss distance that raises an alert
    alert_time: float = 12.0           # s, only conflicts closer in time than this
    strong_time: float = 10.0          # s, time to closest approach that escalates to strong
    strong_distance: float = 1000.0    # ft, predicted miss that escalates to strong


@dataclass(frozen=True)
class AircraftConfig:
    n: int = 3
    circle_diameter: float = 90000.0
    safety_distance: float = 1500.0
    decision_period: float = 2.0
    substep: float = 0.1
    speed: float = 807.0
    divergence_window: float = 5.0
    rollout_cap: float = 600.0
    waypoint_overshoot: float = 0.2    # waypoint sits this fraction of the radius past the far side
    rotation: float = 0.0              # rad, rotates the whole scenario
    heading_jitter: float = 0.0        # deg, deterministic per-aircraft heading offsets
    advisory: AdvisoryConfig = field(default_factory=AdvisoryConfig)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("need at least one aircraft")
        if self.safety_distance < 500:
            raise ConfigurationError("safety_distance must be at least 500 ft")
        if not self.decision_period > 0 or not self.substep > 0:
            raise ConfigurationError("decision_period and substep must be positive")
        k = self.decision_period / self.substep
        if abs(k - round(k)) > 1e-9:
            raise ConfigurationError("decision_period must be a whole number of substeps")
        if not self.speed > 0 or not self.circle_diameter > 0:
            raise ConfigurationError("speed and circle_diameter must be positive")
        if self.divergence_window < 0 or self.rollout_cap <= 0:
            raise ConfigurationError("bad divergence_window or rollout_cap")

    @property
    def substeps_per_period(self) -> int:
        return int(round(self.decision_period / self.substep))


@dataclass(frozen=True)
class FleetState:
    p: np.ndarray           # (n, 2) ft
    heading: np.ndarray     # (n,) rad
    waypoints: np.ndarray   # (n, 2)
    center: np.ndarray      # formation center, used for the "passed the waypoint" test
    speed: float = 807.0

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def velocity(self) -> np.ndarray:
        return self.speed * np.stack([np.cos(self.heading), np.sin(self.heading)], axis=1)

    def aircraft(self, i: int) -> AircraftState:
        return AircraftState(self.p[i], float(self.heading[i]), self.speed)

    def replace(self, p, heading) -> "FleetState":
        return FleetState(p, heading, self.waypoints, self.center, self.speed)


def make_fleet(cfg: AircraftConfig) -> FleetState:
    """Aircraft evenly spaced on a circle, facing its center, waypoints past the far side."""
    R = cfg.circle_diameter / 2
    ang = cfg.rotation + 2 * np.pi * np.arange(cfg.n) / cfg.n
    u = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    jitter = np.zeros(cfg.n)
    if cfg.heading_jitter:
        jitter = cfg.heading_jitter * DEG * np.sin(1.0 + 2.3 * np.arange(cfg.n))
    return FleetState(R * u, wrap_angle(ang + np.pi + jitter),
                      -(1 + cfg.waypoint_overshoot) * R * u, np.zeros(2), cfg.speed)


def pair_distances(p: np.ndarray) -> np.ndarray:
    d = p[:, None, :] - p[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", d, d))


def min_pair_distance(p: np.ndarray) -> tuple[float, tuple[int, int]]:
    n = p.shape[0]
    if n < 2:
        return float("inf"), (0, 0)
    iu = np.triu_indices(n, 1)
    d = pair_distances(p)[iu]
    k = int(np.argmin(d))
    return float(d[k]), (int(iu[0][k]), int(iu[1][k]))


# --- advisory logic ---------------------------------------------------------

def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def pairwise_advisory_arrays(p_own, v_own, p_int, v_int, cfg: AdvisoryConfig) -> np.ndarray:
    """Vectorized pairwise rule over broadcast arrays of positions/velocities."""
    r = p_int - p_own
    w = v_int - v_own
    ww = np.einsum("...k,...k->...", w, w)
    rw = np.einsum("...k,...k->...", r, w)
    tau = np.where(ww > 0, -rw / np.where(ww > 0, ww, 1.0), 0.0)
    closing = tau > 0
    tau = np.maximum(tau, 0.0)
    miss_vec = r + tau[..., None] * w
    miss = np.sqrt(np.einsum("...k,...k->...", miss_vec, miss_vec))
    alert = closing & (miss < cfg.alert_distance) & (tau < cfg.alert_time)
    # line of sight rotating left (positive bearing rate) -> turn right, and vice versa;
    # an exactly steady bearing turns right
    left = _cross(r, w) < 0
    strong = (tau < cfg.strong_time) | (miss < cfg.strong_distance)
    adv = np.where(left, np.where(strong, Advisory.STRONG_LEFT, Advisory.WEAK_LEFT),
                   np.where(strong, Advisory.STRONG_RIGHT, Advisory.WEAK_RIGHT))
    return np.where(alert, adv, Advisory.CLEAR).astype(int)


def pairwise_advisory(ownship: AircraftState, intruder: AircraftState,
                      cfg: Optional[AdvisoryConfig] = None) -> Advisory:
    cfg = cfg or AdvisoryConfig()
    a = pairwise_advisory_arrays(ownship.position, ownship.velocity,
                                 intruder.position, intruder.velocity, cfg)
    return Advisory(int(a))


def fleet_baseline_advisories(x: FleetState, cfg: AircraftConfig) -> np.ndarray:
    """Each ownship takes the advisory of its nearest alerting intruder (ties by index)."""
    n = x.n
    out = np.zeros(n, dtype=int)
    if n < 2:
        return out
    v = x.velocity()
    A = pairwise_advisory_arrays(x.p[:, None], v[:, None], x.p[None, :], v[None, :], cfg.advisory)
    D = pair_distances(x.p)
    np.fill_diagonal(A, Advisory.CLEAR)
    D = np.where(A != Advisory.CLEAR, D, np.inf)
    for i in range(n):
        j = int(np.argmin(D[i]))      # argmin returns the lowest index on ties
        if np.isfinite(D[i, j]):
            out[i] = A[i, j]
    return out


# --- simulation -------------------------------------------------------------

def _passed(x_p, wp, center):
    return np.einsum("ik,ik->i", x_p - wp, wp - center) >= 0


def _follow_rates(p, h, wp, center, dt):
    """Waypoint-following turn rates (rad/s): steer at up to the strong rate,
    fly straight once aligned or once the waypoint is behind."""
    d = wp - p
    err = wrap_angle(np.arctan2(d[:, 1], d[:, 0]) - h)
    err = np.where(np.abs(err) < ALIGN_TOL, 0.0, err)
    rate = np.clip(err / dt, -MAX_TURN_RATE * DEG, MAX_TURN_RATE * DEG)
    return np.where(_passed(p, wp, center), 0.0, rate)


def check_fleet_command(cmd, n: int) -> np.ndarray:
    a = np.asarray(cmd)
    if a.shape != (n,) or not np.issubdtype(a.dtype, np.number):
        raise TurnRateError(f"fleet command must be {n} advisories")
    if not np.all(np.isfinite(a)) or np.any(a != np.round(a)) or np.any((a < 0) | (a > 4)):
        raise TurnRateError("unknown advisory value")
    return a.astype(int)


def fleet_advance(x: FleetState, cmd, cfg: AircraftConfig, record: bool = False):
    """Apply one fleet command for a decision period.

    Returns the new state, and with ``record`` also the substep positions
    ``(k, n, 2)`` and turn rates ``(k, n)`` in rad/s (k substeps, excluding
    the start).
    """
    a = check_fleet_command(cmd, x.n)
    fixed = _RATES[a]
    clear = a == Advisory.CLEAR
    p, h = x.p, x.heading
    P, W = [], []
    for _ in range(cfg.substeps_per_period):
        w = fixed
        if clear.any():
            w = np.where(clear, _follow_rates(p, h, x.waypoints, x.center, cfg.substep), fixed)
        p, h = _arc(p, h, x.speed, w, cfg.substep)
        if record:
            P.append(p)
            W.append(w)
    y = x.replace(p, h)
    if record:
        return y, np.array(P), np.array(W)
    return y


def straight_mode(x: FleetState) -> np.ndarray:
    """Aircraft that will fly straight forever under clear_of_conflict."""
    d = x.waypoints - x.p
    err = wrap_angle(np.arctan2(d[:, 1], d[:, 0]) - x.heading)
    return _passed(x.p, x.waypoints, x.center) | (np.abs(err) < ALIGN_TOL)


def _cv_min_distance(x: FleetState) -> tuple[float, tuple[int, int]]:
    """Smallest constant-velocity closest approach over t >= 0, all pairs."""
    n = x.n
    iu = np.triu_indices(n, 1)
    v = x.velocity()
    dp = x.p[iu[1]] - x.p[iu[0]]
    dv = v[iu[1]] - v[iu[0]]
    vv = np.einsum("ik,ik->i", dv, dv)
    t = np.where(vv > 0, np.maximum(0.0, -np.einsum("ik,ik->i", dp, dv) / np.where(vv > 0, vv, 1.0)), 0.0)
    m = dp + t[:, None] * dv
    d = np.sqrt(np.einsum("ik,ik->i", m, m))
    k = int(np.argmin(d))
    return float(d[k]), (int(iu[0][k]), int(iu[1][k]))


def circling_min_distance(x: FleetState, turn_rate: float) -> tuple[float, tuple[int, int]]:
    """Exact minimum pairwise distance when every aircraft circles forever at
    the same ``turn_rate`` (deg/s, nonzero).

    All turn circles share one angular rate, so each difference vector is a
    fixed offset plus a uniformly rotating one; its smallest length over a
    period is the difference of the two lengths.
    """
    n = x.n
    if n < 2:
        return float("inf"), (0, 0)
    r = x.speed / (turn_rate * DEG)          # signed: positive turns left
    left = np.stack([-np.sin(x.heading), np.cos(x.heading)], axis=1)
    c = x.p + r * left
    d = x.p - c
    iu = np.triu_indices(n, 1)
    dc = np.linalg.norm(c[iu[0]] - c[iu[1]], axis=1)
    dd = np.linalg.norm(d[iu[0]] - d[iu[1]], axis=1)
    m = np.abs(dc - dd)
    k = int(np.argmin(m))
    return float(m[k]), (int(iu[0][k]), int(iu[1][k]))


def _window_diverging(dist_hist, turn_hist, window_steps: int) -> bool:
    """Last ``window_steps`` substeps: no turning, every pair strictly separating."""
    if window_steps <= 0:
        return True
    if len(dist_hist) < window_steps + 1:
        return False
    D = np.array(dist_hist[-(window_steps + 1):])
    Wt = np.array(turn_hist[-window_steps:])
    return bool(np.all(Wt == 0) and np.all(np.diff(D, axis=0) > 0))


def _terminal_ok(x: FleetState, last, cfg: AircraftConfig, dist_hist, turn_hist, window_steps):
    """Returns (ok, verdict-if-failed-or-None). Straight-and-diverging or
    everyone circling at one rate."""
    if x.n < 2:
        return True, None
    last = np.asarray(last)
    if np.all(last == Advisory.CLEAR) and np.all(straight_mode(x)) and \
            _window_diverging(dist_hist, turn_hist, window_steps):
        d, pair = _cv_min_distance(x)
        if d >= cfg.safety_distance:
            return True, None
        return False, SafetyVerdict.reject("terminal_separation", pair=pair, distance=d)
    if last[0] != Advisory.CLEAR and np.all(last == last[0]):
        d, pair = circling_min_distance(x, TURN_RATE[Advisory(int(last[0]))])
        if d >= cfg.safety_distance:
            return True, None
        return False, SafetyVerdict.reject("terminal_separation", pair=pair, distance=d)
    return False, None


def _pair_flat(p):
    n = p.shape[0]
    iu = np.triu_indices(n, 1)
    d = p[iu[1]] - p[iu[0]]
    return np.sqrt(np.einsum("ik,ik->i", d, d)), iu


def aircraft_permanently_safe(x: FleetState, seq: CommandSequence, cfg: AircraftConfig) -> SafetyVerdict:
    """Simulate the sequence (its last command repeated, up to the rollout cap)
    at substep resolution.

    Accept when every substep keeps all pairs at least ``safety_distance``
    apart and the run reaches a terminal state: either all aircraft clear of
    conflict, flying straight, every pair separating over the last
    ``divergence_window`` seconds and never closer than the safety distance
    under constant velocity; or all aircraft circling at one common rate with
    the exact circling separation above the safety distance.
    """
    n = x.n
    try:
        cmds = [check_fleet_command(c, n) for c in seq]
    except TurnRateError:
        return SafetyVerdict.reject("invalid_command")
    if n < 2:
        return SafetyVerdict.ok()
    window_steps = int(round(cfg.divergence_window / cfg.substep))
    max_periods = int(np.floor(cfg.rollout_cap / cfg.decision_period + 1e-9))
    d0, iu = _pair_flat(x.p)
    if np.any(d0 < cfg.safety_distance):
        m = int(np.argmin(d0))
        return SafetyVerdict.reject("distance_violation", step=0, pair=(int(iu[0][m]), int(iu[1][m])),
                                    distance=float(d0[m]))
    dist_hist, turn_hist = [d0], []
    state = x
    for k in range(max(max_periods, len(cmds))):
        cmd = cmds[min(k, len(cmds) - 1)]
        state, P, W = fleet_advance(state, cmd, cfg, record=True)
        for s in range(P.shape[0]):
            d, _ = _pair_flat(P[s])
            if np.any(d < cfg.safety_distance):
                m = int(np.argmin(d))
                return SafetyVerdict.reject("distance_violation", step=k + 1,
                                            pair=(int(iu[0][m]), int(iu[1][m])), distance=float(d[m]))
            dist_hist.append(d)
            turn_hist.append(W[s])
        del dist_hist[:-(window_steps + 1)]
        del turn_hist[:-max(window_steps, 1)]
        if k + 1 >= len(cmds):
            ok, bad = _terminal_ok(state, cmds[-1], cfg, dist_hist, turn_hist, window_steps)
            if ok:
                return SafetyVerdict.ok()
            if bad is not None:
                return bad
    return SafetyVerdict.reject("horizon_error")


def aircraft_checker(cfg: AircraftConfig, budget=None) -> SafetyChecker:
    return SafetyChecker(lambda x, seq: aircraft_permanently_safe(x, seq, cfg), budget)


# --- controllers ------------------------------------------------------------

def waypoint_controller(x: FleetState) -> np.ndarray:
    """Advanced controller: every aircraft heads for its waypoint."""
    return np.zeros(x.n, dtype=int)


def aircraft_lookahead_baseline(x: FleetState, z, cfg: AircraftConfig) -> CommandSequence:
    """[z, c1, c2, ...]: apply z, then roll the advisory logic forward in closed
    loop until the fleet is clear, straight and separating, or the cap is hit."""
    window_steps = int(round(cfg.divergence_window / cfg.substep))
    max_periods = int(np.floor(cfg.rollout_cap / cfg.decision_period + 1e-9))
    cmds = [check_fleet_command(z, x.n)]
    state = x
    dist_hist, turn_hist = [_pair_flat(x.p)[0]] if x.n > 1 else [], []
    while True:
        state, P, W = fleet_advance(state, cmds[-1], cfg, record=True)
        if x.n > 1:
            for s in range(P.shape[0]):
                dist_hist.append(_pair_flat(P[s])[0])
                turn_hist.append(W[s])
            del dist_hist[:-(window_steps + 1)]
            del turn_hist[:-max(window_steps, 1)]
        nxt = fleet_baseline_advisories(state, cfg)
        if np.all(nxt == Advisory.CLEAR) and np.all(cmds[-1] == Advisory.CLEAR):
            ok, _ = _terminal_ok(state, cmds[-1], cfg, dist_hist, turn_hist, window_steps)
            if ok:
                return CommandSequence(cmds)
        if len(cmds) >= max_periods:
            return CommandSequence(cmds)
        cmds.append(nxt)


@dataclass
class AircraftLookaheadBaseline:
    cfg: AircraftConfig

    def __call__(self, x: FleetState, z) -> CommandSequence:
        return aircraft_lookahead_baseline(x, z, self.cfg)


def initial_circles_plan(x: FleetState, cfg: AircraftConfig) -> CommandSequence:
    """Everyone turns strong right forever.

    Valid when the simple gap bound (safety distance plus two strong-turn
    diameters) holds or, more generally, when the exact circling separation
    is at least the safety distance.
    """
    plan = CommandSequence([np.full(x.n, int(Advisory.STRONG_RIGHT))])
    if x.n < 2:
        return plan
    turn_d = 2 * x.speed / (MAX_TURN_RATE * DEG)
    gap, _ = min_pair_distance(x.p)
    if gap > cfg.safety_distance + 2 * turn_d:
        return plan
    d, pair = circling_min_distance(x, TURN_RATE[Advisory.STRONG_RIGHT])
    if d < cfg.safety_distance:
        raise ConfigurationError(
            f"circling plan brings aircraft {pair[0]} and {pair[1]} to {d:.0f} ft "
            f"(< {cfg.safety_distance:.0f})")
    return plan


def aircraft_plant(cfg: AircraftConfig) -> PlantModel:
    def step(x, u, w):
        return fleet_advance(x, u, cfg)

    def admissible(x: FleetState) -> bool:
        return min_pair_distance(x.p)[0] >= cfg.safety_distance

    return PlantModel(step=step, admissible=admissible)


def replay_substeps(x0: FleetState, commands, cfg: AircraftConfig):
    """Positions at every substep for a list of applied fleet commands:
    array (1 + len * substeps, n, 2) starting with x0."""
    out = [x0.p[None]]
    x = x0
    for c in commands:
        x, P, _ = fleet_advance(x, c, cfg, record=True)
        out.append(P)
    return np.concatenate(out, axis=0)
