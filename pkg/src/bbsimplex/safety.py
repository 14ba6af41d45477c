"""Permanently-safe checks for the swarm case study."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CommandSequence, SafetyChecker, SafetyVerdict
from .mas import CommandBoundError, MasParams, MasState, mas_step


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=float))


def _cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def _point_on_ray(q, ray: Ray) -> bool:
    rel = q - ray.origin
    d = ray.direction
    if not np.any(d):
        return bool(np.all(rel == 0))
    return _cross(rel, d) == 0 and float(rel @ d) >= 0


def rays_intersect(r1: Ray, r2: Ray) -> bool:
    """Whether two closed half-lines share a point.

    Zero directions are points. Parallel rays meet only when collinear and
    their parameter intervals on the common line overlap.
    """
    d1, d2 = r1.direction, r2.direction
    z1, z2 = not np.any(d1), not np.any(d2)
    if z1 and z2:
        return bool(np.all(r1.origin == r2.origin))
    if z1:
        return _point_on_ray(r1.origin, r2)
    if z2:
        return _point_on_ray(r2.origin, r1)
    w = r2.origin - r1.origin
    den = _cross(d1, d2)
    if den != 0:
        t1 = _cross(w, d2) / den
        t2 = _cross(w, d1) / den
        return t1 >= 0 and t2 >= 0
    if _cross(w, d1) != 0:
        return False                      # parallel, distinct lines
    if float(d1 @ d2) > 0:
        return True                       # same direction on one line
    return float(w @ d1) >= 0             # opposite directions: must face each other


def min_future_distance(p1, v1, p2, v2) -> tuple[float, float]:
    """Closest approach of two constant-velocity points over t >= 0: (distance, t*)."""
    dp = np.asarray(p2, dtype=float) - np.asarray(p1, dtype=float)
    dv = np.asarray(v2, dtype=float) - np.asarray(v1, dtype=float)
    vv = float(dv @ dv)
    t = 0.0 if vv == 0 else max(0.0, -float(dp @ dv) / vv)
    return float(np.linalg.norm(dp + t * dv)), t


def simulate_sequence(x: MasState, seq: CommandSequence, params: MasParams) -> list[MasState]:
    """States x_0..x_len obtained by applying each command of ``seq`` once."""
    states = [x]
    for a in seq:
        states.append(mas_step(states[-1], a, params))
    return states


def _pair_distances(P: np.ndarray) -> np.ndarray:
    D = P[:, :, None, :] - P[:, None, :, :]
    return np.sqrt(np.einsum("tijk,tijk->tij", D, D))


def mas_permanently_safe(x: MasState, seq: CommandSequence, params: MasParams) -> SafetyVerdict:
    """Accept iff the simulated prefix keeps every pair at least ``d_min`` apart and,
    from the final state, no pair's velocity rays intersect and no pair's
    constant-velocity closest approach drops below ``d_min``.
    """
    last = np.asarray(seq.last, dtype=float)
    if last.shape != (x.n, 2) or np.any(last != 0):
        return SafetyVerdict.reject("horizon_error")
    try:
        states = simulate_sequence(x, seq, params)
    except CommandBoundError:
        return SafetyVerdict.reject("invalid_command")
    n = x.n
    if n < 2:
        return SafetyVerdict.ok()
    P = np.stack([s.p for s in states])
    dist = _pair_distances(P)
    iu = np.triu_indices(n, 1)
    flat = dist[:, iu[0], iu[1]]
    bad = np.argwhere(flat < params.d_min)
    if bad.size:
        k, m = bad[0]
        return SafetyVerdict.reject("distance_violation", step=int(k),
                                    pair=(int(iu[0][m]), int(iu[1][m])), distance=float(flat[k, m]))
    fin = states[-1]
    for i, j in zip(*iu):
        if rays_intersect(Ray(fin.p[i], fin.v[i]), Ray(fin.p[j], fin.v[j])):
            return SafetyVerdict.reject("converging_final_rays", pair=(int(i), int(j)))
    for i, j in zip(*iu):
        d, _ = min_future_distance(fin.p[i], fin.v[i], fin.p[j], fin.v[j])
        if d < params.d_min:
            return SafetyVerdict.reject("terminal_separation", pair=(int(i), int(j)), distance=d)
    return SafetyVerdict.ok()


def mas_checker(params: MasParams, budget=None) -> SafetyChecker:
    return SafetyChecker(lambda x, seq: mas_permanently_safe(x, seq, params), budget)
