"""Zonotope reachability for the swarm under sensor error and per-step disturbance.

Generators are stored column-wise, ``G`` has shape ``(d, m)``. No order
reduction is done: generator counts grow exactly with each Minkowski sum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import CommandSequence, SafetyChecker, SafetyVerdict
from .mas import MasParams, MasState, check_command, CommandBoundError
from .safety import Ray, rays_intersect


class ConservatismFault(RuntimeError):
    """Reachable velocities can reach v_max, where the linear model stops being exact."""


class Zonotope:
    """{ c + G a : a in [-1, 1]^m }"""

    def __init__(self, center, generators=None):
        self.c = np.asarray(center, dtype=float).reshape(-1)
        if generators is None:
            generators = np.zeros((self.c.size, 0))
        G = np.asarray(generators, dtype=float)
        if G.ndim == 1:
            G = G.reshape(-1, 1)
        if G.shape[0] != self.c.size:
            raise ValueError(f"generators have dimension {G.shape[0]}, center {self.c.size}")
        self.G = G

    @property
    def dim(self) -> int:
        return self.c.size

    @property
    def num_generators(self) -> int:
        return self.G.shape[1]

    def pruned(self) -> "Zonotope":
        keep = np.any(self.G != 0, axis=0)
        return Zonotope(self.c, self.G[:, keep])

    def box_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        r = np.abs(self.G).sum(axis=1)
        return self.c - r, self.c + r

    def contains_box(self, x, tol: float = 1e-9) -> bool:
        lo, hi = self.box_bounds()
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))

    def __add__(self, other: "Zonotope") -> "Zonotope":
        return zono_minkowski_sum(self, other)

    def __repr__(self) -> str:
        return f"Zonotope(dim={self.dim}, generators={self.num_generators})"


def zono_linear_map(M, Z: Zonotope, prune: bool = True) -> Zonotope:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[1] != Z.dim:
        raise ValueError(f"cannot map dimension {Z.dim} with matrix of shape {M.shape}")
    out = Zonotope(M @ Z.c, M @ Z.G)
    return out.pruned() if prune else out


def zono_minkowski_sum(Z1: Zonotope, Z2: Zonotope) -> Zonotope:
    if Z1.dim != Z2.dim:
        raise ValueError(f"dimension mismatch: {Z1.dim} vs {Z2.dim}")
    return Zonotope(Z1.c + Z2.c, np.concatenate([Z1.G, Z2.G], axis=1))


def zono_box_bounds(Z: Zonotope) -> list[tuple[float, float]]:
    lo, hi = Z.box_bounds()
    return list(zip(lo.tolist(), hi.tolist()))


def l2_ball_polytope_zonotope(radius: float, sides: int) -> Zonotope:
    """Regular ``sides``-gon circumscribing the disc of ``radius``, as a 2-D zonotope.

    ``sides/2`` equal-length generators at evenly spaced angles sum to a
    regular polygon whose inradius is ``len * cot(pi / sides)``.
    """
    if sides < 4 or sides % 2:
        raise ValueError("sides must be an even integer >= 4")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    m = sides // 2
    if radius == 0:
        return Zonotope(np.zeros(2))
    length = radius * np.tan(np.pi / sides)
    ang = np.pi * np.arange(m) / m
    G = length * np.stack([np.cos(ang), np.sin(ang)])
    return Zonotope(np.zeros(2), G)


@dataclass(frozen=True)
class UncertaintyModel:
    sensor_position_radius: float = 0.0
    sensor_velocity_radius: float = 0.0
    polygon_sides: int = 16
    disturbance_bound: float = 0.0
    initial_box: float = 0.0          # half-width of an axis-aligned initial box on every coordinate
    separation_threshold: Optional[float] = None   # default 5 * d_min
    terminal_window: float = 10.0     # coasting time checked for pairs with uncertain relative velocity

    def __post_init__(self):
        if min(self.sensor_position_radius, self.sensor_velocity_radius,
               self.disturbance_bound, self.initial_box) < 0:
            raise ValueError("uncertainty radii must be non-negative")
        if self.polygon_sides < 4 or self.polygon_sides % 2:
            raise ValueError("polygon_sides must be even and >= 4")
        if self.terminal_window < 0:
            raise ValueError("terminal_window must be non-negative")


def swarm_matrices(n: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """A (4n x 4n) and B (4n x 2n) for the stacked [p1, v1, ..., pn, vn] update."""
    Ai = np.eye(4)
    Ai[0, 2] = Ai[1, 3] = dt
    Bi = np.zeros((4, 2))
    Bi[2, 0] = Bi[3, 1] = dt
    return np.kron(np.eye(n), Ai), np.kron(np.eye(n), Bi)


def initial_set(x: MasState, model: UncertaintyModel) -> Zonotope:
    """Measured state plus per-agent position/velocity error polygons (and an optional box)."""
    n = x.n
    d = 4 * n
    cols = []
    pos = l2_ball_polytope_zonotope(model.sensor_position_radius, model.polygon_sides).G
    vel = l2_ball_polytope_zonotope(model.sensor_velocity_radius, model.polygon_sides).G
    for i in range(n):
        for off, g in ((0, pos), (2, vel)):
            if g.shape[1]:
                block = np.zeros((d, g.shape[1]))
                block[4 * i + off:4 * i + off + 2] = g
                cols.append(block)
    if model.initial_box > 0:
        cols.append(model.initial_box * np.eye(d))
    G = np.concatenate(cols, axis=1) if cols else np.zeros((d, 0))
    return Zonotope(x.vector(), G)


def disturbance_set(n: int, bound: float) -> Zonotope:
    d = 4 * n
    return Zonotope(np.zeros(d), bound * np.eye(d) if bound > 0 else np.zeros((d, 0)))


def reach_sequence(Z0: Zonotope, seq: CommandSequence, model: UncertaintyModel,
                   params: MasParams) -> list[Zonotope]:
    """Reachable sets Z_0..Z_len under the linear swarm update plus disturbance.

    Raises ConservatismFault when a reachable velocity box can touch v_max,
    since the plant's speed clamp would make the linear model invalid.
    """
    n = Z0.dim // 4
    A, B = swarm_matrices(n, params.dt)
    W = disturbance_set(n, model.disturbance_bound)
    out = [Z0]
    _check_speed(Z0, params.v_max)
    for u in seq:
        u = check_command(u, n, params.a_max)
        Z = zono_linear_map(A, out[-1])
        Z = Zonotope(Z.c + B @ u.reshape(-1), Z.G)
        if W.num_generators:
            Z = zono_minkowski_sum(Z, W)
        _check_speed(Z, params.v_max)
        out.append(Z)
    return out


def _check_speed(Z: Zonotope, v_max: float) -> None:
    lo, hi = Z.box_bounds()
    lo = lo.reshape(-1, 4)[:, 2:]
    hi = hi.reshape(-1, 4)[:, 2:]
    corner = np.maximum(np.abs(lo), np.abs(hi))
    if np.any(np.sqrt((corner ** 2).sum(axis=1)) > v_max * (1 + 1e-9)):
        raise ConservatismFault("reachable velocity box reaches v_max")


def pair_difference_bounds(Z: Zonotope, block: int = 0):
    """Box bounds of z_i - z_j for the 2-D block at offset ``block`` (0 = position, 2 = velocity).

    Returns (pairs, lo, hi) with ``lo``/``hi`` of shape (n_pairs, 2). The
    difference is taken on the zonotope itself, so correlations between
    agents are kept.
    """
    n = Z.dim // 4
    iu = np.triu_indices(n, 1)
    c = Z.c.reshape(n, 4)[:, block:block + 2]
    G = Z.G.reshape(n, 4, -1)[:, block:block + 2]
    dc = c[iu[0]] - c[iu[1]]
    r = np.abs(G[iu[0]] - G[iu[1]]).sum(axis=-1)
    return list(zip(iu[0].tolist(), iu[1].tolist())), dc - r, dc + r


def box_distance_lower_bound(lo, hi) -> np.ndarray:
    """Distance from the origin to each axis-aligned box (0 if the box contains it)."""
    gap = np.maximum(0.0, np.maximum(lo, -hi))
    return np.sqrt((gap ** 2).sum(axis=-1))


def moving_box_min_distance(plo, phi, vlo, vhi, t_max: float = np.inf) -> float:
    """Lower bound on min_{0<=t<=t_max} |p + t v| over p in [plo, phi], v in [vlo, vhi].

    The set of reachable offsets at time t lies in the box
    [plo + t vlo, phi + t vhi]; its distance to the origin is piecewise
    quadratic in t, so it is minimized exactly on each piece.
    """
    plo, phi, vlo, vhi = (np.asarray(a, dtype=float) for a in (plo, phi, vlo, vhi))
    breaks = {0.0}
    for a, b in ((plo, vlo), (phi, vhi)):
        for k in range(2):
            if b[k] != 0:
                t = -a[k] / b[k]
                if 0 < t < t_max:
                    breaks.add(float(t))

    def dist2(t):
        # far breakpoints of nearly static axes can overflow to inf, which is harmless here
        lo = plo + t * vlo
        hi = phi + t * vhi
        g = np.maximum(0.0, np.maximum(lo, -hi))
        return float(g @ g)

    with np.errstate(over="ignore", invalid="ignore"):
        return _moving_box_pieces(plo, phi, vlo, vhi, sorted(breaks), float(t_max), dist2)


def _moving_box_pieces(plo, phi, vlo, vhi, pts, t_max, dist2):
    best = dist2(0.0)
    if np.isfinite(t_max):
        best = min(best, dist2(t_max))
    edges = pts + [t_max]
    for t0, t1 in zip(edges[:-1], edges[1:]):
        mid = t0 + 1.0 if np.isinf(t1) else 0.5 * (t0 + t1)
        # on this piece each axis gap is 0, (lo(t)) or (-hi(t)), all affine in t
        lo_m = plo + mid * vlo
        hi_m = phi + mid * vhi
        a = np.zeros(2)
        b = np.zeros(2)
        for k in range(2):
            if lo_m[k] > 0:
                a[k], b[k] = plo[k], vlo[k]
            elif hi_m[k] < 0:
                a[k], b[k] = -phi[k], -vhi[k]
        bb = float(b @ b)
        t = t0 if bb == 0 else -float(a @ b) / bb
        if np.isinf(t1):
            t = max(t, t0)
        else:
            t = min(max(t, t0), t1)
        best = min(best, float((a + t * b) @ (a + t * b)), dist2(t0))
    return float(np.sqrt(best))


def mas_permanently_safe_uncertain(Z0: Zonotope, seq: CommandSequence, model: UncertaintyModel,
                                   params: MasParams, exhaustive: bool = False) -> SafetyVerdict:
    """Reachability version of the swarm check.

    Every step must keep the box lower bound on each pairwise distance at or
    above d_min. Terminal condition, per pair: if the relative velocity is
    known exactly (no velocity error, no disturbance) the tail is a known
    constant-velocity motion, so the robust closest approach must be >= d_min,
    plus the exact ray test when the positions carry no error either; this
    makes zero uncertainty reproduce the deterministic check. Otherwise the
    reachable set keeps spreading forever, and the pair must instead be
    guaranteed the large separation ``separation_threshold`` (default 5 d_min)
    at the end of the sequence, and the coasting set must keep d_min for
    ``terminal_window`` seconds after it.

    ``exhaustive`` bounds every step and the terminal condition even after a
    failure (same verdict; used for timing the whole computation).
    """
    n = Z0.dim // 4
    last = np.asarray(seq.last, dtype=float)
    if last.shape != (n, 2) or np.any(last != 0):
        return SafetyVerdict.reject("horizon_error")
    try:
        sets = reach_sequence(Z0, seq, model, params)
    except ConservatismFault:
        return SafetyVerdict.reject("horizon_error")
    except CommandBoundError:
        return SafetyVerdict.reject("invalid_command")
    if n < 2:
        return SafetyVerdict.ok()
    first = None
    for k, Z in enumerate(sets):
        pairs, lo, hi = pair_difference_bounds(Z, 0)
        dist = box_distance_lower_bound(lo, hi)
        bad = np.flatnonzero(dist < params.d_min)
        if bad.size and first is None:
            m = int(bad[0])
            first = SafetyVerdict.reject("distance_violation", step=k, pair=pairs[m],
                                         distance=float(dist[m]))
            if not exhaustive:
                return first
    term = _terminal_verdict(sets[-1], model, params)
    return first if first is not None else term


def _terminal_verdict(fin: Zonotope, model: UncertaintyModel, params: MasParams) -> SafetyVerdict:
    n = fin.dim // 4
    pairs, plo, phi = pair_difference_bounds(fin, 0)
    _, vlo, vhi = pair_difference_bounds(fin, 2)
    thr = model.separation_threshold
    thr = 5 * params.d_min if thr is None else thr
    c = fin.c.reshape(n, 4)
    pos_exact = np.all(plo == phi, axis=1)
    vel_exact = np.all(vlo == vhi, axis=1) & (model.disturbance_bound == 0)
    far = box_distance_lower_bound(plo, phi)
    for m, (i, j) in enumerate(pairs):
        if vel_exact[m] and pos_exact[m] and \
                rays_intersect(Ray(c[i, :2], c[i, 2:]), Ray(c[j, :2], c[j, 2:])):
            return SafetyVerdict.reject("converging_final_rays", pair=(i, j))
    for m, (i, j) in enumerate(pairs):
        if vel_exact[m]:
            d = moving_box_min_distance(plo[m], phi[m], vlo[m], vhi[m])
            if d < params.d_min:
                return SafetyVerdict.reject("terminal_separation", pair=(i, j), distance=d)
        else:
            # relative motion keeps spreading: the whole set must be a large gap
            # apart now and stay d_min apart over the coasting window
            if far[m] < thr:
                return SafetyVerdict.reject("terminal_separation", pair=(i, j), distance=float(far[m]))
            d = moving_box_min_distance(plo[m], phi[m], vlo[m], vhi[m], model.terminal_window)
            if d < params.d_min:
                return SafetyVerdict.reject("terminal_separation", pair=(i, j), distance=d)
    return SafetyVerdict.ok()


def uncertain_checker(model: UncertaintyModel, params: MasParams, budget=None) -> SafetyChecker:
    """Checker taking the measured state; the error model is wrapped around it."""
    def check(x: MasState, seq: CommandSequence) -> SafetyVerdict:
        return mas_permanently_safe_uncertain(initial_set(x, model), seq, model, params)
    return SafetyChecker(check, budget)
