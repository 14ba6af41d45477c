"""Planar double-integrator swarm with centralized MPC controllers.

State stacking is ``[p1, v1, ..., pn, vn]``; internally positions and
velocities are kept as ``(n, 2)`` arrays. A command is an ``(n, 2)`` array of
accelerations.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import CommandSequence, ConfigurationError, PlantModel
from .optim import OptimProblem, solve

BOUND_SLACK = 1e-9


class CommandBoundError(ValueError):
    pass


@dataclass(frozen=True)
class MasParams:
    dt: float = 0.3
    v_max: float = 2.0
    a_max: float = 1.5
    d_min: float = 1.7
    horizon: int = 10
    control_weight: float = 0.1      # lambda
    w_sep: float = 20.0
    w_target: float = 1.0
    w_div: float = 20.0
    w_speed: float = 100.0           # soft |v| <= speed_limit inside the MPC prediction
    restarts: int = 4
    iterations: int = 40
    speed_limit: Optional[float] = None   # cruise cap for the MPC; None means v_max

    @property
    def cruise(self) -> float:
        return self.v_max if self.speed_limit is None else self.speed_limit

    def __post_init__(self):
        if self.dt <= 0 or self.v_max <= 0 or self.a_max <= 0:
            raise ConfigurationError("dt, v_max and a_max must be positive")
        if self.d_min < 0 or self.horizon < 1:
            raise ConfigurationError("need d_min >= 0 and horizon >= 1")
        for name in ("control_weight", "w_sep", "w_target", "w_div", "w_speed"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name} must be non-negative")
        if self.restarts < 1 or self.iterations < 1:
            raise ConfigurationError("restarts and iterations must be >= 1")
        if self.speed_limit is not None and not 0 < self.speed_limit <= self.v_max:
            raise ConfigurationError("speed_limit must be in (0, v_max]")


@dataclass(frozen=True)
class MasState:
    p: np.ndarray
    v: np.ndarray
    targets: np.ndarray
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    @property
    def n(self) -> int:
        return self.p.shape[0]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v], axis=1).reshape(-1)

    @classmethod
    def from_vector(cls, x, targets, center=(0.0, 0.0)) -> "MasState":
        blocks = np.asarray(x, dtype=float).reshape(-1, 4)
        return cls(blocks[:, :2].copy(), blocks[:, 2:].copy(),
                   np.asarray(targets, dtype=float), np.asarray(center, dtype=float))


def zero_command(n: int) -> np.ndarray:
    return np.zeros((n, 2))


def clamp_speed(v: np.ndarray, v_max: float) -> np.ndarray:
    speed = np.linalg.norm(v, axis=-1, keepdims=True)
    scale = np.where(speed > v_max, v_max / np.where(speed > 0, speed, 1.0), 1.0)
    return v * scale


def check_command(a, n: int, a_max: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape != (n, 2):
        raise CommandBoundError(f"expected command of shape {(n, 2)}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise CommandBoundError("non-finite acceleration")
    if np.any(np.linalg.norm(a, axis=1) > a_max * (1 + BOUND_SLACK)):
        raise CommandBoundError("acceleration exceeds a_max")
    return a


def mas_step(x: MasState, a, params: MasParams, w=None) -> MasState:
    """One step of the swarm dynamics; the new velocity is clamped radially to v_max.

    ``w``, if given, is a ``(n, 4)`` additive disturbance on ``[p, v]`` applied
    before the clamp.
    """
    a = check_command(a, x.n, params.a_max)
    p = x.p + params.dt * x.v
    v = x.v + params.dt * a
    if w is not None:
        w = np.asarray(w, dtype=float).reshape(x.n, 4)
        p = p + w[:, :2]
        v = v + w[:, 2:]
    return MasState(p, clamp_speed(v, params.v_max), x.targets, x.center)


# -- cost terms --------------------------------------------------------------
# The helpers take arrays with arbitrary leading axes (..., n, 2) so the MPC
# can evaluate every restart of the optimizer in one call.

def _separation(P):
    """Sum over pairs i>j of 1/|pi - pj|^2 per leading index, and the gradient wrt P."""
    sq = np.einsum("...k,...k->...", P, P)
    S = sq[..., :, None] + sq[..., None, :] - 2.0 * (P @ np.swapaxes(P, -1, -2))
    n = P.shape[-2]
    diag = np.arange(n)
    S[..., diag, diag] = np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(S > 0, 1.0 / S, np.inf)
        w = inv * inv
        grad = -2.0 * (w.sum(axis=-1)[..., None] * P - w @ P)
    val = 0.5 * inv.sum(axis=(-1, -2))
    hit = ~np.isfinite(val)
    if np.any(hit):
        val = np.where(hit, np.inf, val)
        grad = np.where(hit[..., None, None], 0.0, grad)
    return val, grad


def _divergence(P, V, center):
    """Per-agent 1 - cos(angle between p - c and v); the value is 2 where undefined."""
    Q = P - center
    qn = np.sqrt(np.einsum("...k,...k->...", Q, Q))
    vn = np.sqrt(np.einsum("...k,...k->...", V, V))
    ok = (qn > 1e-12) & (vn > 1e-12)
    qs = np.where(ok, qn, 1.0)
    vs = np.where(ok, vn, 1.0)
    dot = np.einsum("...k,...k->...", Q, V)
    cos = np.where(ok, dot / (qs * vs), -1.0)
    qv = (qs * vs)[..., None]
    dQ = -(V / qv - (dot / (qs ** 3 * vs))[..., None] * Q)
    dV = -(Q / qv - (dot / (qs * vs ** 3))[..., None] * V)
    dQ = np.where(ok[..., None], dQ, 0.0)
    dV = np.where(ok[..., None], dV, 0.0)
    return 1.0 - cos, dQ, dV


def cost_ac(positions, targets, params: MasParams) -> float:
    """Advanced-controller cost summed over a ``(T, n, 2)`` position trajectory.

    Coincident agents give ``inf``.
    """
    P = np.asarray(positions, dtype=float)
    if P.ndim == 2:
        P = P[None]
    sep = float(np.sum(_separation(P)[0])) if P.shape[1] > 1 else 0.0
    tgt = float(np.sum((P - np.asarray(targets, dtype=float)) ** 2))
    return params.w_sep * sep + params.w_target * tgt


def cost_bc(positions, velocities, center, params: MasParams) -> float:
    """Baseline cost: separation plus alignment of velocities with the outward radial."""
    P = np.asarray(positions, dtype=float)
    V = np.asarray(velocities, dtype=float)
    if P.ndim == 2:
        P, V = P[None], V[None]
    sep = float(np.sum(_separation(P)[0])) if P.shape[1] > 1 else 0.0
    div = float(np.sum(_divergence(P, V, np.asarray(center, dtype=float))[0]))
    return params.w_sep * sep + params.w_div * div


# -- MPC ---------------------------------------------------------------------

def _prediction_maps(T: int, dt: float):
    t = np.arange(T)[:, None]
    s = np.arange(T)[None, :]
    Lp = dt * dt * np.maximum(t - 1 - s, 0).astype(float)   # position at t from a_s
    Lv = dt * (s < t).astype(float)                         # velocity at t from a_s
    return Lp, Lv


class MpcObjective:
    """MPC objective over stacked accelerations of shape (T, n, 2).

    The prediction covers steps k..k+T-1 (the first is the current state and
    contributes a constant) under the plant's linear update without the speed
    clamp; exceeding v_max is penalised instead, including the velocity left
    after the last command. Points are evaluated in batches of shape (R, T*n*2).
    """

    def __init__(self, x: MasState, kind: str, params: MasParams):
        if kind not in ("ac", "bc"):
            raise ValueError("kind must be 'ac' or 'bc'")
        self.x, self.kind, self.params = x, kind, params
        T, n = params.horizon, x.n
        self.shape = (T, n, 2)
        self.Lp, self.Lv = _prediction_maps(T, params.dt)
        tt = np.arange(T)[:, None, None]
        self.P0 = x.p[None] + tt * params.dt * x.v[None]
        self.V0 = np.broadcast_to(x.v[None], (T, n, 2))

    def batch(self, Z):
        prm = self.params
        R = Z.shape[0]
        A = Z.reshape((R,) + self.shape)
        Af = A.reshape(R, self.shape[0], -1)
        P = self.P0 + (self.Lp @ Af).reshape(A.shape)
        V = self.V0 + (self.Lv @ Af).reshape(A.shape)
        dV = np.zeros_like(V)
        val = prm.control_weight * np.einsum("rtnk,rtnk->r", A, A)
        if self.x.n > 1 and prm.w_sep > 0:
            sep, g = _separation(P)
            val = val + prm.w_sep * sep.sum(axis=1)
            dP = prm.w_sep * g
        else:
            dP = np.zeros_like(P)
        if self.kind == "ac":
            diff = P - self.x.targets
            val = val + prm.w_target * np.einsum("rtnk,rtnk->r", diff, diff)
            dP = dP + 2 * prm.w_target * diff
        else:
            div, gq, gv = _divergence(P, V, self.x.center)
            val = val + prm.w_div * div.sum(axis=(1, 2))
            dP = dP + prm.w_div * gq
            dV = dV + prm.w_div * gv
        Vlast = V[:, -1] + prm.dt * A[:, -1]
        Vall = np.concatenate([V, Vlast[:, None]], axis=1)
        sp = np.sqrt(np.einsum("rtnk,rtnk->rtn", Vall, Vall))
        over = np.maximum(sp - prm.cruise, 0.0)
        val = val + prm.w_speed * np.einsum("rtn,rtn->r", over, over)
        gsp = (2 * prm.w_speed * over / np.where(sp > 0, sp, 1.0))[..., None] * Vall
        dV = dV + gsp[:, :-1]
        back = (self.Lp.T @ dP.reshape(Af.shape) + self.Lv.T @ dV.reshape(Af.shape)).reshape(A.shape)
        dA = back + 2 * prm.control_weight * A + prm.dt * gsp[:, -1][:, None]
        val = np.where(np.isfinite(val), val, np.inf)
        return val, dA.reshape(R, -1)

    def value(self, z) -> float:
        return float(self.batch(np.asarray(z, dtype=float)[None])[0][0])

    def grad(self, z) -> np.ndarray:
        return self.batch(np.asarray(z, dtype=float)[None])[1][0]


def project_discs(z: np.ndarray, a_max: float) -> np.ndarray:
    a = z.reshape(-1, 2)
    norm = np.linalg.norm(a, axis=1, keepdims=True)
    scale = np.where(norm > a_max, a_max / np.where(norm > 0, norm, 1.0), 1.0)
    return (a * scale).reshape(z.shape)


def state_seed(x: MasState, seed: int, salt: int = 0) -> int:
    """Seed that is a pure function of (state, seed), so controllers stay stateless."""
    h = zlib.crc32(np.ascontiguousarray(x.p).tobytes())
    h = zlib.crc32(np.ascontiguousarray(x.v).tobytes(), h)
    return int(np.random.SeedSequence([seed, salt, h]).generate_state(1)[0])


def mpc_solve(x: MasState, cost: str, params: MasParams, seed: int) -> CommandSequence:
    """Approximate MPC minimizer; ``cost`` is ``"ac"`` or ``"bc"``. Returns T commands."""
    if cost not in ("ac", "bc"):
        raise ValueError("cost must be 'ac' or 'bc'")
    obj = MpcObjective(x, cost, params)
    dim = int(np.prod(obj.shape))
    lim = np.full(dim, params.a_max)
    problem = OptimProblem(obj.value, -lim, lim, gradient=obj.grad, batch=obj.batch,
                           project=lambda z: project_discs(z, params.a_max))
    res = solve(problem, seed=seed, budget=params.iterations, restarts=params.restarts,
                x0=np.zeros(dim))
    A = project_discs(res.x, params.a_max).reshape(obj.shape)
    return CommandSequence(A[k].copy() for k in range(params.horizon))


@dataclass
class MasAdvancedController:
    params: MasParams
    seed: int = 0

    def __call__(self, x: MasState) -> np.ndarray:
        return mpc_solve(x, "ac", self.params, state_seed(x, self.seed, 1))[0]


@dataclass
class MasLookaheadBaseline:
    """Builds ``[z, bc(x'), 0]`` where ``x'`` is ``x`` advanced by ``z``."""
    params: MasParams
    seed: int = 0

    def __call__(self, x: MasState, z) -> CommandSequence:
        return mas_lookahead_baseline(x, z, self.params, self.seed)


def mas_advanced_controller(x: MasState, params: MasParams, seed: int = 0) -> np.ndarray:
    return MasAdvancedController(params, seed)(x)


def mas_lookahead_baseline(x: MasState, z, params: MasParams, seed: int = 0) -> CommandSequence:
    x1 = mas_step(x, z, params)
    bc = mpc_solve(x1, "bc", params, state_seed(x1, seed, 2))
    return CommandSequence([z, *bc, zero_command(x.n)])


def make_circle_scenario(n: int, radius: float, params: MasParams,
                         center=(0.0, 0.0)) -> tuple[MasState, CommandSequence]:
    """Agents at rest, equally spaced on a circle, each targeting the antipodal point."""
    if n < 2:
        raise ConfigurationError("need at least two agents")
    c = np.asarray(center, dtype=float)
    ang = 2 * np.pi * np.arange(n) / n
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    p = c + radius * ring
    gap = 2 * radius * np.sin(np.pi / n)
    if gap <= params.d_min:
        raise ConfigurationError(f"initial spacing {gap:.4g} does not exceed d_min={params.d_min}")
    x = MasState(p, np.zeros((n, 2)), c - radius * ring, c)
    return x, CommandSequence([zero_command(n)])


def pairwise_distances(p: np.ndarray) -> np.ndarray:
    d = p[:, None, :] - p[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", d, d))


def min_separation(p: np.ndarray) -> tuple[float, tuple[int, int]]:
    D = pairwise_distances(p)
    n = D.shape[0]
    iu = np.triu_indices(n, 1)
    k = int(np.argmin(D[iu]))
    return float(D[iu][k]), (int(iu[0][k]), int(iu[1][k]))


def _disc_noise(rng, n, radius):
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    th = rng.uniform(0.0, 2 * np.pi, n)
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)


def mas_plant(params: MasParams, n: int, disturbance_bound: float = 0.0,
              sensor_position_radius: float = 0.0, sensor_velocity_radius: float = 0.0) -> PlantModel:
    """Plant wrapper.

    A positive ``disturbance_bound`` adds uniform noise on every p/v component
    each step. Sensor radii make the controllers and checker see the state
    through uniform noise in a disc of that radius, per agent and per block.
    """
    def admissible(x: MasState) -> bool:
        return x.n < 2 or min_separation(x.p)[0] >= params.d_min

    def step(x, u, w):
        return mas_step(x, u, params, w)

    sample = None
    if disturbance_bound > 0:
        def sample(rng):
            return rng.uniform(-disturbance_bound, disturbance_bound, size=(n, 4))
    observe = None
    if sensor_position_radius > 0 or sensor_velocity_radius > 0:
        def observe(x, rng):
            return MasState(x.p + _disc_noise(rng, x.n, sensor_position_radius),
                            x.v + _disc_noise(rng, x.n, sensor_velocity_radius),
                            x.targets, x.center)
    return PlantModel(step=step, admissible=admissible, sample_disturbance=sample, observe=observe)
