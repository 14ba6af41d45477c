"""Multi-start projected-gradient descent over a box (or a convex subset with a projector).

The MPC controllers only need a decent local optimizer, not a global one; bad
solutions are absorbed by the decision module. What matters here is that the
result is feasible and bit-for-bit reproducible for a fixed seed.

Restarts are advanced in lockstep so that problems with a vectorized
objective pay the interpreter overhead once per iteration rather than once
per restart. Each restart still follows its own step-size sequence, so the
outcome is the same as running them one after another.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

ARMIJO = 1e-4
SHRINK = 0.5
DEFAULT_BUDGET = 2000
DEFAULT_RESTARTS = 4


@dataclass
class OptimProblem:
    """Minimize ``objective`` over ``lower <= x <= upper``.

    ``project`` may replace the box projection by one onto a convex subset of
    the box (the MPC uses per-agent acceleration discs); the box then only
    matters for sampling restart points. ``project`` is called on ``(R, d)``
    arrays, one row per restart. ``batch`` maps an ``(R, d)`` array of
    points to ``(values (R,), gradients (R, d))`` and, when given, is used in
    place of ``objective``/``gradient``.
    """
    objective: Callable[[np.ndarray], float]
    lower: np.ndarray
    upper: np.ndarray
    gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None
    batch: Optional[Callable[[np.ndarray], tuple]] = None

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("bounds must be 1-D arrays of equal length")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dimension(self) -> int:
        return self.lower.size

    def feasible(self, X: np.ndarray) -> np.ndarray:
        X = np.clip(X, self.lower, self.upper)
        if self.project is not None:
            X = np.clip(self.project(X), self.lower, self.upper)
        return X

    def value_and_grad(self, X: np.ndarray):
        if self.batch is not None:
            F, G = self.batch(X)
            return np.asarray(F, dtype=float), np.asarray(G, dtype=float)
        F = np.array([float(self.objective(x)) for x in X])
        if self.gradient is not None:
            G = np.array([np.asarray(self.gradient(x), dtype=float) for x in X])
        else:
            G = np.array([fd_gradient(self.objective, x) for x in X])
        return F, G.reshape(X.shape)


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    iterations: int
    restarts: int
    converged: bool


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient with a per-coordinate relative step."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        step = h * max(1.0, abs(x[k]))
        xp = x.copy()
        xm = x.copy()
        xp[k] += step
        xm[k] -= step
        g[k] = (f(xp) - f(xm)) / (2 * step)
    return g


def _norms(X):
    return np.sqrt(np.einsum("rd,rd->r", X, X))


def _descend(problem: OptimProblem, X0: np.ndarray, budget: int, tol: float):
    """Projected gradient, Barzilai-Borwein trial step, Armijo backtracking; one row per restart."""
    X = problem.feasible(X0)
    F, G = problem.value_and_grad(X)
    R = X.shape[0]
    iters = np.zeros(R, dtype=int)
    active = np.isfinite(F)
    conv = np.zeros(R, dtype=bool)
    gmax = np.max(np.abs(G), axis=1) if G.shape[1] else np.zeros(R)
    gmax = np.where(np.isfinite(gmax), gmax, 1.0)
    alpha = 1.0 / np.maximum(gmax, 1.0)

    for _ in range(budget):
        if not active.any():
            break
        iters[active] += 1
        pending = active.copy()
        Xn = X.copy()
        Fn = F.copy()
        Gn = G.copy()
        stepped = np.zeros(R, dtype=bool)
        while pending.any():
            idx = np.flatnonzero(pending)
            Xt = problem.feasible(X[idx] - alpha[idx, None] * G[idx])
            D = Xt - X[idx]
            tiny = _norms(D) <= tol * (1.0 + _norms(X[idx]))
            if tiny.any():
                done = idx[tiny]
                conv[done] = True
                active[done] = False
                pending[done] = False
                idx, Xt, D = idx[~tiny], Xt[~tiny], D[~tiny]
                if idx.size == 0:
                    break
            Ft, Gt = problem.value_and_grad(Xt)
            ok = Ft <= F[idx] + ARMIJO * np.einsum("rd,rd->r", G[idx], D)
            good = idx[ok]
            Xn[good], Fn[good], Gn[good] = Xt[ok], Ft[ok], Gt[ok]
            stepped[good] = True
            pending[good] = False
            bad = idx[~ok]
            alpha[bad] *= SHRINK
            stall = bad[alpha[bad] < 1e-16]
            conv[stall] = True
            active[stall] = False
            pending[stall] = False

        idx = np.flatnonzero(stepped)
        if idx.size == 0:
            continue
        S = Xn[idx] - X[idx]
        Y = Gn[idx] - G[idx]
        sy = np.einsum("rd,rd->r", S, Y)
        ss = np.einsum("rd,rd->r", S, S)
        bb = np.where(sy > 0, ss / np.where(sy > 0, sy, 1.0), 1e3 * np.maximum(alpha[idx], 1e-8))
        alpha[idx] = np.clip(bb, 1e-12, 1e12)
        flat = np.abs(F[idx] - Fn[idx]) <= 1e-14 * (1.0 + np.abs(F[idx]))
        X[idx], F[idx], G[idx] = Xn[idx], Fn[idx], Gn[idx]
        conv[idx[flat]] = True
        active[idx[flat]] = False
    return X, F, iters, conv


def solve(problem: OptimProblem, seed: int, budget: int = DEFAULT_BUDGET,
          restarts: int = DEFAULT_RESTARTS, x0: Optional[np.ndarray] = None,
          tol: float = 1e-12) -> OptimResult:
    """Best local minimum over seeded restarts.

    Restart 0 starts from ``x0`` when given; the other starts are drawn
    uniformly from the box. Ties between restarts go to the lower index.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    rng = np.random.default_rng(seed)
    starts = []
    if x0 is not None:
        starts.append(np.asarray(x0, dtype=float).reshape(-1))
    while len(starts) < max(restarts, 1):
        starts.append(rng.uniform(problem.lower, problem.upper))
    X, F, iters, conv = _descend(problem, np.array(starts), budget, tol)

    finite = np.isfinite(F)
    if finite.any():
        k = int(np.flatnonzero(F == np.min(F[finite]))[0])
    else:
        k = 0
    return OptimResult(x=X[k], fun=float(F[k]), iterations=int(iters.sum()),
                       restarts=len(starts), converged=bool(finite.any() and conv[finite].any()))
