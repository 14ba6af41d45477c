import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbsimplex.optim import OptimProblem, fd_gradient, solve


def rosenbrock(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def rosen_grad(x):
    return np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])


def test_rosenbrock_reaches_minimum():
    prob = OptimProblem(rosenbrock, [-2, -2], [2, 2], gradient=rosen_grad)
    res = solve(prob, seed=3, budget=3000, restarts=4)
    assert res.fun < 1e-8
    assert np.allclose(res.x, [1, 1], atol=1e-3)


def test_box_constrained_quadratic_matches_clipped_minimizer():
    # separable quadratic: the box minimizer is the clipped unconstrained one
    c = np.array([3.0, -0.2, -5.0])
    prob = OptimProblem(lambda x: float(np.sum((x - c) ** 2)), [-1, -1, -1], [1, 1, 1],
                        gradient=lambda x: 2 * (x - c))
    res = solve(prob, seed=0)
    assert np.allclose(res.x, np.clip(c, -1, 1), atol=1e-8)


def test_fd_gradient_matches_analytic():
    x = np.array([0.3, -0.7])
    assert np.allclose(fd_gradient(rosenbrock, x), rosen_grad(x), rtol=1e-6, atol=1e-5)


def test_same_seed_same_answer():
    prob = OptimProblem(rosenbrock, [-2, -2], [2, 2])
    a = solve(prob, seed=11, budget=200)
    b = solve(prob, seed=11, budget=200)
    assert np.array_equal(a.x, b.x) and a.fun == b.fun


def test_projection_is_respected():
    def disc(z):
        # rows are separate restarts
        n = np.linalg.norm(z, axis=-1, keepdims=True)
        return np.where(n <= 1, z, z / np.where(n > 0, n, 1.0))
    prob = OptimProblem(lambda x: float(-x.sum()), [-2, -2], [2, 2], gradient=lambda x: -np.ones(2),
                        project=disc)
    res = solve(prob, seed=0)
    assert np.linalg.norm(res.x) <= 1 + 1e-12
    assert np.allclose(res.x, [2 ** -0.5] * 2, atol=1e-6)


def test_bad_arguments():
    with pytest.raises(ValueError):
        OptimProblem(rosenbrock, [1, 0], [0, 1])
    with pytest.raises(ValueError):
        solve(OptimProblem(rosenbrock, [0, 0], [1, 1]), seed=0, budget=0)


def test_non_finite_objective_reports_not_converged():
    res = solve(OptimProblem(lambda x: float("nan"), [0], [1]), seed=0, budget=5)
    assert not res.converged


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=4), st.integers(0, 10 ** 6))
def test_result_always_in_box(center, seed):
    c = np.array(center)
    d = c.size
    prob = OptimProblem(lambda x: float(np.sum(np.sin(3 * x) + (x - c) ** 2)), -np.ones(d), np.ones(d))
    res = solve(prob, seed=seed, budget=30, restarts=2)
    assert np.all(res.x >= -1) and np.all(res.x <= 1)
