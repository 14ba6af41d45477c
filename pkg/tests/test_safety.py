import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bbsimplex.core import CommandSequence
from bbsimplex.mas import MasParams, MasState, make_circle_scenario, zero_command
from bbsimplex.safety import Ray, mas_permanently_safe, min_future_distance, rays_intersect, simulate_sequence

from oracles import rays_intersect_by_segments, sampled_min_distance

P = MasParams()
small = st.integers(-3, 3)
vec = st.tuples(small, small)


def R(o, d):
    return Ray(np.array(o, float), np.array(d, float))


@pytest.mark.parametrize("o1,d1,o2,d2,expected", [
    ((0, 0), (1, 0), (2, -1), (0, 1), True),      # crossing
    ((0, 0), (1, 0), (2, 1), (0, 1), False),      # crossing point behind ray 2
    ((0, 0), (1, 0), (0, 1), (1, 0), False),      # parallel, distinct lines
    ((0, 0), (1, 0), (3, 0), (1, 0), True),       # same line, same direction
    ((0, 0), (1, 0), (3, 0), (-1, 0), True),      # head on
    ((0, 0), (-1, 0), (3, 0), (1, 0), False),     # back to back
    ((0, 0), (0, 0), (0, 0), (0, 0), True),       # coincident points
    ((0, 0), (0, 0), (1, 0), (0, 0), False),      # distinct points
    ((2, 0), (0, 0), (0, 0), (1, 0), True),       # point on ray
    ((-2, 0), (0, 0), (0, 0), (1, 0), False),     # point behind ray
    ((0, 0), (1, 1), (0, 0), (-1, 2), True),      # shared origin
    ((1, 0), (0, 1), (0, 0), (1, 0), True),       # origin on the other ray
])
def test_degenerate_rays(o1, d1, o2, d2, expected):
    assert rays_intersect(R(o1, d1), R(o2, d2)) is expected
    assert rays_intersect(R(o2, d2), R(o1, d1)) is expected
    assert rays_intersect_by_segments(o1, d1, o2, d2) is expected


def test_all_small_degenerate_configurations():
    """Every pair of rays on a small grid with axis or zero directions."""
    dirs = [(0, 0), (1, 0), (-1, 0), (0, 1), (2, 0)]
    pts = [(0, 0), (1, 0), (-1, 0), (0, 1), (2, 0)]
    for o1, d1, o2, d2 in itertools.product(pts, dirs, pts, dirs):
        assert rays_intersect(R(o1, d1), R(o2, d2)) == rays_intersect_by_segments(o1, d1, o2, d2)


@given(vec, vec, vec, vec)
def test_rays_match_segment_oracle(o1, d1, o2, d2):
    assert rays_intersect(R(o1, d1), R(o2, d2)) == rays_intersect_by_segments(o1, d1, o2, d2)


@given(vec, vec, vec, vec)
def test_rays_symmetric_and_translation_invariant(o1, d1, o2, d2):
    a = rays_intersect(R(o1, d1), R(o2, d2))
    assert a == rays_intersect(R(o2, d2), R(o1, d1))
    s = np.array([5, -7])
    assert a == rays_intersect(R(np.add(o1, s), d1), R(np.add(o2, s), d2))


def test_min_future_distance_examples():
    assert min_future_distance([0, 0], [1, 0], [10, 1], [-1, 0]) == (1.0, 5.0)
    d, t = min_future_distance([0, 0], [-1, 0], [10, 0], [1, 0])
    assert (d, t) == (10.0, 0.0)
    d, t = min_future_distance([0, 0], [1, 1], [3, 4], [1, 1])
    assert (d, t) == (5.0, 0.0)


@given(st.lists(st.floats(-20, 20), min_size=8, max_size=8))
def test_min_future_distance_vs_sampling(v):
    p1, v1, p2, v2 = np.reshape(v, (4, 2))
    d, t = min_future_distance(p1, v1, p2, v2)
    assert t >= 0
    assert abs(d - sampled_min_distance(p1, v1, p2, v2)) <= 1e-9 * max(1.0, d)


def rest(n):
    return CommandSequence([zero_command(n)])


def two(p1, v1, p2, v2):
    p = np.array([p1, p2], float)
    return MasState(p, np.array([v1, v2], float), p.copy())


def test_verdict_examples():
    x = two([0, 0], [-1, 0], [5, 0], [1, 0])
    assert mas_permanently_safe(x, rest(2), P).accepted
    # head on: still apart after the prefix, but the rays meet
    x = two([0, 0], [1, 0], [5, 0], [-1, 0])
    assert mas_permanently_safe(x, rest(2), P).reason == "converging_final_rays"
    # already too close
    x = two([0, 0], [1, 0], [1, 0], [-1, 0])
    v = mas_permanently_safe(x, rest(2), P)
    assert v.reason == "distance_violation" and v.step == 0 and v.pair == (0, 1)
    # apart now but the rays cross later
    x = two([0, 0], [1, 0], [20, -20], [0, 1])
    assert mas_permanently_safe(x, rest(2), P).reason == "converging_final_rays"
    # parallel lanes closer than d_min forever
    x = two([0, 0], [1, 0], [0, 1.0], [1, 0])
    assert mas_permanently_safe(x, rest(2), P).reason == "distance_violation"
    # parallel lanes exactly d_min apart are accepted
    x = two([0, 0], [1, 0], [0, P.d_min], [1, 0])
    assert mas_permanently_safe(x, rest(2), P).accepted


def test_terminal_separation_without_crossing_rays():
    # opposite directions on parallel lines 1 apart: the rays never meet
    x = two([0, 0], [0, 1], [1, 5], [0, -1])
    v = mas_permanently_safe(x, rest(2), P)
    assert v.reason == "terminal_separation"


def test_horizon_and_invalid_commands():
    x, _ = make_circle_scenario(3, 5.0, P)
    a = np.full((3, 2), 0.1)
    assert mas_permanently_safe(x, CommandSequence([a]), P).reason == "horizon_error"
    bad = np.full((3, 2), 9.0)
    assert mas_permanently_safe(x, CommandSequence([bad, zero_command(3)]), P).reason == "invalid_command"
    assert mas_permanently_safe(x, CommandSequence([zero_command(2)]), P).reason == "horizon_error"


def test_simulate_sequence_length():
    x, s = make_circle_scenario(3, 5.0, P)
    assert len(simulate_sequence(x, CommandSequence([zero_command(3)] * 4), P)) == 5


def test_initial_circle_is_safe():
    for n in (2, 7, 12):
        x, s = make_circle_scenario(n, 10.0, P)
        assert mas_permanently_safe(x, s, P).accepted
