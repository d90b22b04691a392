import math

import pytest

from lazywalk.optimize import (
    BracketError,
    find_root,
    find_saddle,
    golden_section,
    minimize_2d,
    minimize_scalar,
)
from lazywalk.solver import NonAbsorbingError

import oracles


def test_golden_section_quadratic():
    x, fx, width = golden_section(lambda x: (x - 0.3) ** 2, 0.0, 1.0, 1e-10)
    assert x == pytest.approx(0.3, abs=1e-9)
    assert width <= 1e-10


def test_minimize_scalar_interior_and_boundary():
    res = minimize_scalar(lambda x: (x - 0.2) ** 2 + 3)
    assert res.argmin == pytest.approx(0.2, abs=1e-7)
    assert res.value == pytest.approx(3.0)
    res = minimize_scalar(lambda x: x)
    assert res.argmin == 0.0


def test_minimize_scalar_multimodal_prefers_global():
    f = lambda x: math.cos(14 * x) + 0.3 * x
    res = minimize_scalar(f)
    assert res.value <= min(f(i / 10000) for i in range(10001)) + 1e-9


def test_minimize_scalar_ties_go_left():
    res = minimize_scalar(lambda x: 0.0)
    assert res.argmin <= 1e-3


def test_minimize_scalar_guards_upper_end():
    seen = []
    minimize_scalar(lambda x: seen.append(x) or -x)
    assert max(seen) <= 1 - 1e-6


def test_minimize_scalar_skips_non_absorbing_points():
    def f(x):
        if x < 0.1:
            raise NonAbsorbingError("stuck")
        return (x - 0.5) ** 2

    assert minimize_scalar(f).argmin == pytest.approx(0.5, abs=1e-7)


def test_minimize_scalar_all_bad_reraises():
    def f(x):
        raise NonAbsorbingError("stuck")

    with pytest.raises(NonAbsorbingError):
        minimize_scalar(f)


def test_tolerance_floor():
    with pytest.raises(ValueError):
        minimize_scalar(lambda x: x, tol=1e-12)


def test_minimize_2d():
    f = lambda x, y: (x - 0.25) ** 2 + 2 * (y - 0.7) ** 2 + 0.5 * (x - 0.25) * (y - 0.7)
    res = minimize_2d(f)
    assert res.argmin[0] == pytest.approx(0.25, abs=1e-5)
    assert res.argmin[1] == pytest.approx(0.7, abs=1e-5)


def test_minimize_2d_boundary_optimum():
    res = minimize_2d(lambda x, y: x + (y - 0.4) ** 2)
    assert res.argmin[0] == 0.0
    assert res.argmin[1] == pytest.approx(0.4, abs=1e-6)


def test_find_root():
    r = find_root(lambda x: x**3 - 0.125, 0.0, 1.0, 1e-12)
    assert r == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(BracketError):
        find_root(lambda x: x + 1, 0.0, 1.0)


def test_find_saddle_on_known_quadratic():
    T = lambda h, s: 1 - (h - 0.5) ** 2 + (s - 0.6) ** 2 + 0.2 * (h - 0.5) * (s - 0.6)
    res = find_saddle(T)
    # upper extreme is 1 - 1e-6, which nudges the root
    assert res.indifference_root == pytest.approx(0.6, abs=1e-4)
    assert res.h_star == pytest.approx(0.5, abs=1e-6)
    assert res.s_star == pytest.approx(0.6, abs=1e-6)
    assert res.certified
    assert res.hessian_det == pytest.approx(-4.04, abs=1e-3)


def test_find_saddle_without_indifference_root():
    T = lambda h, s: 1 - (h - 0.3) ** 2 + (s - 0.6) ** 2 + 0.1 * (h - 0.3) * (s - 0.6)
    res = find_saddle(T)
    assert math.isnan(res.indifference_root)
    assert res.h_star == pytest.approx(0.3, abs=1e-6)
    assert res.s_star == pytest.approx(0.6, abs=1e-6)
    assert res.certified


# [PAPER] saddle of the printed rational payoff: (0.5097, 0.2797), V 0.8390, det about -2.4
def test_find_saddle_reproduces_printed_payoff_point():
    res = find_saddle(oracles.printed_team_T)
    assert res.h_star == pytest.approx(0.5097, abs=1e-3)
    assert res.s_star == pytest.approx(0.2797, abs=1e-3)
    assert res.value == pytest.approx(0.8390, abs=1e-3)
    assert res.hessian_det == pytest.approx(-2.4, abs=0.05)
    assert res.gradient_norm <= 1e-6
    # hider indifference in the printed payoff is the printed quintic's root
    root = find_root(oracles.team_quintic, 0.0, 1.0, 1e-12)
    assert root == pytest.approx(0.27972, abs=1e-5)
    assert res.indifference_root == pytest.approx(root, abs=1e-5)
    # [DERIVED] the printed payoff is convex in h there, so the grid check fails
    assert not res.certified
    assert res.hider_violation > 1e-5
