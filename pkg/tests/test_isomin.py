import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curveflow.curve import CurveError, DiscreteCurve, length, signed_area
from curveflow.isomin import (ConvergenceError, FreeBoundaryProblem, MinimizeOptions, arc_initial,
                              first_variation_area, first_variation_length, minimize_open,
                              solve_free_boundary, verify_sector_inequality)


def random_open_curve(rng, M=40):
    t = np.linspace(0, 2.5, M)
    r = 1 + 0.2 * rng.standard_normal() * np.sin(t) + 0.05 * rng.standard_normal(M)
    return DiscreteCurve(np.column_stack([r * np.cos(t), r * np.sin(t)]), closed=False)


def central_difference(f, curve, phi, eps):
    return (f(curve.with_points(curve.points + eps * phi)) - f(curve.with_points(curve.points - eps * phi))) / (2 * eps)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.booleans())
def test_first_variations_match_finite_differences(seed, closed):
    rng = np.random.default_rng(seed)
    c = random_open_curve(rng)
    if closed:
        c = DiscreteCurve(c.points, closed=True)
    phi = rng.standard_normal(c.points.shape)
    area = lambda k: signed_area(k, allow_open=True)
    # signed area is quadratic in the vertices, so the difference quotient is exact
    assert first_variation_area(c, phi) == pytest.approx(central_difference(area, c, phi, 1e-3), abs=1e-10)
    e1 = abs(first_variation_length(c, phi) - central_difference(length, c, phi, 1e-4))
    e2 = abs(first_variation_length(c, phi) - central_difference(length, c, phi, 5e-5))
    assert e1 < 1e-3 and e2 < e1 / 3.5


def test_area_bracket_sign():
    # gamma = (x, 0) pushed up by (0, c): only the end bracket contributes
    c = DiscreteCurve([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], closed=False)
    phi = np.zeros((3, 2))
    phi[-1] = [0.0, 1.0]
    # area swept from the origin is c/2 after the move
    assert first_variation_area(c, phi) == pytest.approx(0.5)


def test_problem_validation():
    for bad in (0.0, -1.0, 7.0):
        with pytest.raises(ValueError):
            FreeBoundaryProblem(bad)
    with pytest.raises(ValueError):
        FreeBoundaryProblem(1.0, area_target=0.0)


@pytest.mark.parametrize("theta", [math.pi / 3, math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi])
def test_minimizer_is_the_centred_arc(theta):
    problem = FreeBoundaryProblem(theta)
    curve, rep = solve_free_boundary(problem, M=256, windings=(1,), opts=MinimizeOptions(tol=1e-10))
    L = length(curve)
    # the discrete optimum is the inscribed polygon, whose length exceeds the arc by O(M^-2)
    assert L == pytest.approx(math.sqrt(2 * theta), rel=2e-4)
    assert L >= math.sqrt(2 * theta)
    assert signed_area(curve, allow_open=True) == pytest.approx(1.0, rel=1e-12)
    # an arc of radius sqrt(2/theta); for theta = 2 pi a circle through the start point
    centre = np.zeros(2) if theta < 2 * math.pi else curve.points[:-1].mean(axis=0)
    r = np.hypot(*(curve.points - centre).T)
    assert np.ptp(r) / r.mean() < 1e-6
    assert r.mean() == pytest.approx(math.sqrt(2 / theta), rel=1e-4)
    # multiplier times radius is -1 up to the O(h^2) polygon correction
    assert rep.multiplier * r.mean() == pytest.approx(-1.0, rel=1e-4)
    cert = verify_sector_inequality(curve, problem)
    assert cert["margin"] >= 0
    assert cert["kappa_spread"] < 1e-6 and cert["glue_defect"] < 1e-6
    if theta < 2 * math.pi:
        assert cert["perp_defect"] < 1e-6


def test_length_never_increases():
    problem = FreeBoundaryProblem(math.pi / 2)
    init = arc_initial(problem, 128, perturbation=0.05, seed=3)
    _, rep = minimize_open(problem, init)
    assert np.all(np.diff(rep.length_history) <= 1e-15 * rep.length_history[0])


def test_iteration_budget_is_enforced():
    problem = FreeBoundaryProblem(math.pi)
    init = arc_initial(problem, 128, perturbation=0.1, seed=1)
    with pytest.raises(ConvergenceError) as info:
        minimize_open(problem, init, MinimizeOptions(max_iters=2))
    assert len(info.value.residual_history) == 2


def test_exact_arc_certificate():
    problem = FreeBoundaryProblem(math.pi)
    r = math.sqrt(2 / math.pi)
    t = np.linspace(0, math.pi, 4001)
    arc = DiscreteCurve(r * np.column_stack([np.cos(t), np.sin(t)]), closed=False)
    cert = verify_sector_inequality(arc, problem)
    assert cert["kappa_spread"] < 1e-8
    assert cert["glue_defect"] < 1e-8 and cert["perp_defect"] < 1e-8
    assert 0 <= cert["margin"] < 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([math.pi / 3, math.pi, 3 * math.pi / 2]))
def test_random_admissible_curves_have_positive_margin(seed, theta):
    problem = FreeBoundaryProblem(theta)
    c = arc_initial(problem, 64, perturbation=0.2, seed=seed)
    assert verify_sector_inequality(c, problem)["margin"] > 0


def test_rejects_unequal_radii():
    # half circle through the origin: end points at different distances
    problem = FreeBoundaryProblem(3 * math.pi / 2)
    t = np.linspace(0, math.pi, 200)
    c = DiscreteCurve(np.column_stack([1 + np.cos(math.pi - t), np.sin(t)]) - [2.0, 0.0], closed=False)
    with pytest.raises(CurveError):
        verify_sector_inequality(c, problem)
