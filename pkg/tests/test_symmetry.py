import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from curveflow.curve import CurveError, DiscreteCurve, iso_ratio, length, rotation_number
from curveflow.presets import perturbed_circle
from curveflow.symmetry import (SymmetrySpec, check_symmetry, covered_circle, fundamental_piece, index_i,
                                make_symmetric, symmetrize, symmetry_defect, vanishing_loop_curve,
                                verify_symmetric_isoperimetric)


def coset_scan(n, m):
    """Brute force: the k in 1..m with k = n mod m."""
    return [k for k in range(1, m + 1) if (n - k) % m == 0][0]


def test_index_examples():
    assert index_i(4, 2) == 2
    assert index_i(0, 1) == 1
    assert index_i(-1, 4) == 3
    assert index_i(2, 4) == 2
    assert index_i(5, 3) == 2


@given(st.integers(-500, 500), st.integers(1, 60))
def test_index_is_coset_representative(n, m):
    assert index_i(n, m) == coset_scan(n, m)


def test_index_rejects_bad_order():
    with pytest.raises(ValueError):
        index_i(3, 0)


def test_spec_round_trip_and_validation():
    s = SymmetrySpec(7, 3)
    assert SymmetrySpec.from_dict(s.as_dict()) == s
    with pytest.raises(ValueError):
        SymmetrySpec.from_dict({"n": 7, "m": 3, "i": 2})


@pytest.mark.parametrize("n,m", [(1, 1), (2, 4), (3, 3), (5, 2), (2, 6)])
def test_covered_circle_symmetry(n, m):
    c = covered_circle(n, 1.0, 12 * m * n)
    ok, i = check_symmetry(c, m)
    assert ok and i == index_i(n, m)


@pytest.mark.parametrize("n,m", [(2, 4), (3, 3), (1, 5), (5, 2)])
def test_perturbed_circle_keeps_symmetry(n, m):
    c = perturbed_circle(n, m, 0.05, M=60 * m)
    assert rotation_number(c) == n
    assert symmetry_defect(c, m, index_i(n, m)) < 1e-12


def test_make_symmetric_round_trip():
    c = perturbed_circle(2, 4, 0.05, M=256)
    piece = fundamental_piece(c, 4)
    back = make_symmetric(piece, 4, 2)
    assert len(back) == len(c)
    assert length(back) == pytest.approx(length(c), rel=1e-12)
    assert symmetry_defect(back, 4, 2) < 1e-12


def test_make_symmetric_rejects_incompatible_piece():
    t = np.linspace(0, math.pi / 2, 20)
    piece = DiscreteCurve(np.column_stack([np.cos(t), np.sin(t)]), closed=False)
    with pytest.raises(CurveError):
        make_symmetric(piece, 4, 2)
    make_symmetric(piece, 4, 1)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 1e-3), st.integers(0, 2**31))
def test_symmetrize_is_a_projection(noise, seed):
    rng = np.random.default_rng(seed)
    c = perturbed_circle(3, 3, 0.05, M=120)
    noisy = c.with_points(c.points + noise * rng.standard_normal(c.points.shape))
    s = symmetrize(noisy, 3, index_i(3, 3))
    assert symmetry_defect(s, 3, index_i(3, 3)) < 1e-13
    assert np.allclose(symmetrize(s, 3, 3).points, s.points, atol=1e-14)


@pytest.mark.parametrize("n,m", [(0, 1), (4, 2), (-1, 4)])
def test_vanishing_loops_keep_rotation_number(n, m):
    ratios = []
    for r in (0.1, 0.01, 0.001):
        c = vanishing_loop_curve(n, m, r)
        assert rotation_number(c) == n
        assert check_symmetry(c, m, tol=1e-9) == (True, index_i(n, m))
        ratios.append(iso_ratio(c))
    assert ratios[0] > ratios[1] > ratios[2] > index_i(n, m)


def test_vanishing_loops_refuse_attainable_range():
    with pytest.raises(ValueError):
        vanishing_loop_curve(2, 4, 0.1)


def test_symmetric_inequality_report():
    eq = verify_symmetric_isoperimetric(covered_circle(2, 1.0, 512), SymmetrySpec(2, 4))
    assert eq["equality"] and abs(eq["margin"]) < 1e-3 and eq["period_margin"] >= 0
    star = verify_symmetric_isoperimetric(perturbed_circle(3, 3, 0.05, M=300), SymmetrySpec(3, 3))
    assert star["margin"] > 0 and not star["equality"]
    loops = verify_symmetric_isoperimetric(vanishing_loop_curve(4, 2, 0.01), SymmetrySpec(4, 2))
    assert 0 < loops["margin"] < 0.1 and not loops["equality"]


def test_symmetric_inequality_preconditions():
    with pytest.raises(ValueError):
        verify_symmetric_isoperimetric(covered_circle(2, 1.0, 512), SymmetrySpec(3, 4))
    with pytest.raises(ValueError):
        verify_symmetric_isoperimetric(perturbed_circle(2, 4, 0.05, M=512), SymmetrySpec(2, 8))
