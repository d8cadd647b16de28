import math

import numpy as np
import pytest

from curveflow.curve import DiscreteCurve
from curveflow.presets import figure_eight, limacon
from curveflow.symmetry import covered_circle
from curveflow.winding import bp_area, winding_field, winding_numbers


def crossing_winding(points, p):
    """Signed crossings of the ray to +x (the classical half-open rule)."""
    a = points
    b = np.roll(points, -1, axis=0)
    w = 0
    for (x0, y0), (x1, y1) in zip(a, b):
        side = (x1 - x0) * (p[1] - y0) - (p[0] - x0) * (y1 - y0)
        if y0 <= p[1] < y1 and side > 0:
            w += 1
        elif y1 <= p[1] < y0 and side < 0:
            w -= 1
    return w


@pytest.mark.parametrize("curve", [covered_circle(3, 1.0, 90), figure_eight(64), limacon(M=80)],
                         ids=["circle3", "figure8", "limacon"])
def test_winding_numbers_match_ray_crossing(curve):
    rng = np.random.default_rng(1)
    lo, hi = curve.points.min(axis=0) - 0.2, curve.points.max(axis=0) + 0.2
    samples = lo + (hi - lo) * rng.random((300, 2))
    w, dist = winding_numbers(curve, samples)
    for p, wi, d in zip(samples, w, dist):
        if d > 1e-9:
            assert wi == crossing_winding(curve.points, p)


def test_distance_to_polygon():
    sq = DiscreteCurve([[0, 0], [1, 0], [1, 1], [0, 1]])
    _, d = winding_numbers(sq, [[0.5, 0.5], [2, 0.5], [2, 2]])
    assert d == pytest.approx([0.5, 1.0, math.sqrt(2)])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_bp_area_of_covered_circle(n):
    c = covered_circle(n, 1.0, 720)
    wf = winding_field(c, 0.01)
    # w = n inside, so the Banchoff-Pohl area is n^2 times the disc area
    assert wf.bp_area == pytest.approx(n * n * math.pi, rel=2e-3)
    assert abs(wf.bp_area - n * n * math.pi) <= wf.bp_area_error
    assert wf.signed_area == pytest.approx(n * math.pi, rel=2e-3)


def test_bp_area_of_figure_eight_counts_both_lobes():
    c = figure_eight(512, lobe_area=1.0)
    wf = winding_field(c, 0.005)
    assert set(np.unique(wf.values)) == {-1, 0, 1}
    assert wf.bp_area == pytest.approx(2.0, rel=5e-3)
    assert abs(wf.signed_area) < 5e-3


def test_error_estimate_shrinks_with_h():
    c = limacon(M=400)
    errs = [winding_field(c, h).bp_area_error for h in (0.04, 0.02, 0.01)]
    assert errs[0] > errs[1] > errs[2]


def test_bp_area_rejects_bad_spacing():
    with pytest.raises(ValueError):
        bp_area(covered_circle(1), 0.0)
