"""Rotationally symmetric curves: the index i_{n,m}, assembly, detection, projection.

A closed curve with ``M`` vertices is (m, i)-symmetric when shifting the
vertex index by ``M/m`` equals rotating the curve by ``2*pi*i/m`` about its
centre. The centre is taken to be the vertex mean, which for a symmetric
vertex set is the rotation centre.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curve import CurveError, DiscreteCurve, diameter, length, rotation_matrix


@dataclass(frozen=True)
class SymmetrySpec:
    n: int
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("symmetry order m must be positive")

    @property
    def i(self) -> int:
        return index_i(self.n, self.m)

    def as_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "i": self.i}

    @classmethod
    def from_dict(cls, d: dict) -> "SymmetrySpec":
        spec = cls(int(d["n"]), int(d["m"]))
        if "i" in d and int(d["i"]) != spec.i:
            raise ValueError(f"inconsistent symmetry index: i={d['i']} but i_(n,m)={spec.i}")
        return spec


def index_i(n: int, m: int) -> int:
    """Representative of ``n`` modulo ``m`` in ``{1, ..., m}``: n + m - m*ceil(n/m)."""
    if m <= 0:
        raise ValueError(f"m must be positive, got {m}")
    ceil = -((-n) // m)
    return n + m - m * ceil


def covered_circle(n: int, r: float = 1.0, M: int = 256, name: str = "") -> DiscreteCurve:
    """Counterclockwise n-times covered circle of radius r with M vertices."""
    if n < 1:
        raise ValueError("covering number must be positive")
    if r <= 0:
        raise ValueError("radius must be positive")
    if M < 3 * n:
        raise CurveError(f"M={M} too coarse for a {n}-times covered circle (need M >= {3 * n})")
    phi = 2 * math.pi * n * np.arange(M) / M
    return DiscreteCurve(r * np.column_stack([np.cos(phi), np.sin(phi)]), closed=True,
                         name=name or f"circle-{n}x")


def make_symmetric(fundamental: DiscreteCurve, m: int, i: int, name: str = "") -> DiscreteCurve:
    """Close up an open piece by the rotations R^k, k = 0..m-1, about the origin."""
    if m < 1 or not 1 <= i <= m:
        raise ValueError(f"need m >= 1 and i in 1..m, got m={m}, i={i}")
    if fundamental.closed:
        raise CurveError("fundamental piece must be an open curve")
    rot = rotation_matrix(2 * math.pi * i / m)
    p = fundamental.points
    gap = np.hypot(*(p[-1] - rot @ p[0]))
    if gap > 1e-9 * max(length(fundamental), 1e-300):
        raise CurveError(f"fundamental piece not compatible with (m={m}, i={i}): endpoint gap {gap:.3g}")
    piece = p[:-1]
    blocks = []
    for k in range(m):
        blocks.append(piece @ np.linalg.matrix_power(rot, k).T)
    return DiscreteCurve(np.vstack(blocks), closed=True, name=name)


def _orbit_shift(curve: DiscreteCurve, m: int) -> int:
    if not curve.closed:
        raise CurveError("symmetry is defined for closed curves")
    M = len(curve)
    if M % m:
        raise CurveError(f"vertex count {M} not divisible by m={m}; resample first")
    return M // m


def symmetry_defect(curve: DiscreteCurve, m: int, i: int) -> float:
    """Max deviation of the index-shifted curve from its rotation, over the diameter."""
    shift = _orbit_shift(curve, m)
    c = curve.points.mean(axis=0)
    q = curve.points - c
    rot = rotation_matrix(2 * math.pi * i / m)
    dev = np.roll(q, -shift, axis=0) - q @ rot.T
    return float(np.max(np.hypot(dev[:, 0], dev[:, 1]))) / diameter(curve)


def check_symmetry(curve: DiscreteCurve, m: int, tol: float = 1e-8) -> tuple[bool, int | None]:
    """Detect (m, i)-symmetry; returns ``(True, i)`` for the best matching index."""
    defects = [symmetry_defect(curve, m, i) for i in range(1, m + 1)]
    best = int(np.argmin(defects))
    if defects[best] <= tol:
        return True, best + 1
    return False, None


def symmetrize(curve: DiscreteCurve, m: int, i: int) -> DiscreteCurve:
    """Project onto (m, i)-symmetric curves by averaging each vertex orbit."""
    if m == 1:
        return curve
    shift = _orbit_shift(curve, m)
    c = curve.points.mean(axis=0)
    q = (curve.points - c).reshape(m, shift, 2)
    base = np.zeros((shift, 2))
    for j in range(m):
        back = rotation_matrix(-2 * math.pi * i * j / m)
        base += q[j] @ back.T
    base /= m
    out = np.vstack([base @ rotation_matrix(2 * math.pi * i * j / m).T for j in range(m)])
    return curve.with_points(out + c)


def fundamental_piece(curve: DiscreteCurve, m: int) -> DiscreteCurve:
    """First period as an open curve, centred and rotated so it starts on the positive x-axis."""
    shift = _orbit_shift(curve, m)
    q = curve.points - curve.points.mean(axis=0)
    piece = np.vstack([q[:shift], q[shift % len(q)][None]])
    ang = math.atan2(piece[0, 1], piece[0, 0])
    return DiscreteCurve(piece @ rotation_matrix(-ang).T, closed=False)


def _loop(center, radius, start_angle, turns, per_loop):
    """Points of |turns| full loops around ``center`` (sign = direction), excluding the start."""
    k = np.arange(1, abs(turns) * per_loop + 1)
    phi = start_angle + math.copysign(1, turns) * 2 * math.pi * k / per_loop
    return center + radius * np.column_stack([np.cos(phi), np.sin(phi)])


def vanishing_loop_curve(n: int, m: int, loop_radius: float, arc_vertices: int = 256,
                         loop_vertices: int = 48) -> DiscreteCurve:
    """(m, i_{n,m})-symmetric curve of rotation number n outside the attainment range.

    One period is the arc of angle 2*pi*i/m of the unit circle, preceded by
    ``ceil(n/m) - 1`` small loops tangent to the circle at the period start
    (clockwise when negative). The loops are tangent to the arc so the splice
    is C^1 and adds exactly one turn per loop.
    """
    if 1 <= n <= m:
        raise ValueError(f"n={n} lies in [1, m={m}], where the infimum is attained; no loops needed")
    if loop_radius <= 0:
        raise ValueError("loop radius must be positive")
    i = index_i(n, m)
    q = -((-n) // m) - 1
    # q CCW loops sit inside the circle, CW loops outside; both are tangent at (1, 0)
    center = np.array([1.0 - loop_radius, 0.0]) if q > 0 else np.array([1.0 + loop_radius, 0.0])
    start = 0.0 if q > 0 else math.pi
    loops = _loop(center, loop_radius, start, q, loop_vertices)
    per_period = max(4, int(math.ceil(arc_vertices * i / m)))
    phi = 2 * math.pi * i / m * np.arange(per_period + 1) / per_period
    arc = np.column_stack([np.cos(phi), np.sin(phi)])
    # start point, loops ending back at the start, then the arc
    piece = np.vstack([arc[:1], loops[:-1], arc])
    return make_symmetric(DiscreteCurve(piece, closed=False), m, i,
                          name=f"loops-n{n}-m{m}-r{loop_radius:g}")


def verify_symmetric_isoperimetric(curve: DiscreteCurve, spec: SymmetrySpec, tol: float = 1e-3,
                                   sym_tol: float = 1e-6) -> dict:
    """Margins of I >= i_{n,m} and of the per-period inequality 2 (2 pi i/m) A_p <= L_p^2.

    Equality is flagged only when both margins are within ``tol`` and the
    curve lies within relative radial distance ``tol`` of a circle about its
    centre, i.e. it is a covered circle up to discretisation.
    """
    from .curve import iso_ratio, rotation_number, signed_area

    N = rotation_number(curve)
    if N != spec.n:
        raise ValueError(f"rotation number {N} does not match n={spec.n}")
    i = spec.i
    defect = symmetry_defect(curve, spec.m, i)
    if defect > sym_tol:
        raise ValueError(f"curve is not ({spec.m}, {i})-symmetric (defect {defect:.3g})")
    I = iso_ratio(curve)
    piece = fundamental_piece(curve, spec.m)
    Lp = length(piece)
    # period area: the open piece closed through the centre (the origin after centring)
    Ap = signed_area(piece, allow_open=True)
    period_margin = Lp**2 - 2 * (2 * math.pi * i / spec.m) * Ap
    q = curve.points - curve.points.mean(axis=0)
    r = np.hypot(q[:, 0], q[:, 1])
    radial = float((r.max() - r.min()) / r.mean())
    margin = I - i
    rel_period = period_margin / Lp**2
    return {
        "n": spec.n,
        "m": spec.m,
        "i": i,
        "I": I,
        "margin": margin,
        "period_L": Lp,
        "period_A": Ap,
        "period_margin": period_margin,
        "radial_deviation": radial,
        "symmetry_defect": defect,
        "equality": bool(abs(margin) <= tol and abs(rel_period) <= tol and radial <= tol),
    }
