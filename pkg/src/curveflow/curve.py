"""Discrete planar curves and their integral geometric functionals.

A curve is an ordered polygon. Closed curves identify vertex ``M`` with
vertex ``0``. All functionals here are pure functions of the vertex array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

ROTATION_RESIDUAL_TOL = 0.01


class CurveError(ValueError):
    """Invalid curve input or a curve too degenerate for the requested quantity."""


class DegenerateEdgeError(CurveError):
    def __init__(self, index: int, message: str | None = None):
        self.index = index
        super().__init__(message or f"edge starting at vertex {index} has zero length")


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Ordered polygon in the plane.

    Parameters
    ----------
    points : array_like, shape (M, 2)
        Vertex coordinates. For closed curves the last vertex must not repeat
        the first one; the closing edge is implicit.
    closed : bool
        Whether the polygon is closed.
    name : str
        Free-form label carried into file sidecars.
    """

    points: NDArray[np.float64]
    closed: bool = True
    name: str = ""

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise CurveError(f"points must have shape (M, 2), got {pts.shape}")
        need = 3 if self.closed else 2
        if len(pts) < need:
            raise CurveError(f"{'closed' if self.closed else 'open'} curve needs at least {need} vertices")
        if not np.all(np.isfinite(pts)):
            raise CurveError("vertex coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        lengths = _edge_lengths(pts, self.closed)
        bad = np.flatnonzero(lengths <= 0.0)
        if bad.size:
            raise DegenerateEdgeError(int(bad[0]))

    def __len__(self):
        return len(self.points)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    def edges(self) -> NDArray[np.float64]:
        """Edge vectors; for closed curves the last one closes the polygon."""
        if self.closed:
            return np.roll(self.points, -1, axis=0) - self.points
        return np.diff(self.points, axis=0)

    def edge_lengths(self) -> NDArray[np.float64]:
        return _edge_lengths(self.points, self.closed)

    def with_points(self, points) -> "DiscreteCurve":
        return DiscreteCurve(points, closed=self.closed, name=self.name)

    def transformed(self, scale: float = 1.0, angle: float = 0.0, shift=(0.0, 0.0)) -> "DiscreteCurve":
        """Return ``scale * R(angle) @ p + shift`` applied to every vertex."""
        return self.with_points(scale * self.points @ rotation_matrix(angle).T + np.asarray(shift, float))


@dataclass(frozen=True)
class CurveMetrics:
    length: float
    signed_area: float
    rotation_number: int
    iso_ratio: float
    kappa_bar: float
    k_osc: float

    def as_dict(self) -> dict:
        return {
            "L": self.length,
            "A": self.signed_area,
            "N": self.rotation_number,
            "I": self.iso_ratio,
            "kappa_bar": self.kappa_bar,
            "kosc": self.k_osc,
        }


def rotation_matrix(angle: float) -> NDArray[np.float64]:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotate90(v: NDArray[np.float64]) -> NDArray[np.float64]:
    """Counterclockwise quarter turn applied row-wise."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _edge_lengths(pts, closed):
    e = np.roll(pts, -1, axis=0) - pts if closed else np.diff(pts, axis=0)
    return np.hypot(e[:, 0], e[:, 1])


def length(curve: DiscreteCurve) -> float:
    return float(np.sum(curve.edge_lengths()))


def signed_area(curve: DiscreteCurve, allow_open: bool = False) -> float:
    """Shoelace area, positive for counterclockwise circles.

    Open curves are rejected unless ``allow_open`` is set, in which case the
    same sum is taken without the closing chord; this is the area swept by the
    segment joining the origin to the moving point.
    """
    if not curve.closed and not allow_open:
        raise CurveError("signed area of an open curve requires allow_open=True")
    p = curve.points
    q = np.roll(p, -1, axis=0) if curve.closed else p[1:]
    p = p if curve.closed else p[:-1]
    return float(0.5 * np.sum(cross2(p, q)))


@dataclass(frozen=True)
class CurvatureProfile:
    """Per-vertex turning angle, dual edge length and curvature.

    For closed curves every vertex is represented; for open curves only the
    interior vertices ``1..M-2`` are.
    """

    turning: NDArray[np.float64]
    ds: NDArray[np.float64]
    kappa: NDArray[np.float64]


def turning_angles(curve: DiscreteCurve) -> NDArray[np.float64]:
    e = curve.edges()
    if curve.closed:
        prev, nxt = np.roll(e, 1, axis=0), e
    else:
        prev, nxt = e[:-1], e[1:]
    return np.arctan2(cross2(prev, nxt), np.sum(prev * nxt, axis=1))


def curvature_profile(curve: DiscreteCurve) -> CurvatureProfile:
    """Signed curvature as turning angle per averaged adjacent edge length."""
    h = curve.edge_lengths()
    if curve.closed:
        ds = 0.5 * (np.roll(h, 1) + h)
    else:
        if len(curve) < 3:
            raise CurveError("open curve needs an interior vertex for curvature")
        ds = 0.5 * (h[:-1] + h[1:])
    psi = turning_angles(curve)
    return CurvatureProfile(turning=psi, ds=ds, kappa=psi / ds)


def rotation_residual(curve: DiscreteCurve) -> tuple[int, float]:
    """Nearest integer to the total turning over 2*pi, and the rounding residual."""
    if not curve.closed:
        raise CurveError("rotation number is defined for closed curves only")
    total = float(np.sum(turning_angles(curve))) / (2 * math.pi)
    n = round(total)
    return int(n), abs(total - n)


def rotation_number(curve: DiscreteCurve) -> int:
    n, res = rotation_residual(curve)
    if res >= ROTATION_RESIDUAL_TOL:
        raise CurveError(f"curve too coarse to classify: rotation residual {res:.3g}")
    return n


AREA_ROUNDOFF = 1e-13


def iso_ratio(curve: DiscreteCurve) -> float:
    """L^2 / (4 pi A), or ``math.inf`` when the signed area is not positive.

    Areas within shoelace roundoff of zero (|A| <= AREA_ROUNDOFF * L^2)
    count as zero, so a figure-eight gets the infinite branch.
    """
    a = signed_area(curve)
    L = length(curve)
    if a <= AREA_ROUNDOFF * L * L:
        return math.inf
    return L**2 / (4 * math.pi * a)


def bending_energy(curve: DiscreteCurve) -> float:
    prof = curvature_profile(curve)
    return float(np.sum(prof.kappa**2 * prof.ds))


def k_osc(curve: DiscreteCurve) -> float:
    prof = curvature_profile(curve)
    L = float(np.sum(prof.ds))
    kbar = float(np.sum(prof.turning)) / L
    return L * float(np.sum((prof.kappa - kbar) ** 2 * prof.ds))


def metrics(curve: DiscreteCurve) -> CurveMetrics:
    prof = curvature_profile(curve)
    L = length(curve)
    n = rotation_number(curve)
    kbar = float(np.sum(prof.turning)) / L
    return CurveMetrics(
        length=L,
        signed_area=signed_area(curve),
        rotation_number=n,
        iso_ratio=iso_ratio(curve),
        kappa_bar=2 * math.pi * n / L,
        k_osc=L * float(np.sum((prof.kappa - kbar) ** 2 * prof.ds)),
    )


def arclength_nodes(curve: DiscreteCurve) -> NDArray[np.float64]:
    """Cumulative arclength at each vertex, plus the total as the last entry."""
    return np.concatenate([[0.0], np.cumsum(curve.edge_lengths())])


def sample_at_arclength(curve: DiscreteCurve, s: NDArray[np.float64]) -> NDArray[np.float64]:
    """Points on the polygon trace at arclength positions ``s``."""
    pts = curve.points
    if curve.closed:
        pts = np.vstack([pts, pts[:1]])
    nodes = arclength_nodes(curve)
    L = nodes[-1]
    s = np.asarray(s, float)
    if curve.closed:
        s = np.mod(s, L)
    s = np.clip(s, 0.0, L)
    idx = np.clip(np.searchsorted(nodes, s, side="right") - 1, 0, len(nodes) - 2)
    t = (s - nodes[idx]) / (nodes[idx + 1] - nodes[idx])
    return pts[idx] + t[:, None] * (pts[idx + 1] - pts[idx])


def reparameterize(curve: DiscreteCurve, M: int) -> DiscreteCurve:
    """Resample to ``M`` vertices spaced by arclength along the polygon.

    When ``M`` is at least the current vertex count the original vertices are
    kept and the extra ones subdivide edges in proportion to their length, so
    the trace, length and area are unchanged and the spacing is as even as the
    corners allow. When ``M`` is smaller the polygon is sampled at exactly
    equal arclength, which changes the area at second order in the spacing.
    """
    need = 3 if curve.closed else 2
    if M < need:
        raise CurveError(f"need M >= {need}")
    n_in = len(curve)
    n_edges_in = n_in if curve.closed else n_in - 1
    n_edges_out = M if curve.closed else M - 1
    if M < n_in:
        L = length(curve)
        s = np.linspace(0.0, L, n_edges_out + 1)
        pts = sample_at_arclength(curve, s[:-1] if curve.closed else s)
        return curve.with_points(pts)
    h = curve.edge_lengths()
    # largest-remainder apportionment of output edges to input edges
    share = h / h.sum() * n_edges_out
    parts = np.maximum(np.floor(share).astype(int), 1)
    while parts.sum() > n_edges_out:
        cand = np.flatnonzero(parts > 1)
        j = cand[np.argmin((share - parts)[cand])]
        parts[j] -= 1
    while parts.sum() < n_edges_out:
        j = int(np.argmax(h / parts - h / (parts + 1)))
        parts[j] += 1
    pts = curve.points
    nxt = np.roll(pts, -1, axis=0) if curve.closed else pts[1:]
    out = []
    for k in range(n_edges_in):
        t = np.arange(parts[k])[:, None] / parts[k]
        out.append(pts[k] + t * (nxt[k] - pts[k]))
    if not curve.closed:
        out.append(pts[-1:])
    return curve.with_points(np.vstack(out))


def diameter(curve: DiscreteCurve) -> float:
    lo, hi = curve.points.min(axis=0), curve.points.max(axis=0)
    return float(np.hypot(*(hi - lo)))
