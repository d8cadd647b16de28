"""Length minimisation at fixed area for open curves between two half-lines.

The admissible class: open polygons ``P_0..P_M`` with ``P_0 = rho*v0`` and
``P_M = rho*v_theta`` for a common ``rho >= 0``. The optimiser is a damped
Newton (SQP) iteration on the Lagrangian ``L + lam*(A - target)`` followed by
a rescaling about the origin, which restores the area exactly and keeps the
endpoint constraints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .curve import (CurveError, DiscreteCurve, cross2, curvature_profile, length, reparameterize,
                    rotate90, signed_area)

logger = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual_history):
        super().__init__(message)
        self.residual_history = list(residual_history)


@dataclass(frozen=True)
class FreeBoundaryProblem:
    theta: float
    area_target: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.theta <= 2 * math.pi + 1e-12:
            raise ValueError(f"theta must lie in (0, 2*pi], got {self.theta}")
        if self.area_target <= 0:
            raise ValueError("area target must be positive")

    @property
    def v0(self):
        return np.array([1.0, 0.0])

    @property
    def v_theta(self):
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    @property
    def full_turn(self) -> bool:
        return abs(self.theta - 2 * math.pi) < 1e-12


@dataclass
class MinimizeOptions:
    tol: float = 1e-8          # stationarity, relative to L
    max_iters: int = 200
    mu0: float = 1e-8          # initial Levenberg damping, relative to the Hessian scale
    min_edge_fraction: float = 1e-3


@dataclass
class VariationReport:
    grad_length: np.ndarray
    grad_area: np.ndarray
    multiplier: float
    residual: float
    boundary_defect: float
    iters: int = 0
    residual_history: list = field(default_factory=list)
    length_history: list = field(default_factory=list)


# -- first variations ---------------------------------------------------------

def first_variation_length(curve: DiscreteCurve, phi) -> float:
    """Directional derivative of the polygon length: sum of unit tangent . delta(phi)."""
    phi = np.asarray(phi, float)
    e = curve.edges()
    t = e / curve.edge_lengths()[:, None]
    dphi = (np.roll(phi, -1, axis=0) - phi) if curve.closed else np.diff(phi, axis=0)
    return float(np.sum(t * dphi))


def first_variation_area(curve: DiscreteCurve, phi) -> float:
    """Directional derivative of the signed area, split as interior plus endpoint bracket.

    interior: -sum over edges of R(e) . (phi_k + phi_{k+1}) / 2
    bracket:  -1/2 [R^{-1} gamma . phi] from start to end (zero for closed curves)
    """
    phi = np.asarray(phi, float)
    p = curve.points
    e = curve.edges()
    if curve.closed:
        phi_mid = 0.5 * (phi + np.roll(phi, -1, axis=0))
    else:
        phi_mid = 0.5 * (phi[:-1] + phi[1:])
    interior = -float(np.sum(rotate90(e) * phi_mid))
    if curve.closed:
        return interior
    rinv = -rotate90(p[[0, -1]])
    bracket = float(np.dot(rinv[1], phi[-1]) - np.dot(rinv[0], phi[0]))
    return interior - 0.5 * bracket


def _grad_length(P):
    e = np.diff(P, axis=0)
    t = e / np.hypot(e[:, 0], e[:, 1])[:, None]
    g = np.zeros_like(P)
    g[:-1] -= t
    g[1:] += t
    return g


def _grad_area(P):
    g = np.zeros_like(P)
    g[:-1] += -0.5 * rotate90(P[1:])
    g[1:] += 0.5 * rotate90(P[:-1])
    return g


def _hessians(P):
    """Sparse Hessians of length and area with respect to the flattened vertex array."""
    n = len(P)
    e = np.diff(P, axis=0)
    h = np.hypot(e[:, 0], e[:, 1])
    t = e / h[:, None]
    blocks = (np.eye(2)[None] - t[:, :, None] * t[:, None, :]) / h[:, None, None]
    rows, cols, vals = [], [], []

    def put(bi, bj, B):
        for a in range(2):
            for b in range(2):
                rows.append(2 * bi + a)
                cols.append(2 * bj + b)
                vals.append(B[:, a, b])

    k = np.arange(n - 1)
    put(k, k, blocks)
    put(k + 1, k + 1, blocks)
    put(k, k + 1, -blocks)
    put(k + 1, k, -blocks)
    HL = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(2 * n, 2 * n))
    J = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rows, cols, vals = [], [], []
    Jb = np.broadcast_to(0.5 * J, (n - 1, 2, 2))
    put(k, k + 1, Jb)
    put(k + 1, k, np.transpose(Jb, (0, 2, 1)))
    HA = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(2 * n, 2 * n))
    return HL, HA


class _Param:
    """Linear map from reduced variables (rho, interior vertices) to all vertices."""

    def __init__(self, problem: FreeBoundaryProblem, n_vertices: int):
        self.n = n_vertices
        v0, vt = problem.v0, problem.v_theta
        nz = 1 + 2 * (n_vertices - 2)
        rows = [0, 1, 2 * n_vertices - 2, 2 * n_vertices - 1]
        cols = [0, 0, 0, 0]
        vals = [v0[0], v0[1], vt[0], vt[1]]
        inner = np.arange(2, 2 * n_vertices - 2)
        rows += list(inner)
        cols += list(inner - 1)
        vals += [1.0] * inner.size
        self.T = sp.csr_matrix((vals, (rows, cols)), shape=(2 * n_vertices, nz))
        self.v0, self.vt = v0, vt

    def to_points(self, z):
        return (self.T @ z).reshape(self.n, 2)

    def from_points(self, P):
        rho = 0.5 * (P[0] @ self.v0 + P[-1] @ self.vt)
        return np.concatenate([[rho], P[1:-1].ravel()])


def constraint_defects(curve: DiscreteCurve, problem: FreeBoundaryProblem) -> dict:
    p0, p1 = curve.points[0], curve.points[-1]
    v0, vt = problem.v0, problem.v_theta
    return {
        "start_off_line": float(abs(cross2(v0, p0))) + max(0.0, -float(p0 @ v0)),
        "end_off_line": float(abs(cross2(vt, p1))) + max(0.0, -float(p1 @ vt)),
        "radius_mismatch": float(abs(np.hypot(*p0) - np.hypot(*p1))),
    }


def _check_admissible(curve, problem, tol):
    if curve.closed:
        raise CurveError("free-boundary curves are open")
    d = constraint_defects(curve, problem)
    scale = tol * length(curve)
    bad = {k: v for k, v in d.items() if v > scale}
    if bad:
        raise CurveError(f"curve violates the half-line / equal-radius constraints: {bad}")


def arc_initial(problem: FreeBoundaryProblem, M: int = 512, winding: int = 1,
                perturbation: float = 0.0, seed: int | None = None) -> DiscreteCurve:
    """Arc centred at the origin from angle 0 to theta + 2*pi*(winding-1), area = target.

    ``perturbation`` adds smooth radial modes vanishing at both ends plus a
    small tangential jitter of the interior vertices.
    """
    span = problem.theta + 2 * math.pi * (winding - 1)
    u = np.linspace(0.0, 1.0, M + 1)
    r = np.ones_like(u)
    rng = np.random.default_rng(seed)
    if perturbation:
        for k in range(1, 5):
            r += perturbation * rng.uniform(-1, 1) / k * np.sin(k * math.pi * u)
    phi = span * u
    if perturbation:
        jitter = rng.uniform(-0.3, 0.3, size=M + 1) * span / M
        jitter[[0, -1]] = 0.0
        phi = phi + jitter
    P = r[:, None] * np.column_stack([np.cos(phi), np.sin(phi)])
    c = DiscreteCurve(P, closed=False, name=f"arc-theta{problem.theta:.6g}-j{winding}")
    a = signed_area(c, allow_open=True)
    return c.with_points(P * math.sqrt(problem.area_target / a))


def _reduced_grads(param, P):
    gL = param.T.T @ _grad_length(P).ravel()
    gA = param.T.T @ _grad_area(P).ravel()
    return gL, gA


def _multiplier(gL, gA):
    return -float(gL @ gA) / float(gA @ gA)


def minimize_open(problem: FreeBoundaryProblem, init: DiscreteCurve,
                  opts: MinimizeOptions | None = None):
    """Minimise length over the admissible class at fixed area.

    Returns the minimising curve and a :class:`VariationReport`. Raises
    :class:`ConvergenceError` if the stationarity residual does not fall
    below ``opts.tol * L`` within ``opts.max_iters`` iterations.
    """
    opts = opts or MinimizeOptions()
    _check_admissible(init, problem, 1e-9)
    if signed_area(init, allow_open=True) <= 0:
        raise CurveError("initial curve must have positive area")
    param = _Param(problem, len(init))
    z = param.from_points(init.points)

    def project(z):
        a = signed_area(DiscreteCurve(param.to_points(z), closed=False), allow_open=True)
        if a <= 0:
            return None
        return z * math.sqrt(problem.area_target / a)

    z = project(z)
    P = param.to_points(z)
    L = length(DiscreteCurve(P, closed=False))
    history, lengths = [], [L]
    mu = None
    for it in range(1, opts.max_iters + 1):
        gL, gA = _reduced_grads(param, P)
        lam = _multiplier(gL, gA)
        res = float(np.linalg.norm(gL + lam * gA))
        history.append(res)
        if res < opts.tol * L:
            break
        HL, HA = _hessians(P)
        H = (param.T.T @ (HL + lam * HA) @ param.T).tocsc()
        scale = float(np.mean(np.abs(H.diagonal())))
        if mu is None:
            mu = opts.mu0 * scale
        nz = len(z)
        accepted = False
        for _ in range(40):
            K = sp.bmat([[H + mu * sp.identity(nz), gA[:, None]], [gA[None, :], None]], format="csc")
            rhs = np.concatenate([-(gL + lam * gA), [0.0]])
            sol = spsolve(K, rhs)
            z_new = project(z + sol[:nz])
            if z_new is not None and np.all(np.isfinite(z_new)):
                P_new = param.to_points(z_new)
                edges = np.hypot(*np.diff(P_new, axis=0).T)
                if z_new[0] >= 0 and edges.min() > 0:
                    L_new = float(edges.sum())
                    if L_new <= L * (1 + 1e-15):
                        accepted = True
                        break
            mu *= 10.0
        if not accepted:
            raise ConvergenceError(f"line search failed at iteration {it}, residual {res:.3g}", history)
        mu = max(mu / 10.0, opts.mu0 * scale * 1e-4)
        z, P, L = z_new, P_new, L_new
        lengths.append(L)
        h = np.hypot(*np.diff(P, axis=0).T)
        if h.min() < opts.min_edge_fraction * L / len(h):
            logger.info("remeshing at iteration %d (min edge %.3g)", it, h.min())
            c = reparameterize(reparameterize(DiscreteCurve(P, closed=False), 2 * len(P)), len(P))
            z = project(param.from_points(c.points))
            P = param.to_points(z)
            L = length(DiscreteCurve(P, closed=False))
    else:
        raise ConvergenceError(f"no convergence in {opts.max_iters} iterations; residual {history[-1]:.3g}",
                               history)
    curve = DiscreteCurve(P, closed=False, name=f"minimizer-theta{problem.theta:.6g}")
    gLp, gAp = _grad_length(P), _grad_area(P)
    report = VariationReport(
        grad_length=gLp,
        grad_area=gAp,
        multiplier=lam,
        residual=history[-1],
        boundary_defect=glue_defect(curve, problem),
        iters=len(history) - 1,
        residual_history=history,
        length_history=lengths,
    )
    return curve, report


def solve_free_boundary(problem: FreeBoundaryProblem, M: int = 1024, windings=(1, 2, 3),
                        perturbation: float = 0.02, seed: int = 0,
                        opts: MinimizeOptions | None = None, competitor_iters: int = 40):
    """Run :func:`minimize_open` from arcs of several windings and keep the shortest result.

    Arcs winding more than once are saddle points: descent drives them off
    toward a single arc, so they rarely settle. They get ``competitor_iters``
    iterations and are dropped if they do not converge.
    """
    opts = opts or MinimizeOptions()
    best = None
    for j in windings:
        init = arc_initial(problem, M, winding=j, perturbation=perturbation, seed=seed + j)
        run_opts = opts if j == 1 else replace(opts, max_iters=min(opts.max_iters, competitor_iters))
        try:
            curve, rep = minimize_open(problem, init, run_opts)
        except ConvergenceError as exc:
            logger.info("winding %d did not settle: %s", j, exc)
            continue
        if best is None or length(curve) < length(best[0]):
            best = (curve, rep)
    if best is None:
        raise ConvergenceError("no initialisation converged", [])
    return best


# -- equality certificates ------------------------------------------------------

def _end_tangent(a, b, c):
    """Unit tangent at ``a`` of the circle through a, b, c, oriented towards b."""
    ab, ac = b - a, c - a
    d = 2 * cross2(ab, ac)
    chord = ab / np.hypot(*ab)
    if abs(d) < 1e-14 * np.dot(ab, ab):
        return chord
    center = a + (ac[1] * np.dot(ab, ab) - ab[1] * np.dot(ac, ac)) / d * np.array([1.0, 0.0]) \
        + (ab[0] * np.dot(ac, ac) - ac[0] * np.dot(ab, ab)) / d * np.array([0.0, 1.0])
    t = rotate90(a - center)
    t = t / np.hypot(*t)
    return t if np.dot(t, chord) >= 0 else -t


def end_tangents(curve: DiscreteCurve):
    p = curve.points
    t0 = _end_tangent(p[0], p[1], p[2])
    t1 = -_end_tangent(p[-1], p[-2], p[-3])
    return t0, t1


def glue_defect(curve: DiscreteCurve, problem: FreeBoundaryProblem) -> float:
    t0, t1 = end_tangents(curve)
    return float(abs(t0 @ problem.v0 - t1 @ problem.v_theta))


def kappa_spread(curve: DiscreteCurve) -> float:
    prof = curvature_profile(curve)
    kbar = float(np.sum(prof.turning) / np.sum(prof.ds))
    return float(np.max(np.abs(prof.kappa - kbar)) / abs(kbar))


def verify_sector_inequality(curve: DiscreteCurve, problem: FreeBoundaryProblem, tol: float = 1e-9) -> dict:
    """Inequality margin L^2 - 2*theta*A and the equality-case defects."""
    _check_admissible(curve, problem, tol)
    L = length(curve)
    A = signed_area(curve, allow_open=True)
    t0, _ = end_tangents(curve)
    report = {
        "theta": problem.theta,
        "L": L,
        "A": A,
        "margin": L * L - 2 * problem.theta * A,
        "kappa_spread": kappa_spread(curve),
        "glue_defect": glue_defect(curve, problem),
    }
    if not problem.full_turn:
        report["perp_defect"] = float(abs(t0 @ problem.v0))
    return report
