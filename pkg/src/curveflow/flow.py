"""Curve diffusion flow  d/dt gamma = -(kappa_ss) nu  on closed polygons.

Spatial scheme
    Vertex ``j`` moves along the unit normal of the chord ``X[j+1] - X[j-1]``.
    The discrete ``kappa_ss`` is a flux-form second difference divided by the
    half-chord length ``W[j]``, which is exactly ``|dA/dX_j|``. That makes the
    semi-discrete flow conserve the polygon area exactly.

Time stepping
    Linearly implicit Euler on the normal speed: the leading fourth-order
    part is treated implicitly through the symmetric cyclic pentadiagonal
    system ``(W + dt G W^-1 G) w = W v`` and the rest explicitly. Because
    ``1^T G = 0`` the first-order area change of every step vanishes, and
    the per-step drift is the quadratic term ``O(dt^2 |w|^2 kappa L)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .banded import solve_cyclic_banded
from .curve import CurveError, DiscreteCurve, cross2, iso_ratio, k_osc, metrics, rotate90
from .symmetry import SymmetrySpec, symmetrize, symmetry_defect
from .winding import winding_field

logger = logging.getLogger(__name__)


def kstar(n: int) -> float:
    """Smallness constant (2 pi/3)(sqrt(1 + 3 n^2 pi) - sqrt(3 n^2 pi))^2."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    a = 3 * n * n * math.pi
    # difference of square roots rewritten to avoid cancellation
    d = 1.0 / (math.sqrt(1 + a) + math.sqrt(a))
    return 2 * math.pi / 3 * d * d


@dataclass(frozen=True)
class GateResult:
    passed: bool
    kosc: float
    iso_over_n: float
    kosc_margin: float
    iso_margin: float


def smallness_gate(curve: DiscreteCurve, n: int, K: float) -> GateResult:
    """K_osc <= K and I/n <= exp(K / (8 n^2 pi^2)), with K in (0, K*_n]."""
    ks = kstar(n)
    if not 0 < K <= ks:
        raise ValueError(f"K={K} outside (0, K*_{n}={ks:.6g}]")
    ko = k_osc(curve)
    ratio = iso_ratio(curve) / n
    limit = math.exp(K / (8 * n * n * math.pi**2))
    return GateResult(
        passed=bool(ko <= K and ratio <= limit),
        kosc=ko,
        iso_over_n=ratio,
        kosc_margin=K - ko,
        iso_margin=limit - ratio,
    )


# -- discrete geometry on raw vertex arrays -----------------------------------

@dataclass
class _Geom:
    h: np.ndarray       # edge j: X[j] -> X[j+1]
    psi: np.ndarray     # turning angle at vertex j
    ds: np.ndarray      # (h[j-1] + h[j]) / 2
    kappa: np.ndarray
    W: np.ndarray       # half chord |X[j+1] - X[j-1]| / 2
    nu: np.ndarray      # unit chord normal (inward for counterclockwise curves)


def _geometry(X) -> _Geom:
    e = np.roll(X, -1, axis=0) - X
    h = np.hypot(e[:, 0], e[:, 1])
    if not np.all(h > 0):
        j = int(np.flatnonzero(~(h > 0))[0])
        raise CurveError(f"degenerate spacing at vertex {j}")
    ep = np.roll(e, 1, axis=0)
    psi = np.arctan2(cross2(ep, e), np.sum(ep * e, axis=1))
    ds = 0.5 * (np.roll(h, 1) + h)
    chord = e + ep
    clen = np.hypot(chord[:, 0], chord[:, 1])
    if not np.all(clen > 0):
        j = int(np.flatnonzero(~(clen > 0))[0])
        raise CurveError(f"cusp (reversed edge) at vertex {j}")
    return _Geom(h=h, psi=psi, ds=ds, kappa=psi / ds, W=0.5 * clen, nu=rotate90(chord / clen[:, None]))


def _second_diff(g: _Geom, f):
    """Flux-form G f: (f[j+1]-f[j])/h[j] - (f[j]-f[j-1])/h[j-1]; columns sum to zero."""
    flux = (np.roll(f, -1) - f) / g.h
    return flux - np.roll(flux, 1)


def _normal_speed(g: _Geom):
    return -_second_diff(g, g.kappa) / g.W


def velocity(curve: DiscreteCurve):
    """Normal speed -kappa_ss at each vertex and the unit normal field.

    The returned normals are the quarter-turned unit chord directions, so
    the velocity field is ``speed[:, None] * normals``.
    """
    if not curve.closed:
        raise CurveError("velocity needs a closed curve")
    g = _geometry(curve.points)
    return _normal_speed(g), g.nu


def _implicit_speed(g: _Geom, v, dt):
    """Solve (W + dt G W^-1 G) w = W v."""
    a = 1.0 / g.h                       # G[j, j+1]
    am = np.roll(a, 1)                  # G[j, j-1]
    diag = -(a + am)
    Winv = 1.0 / g.W
    # (G W^-1 G)[j, j+k] = sum_l G[j, l] W^-1[l] G[l, j+k]
    d0 = am**2 * np.roll(Winv, 1) + diag**2 * Winv + a**2 * np.roll(Winv, -1)
    d1 = diag * Winv * a + a * np.roll(Winv, -1) * np.roll(diag, -1)
    d2 = a * np.roll(Winv, -1) * np.roll(a, -1)
    diagonals = {
        0: g.W + dt * d0,
        1: dt * d1,
        -1: dt * np.roll(d1, 1),
        2: dt * d2,
        -2: dt * np.roll(d2, 2),
    }
    return solve_cyclic_banded(diagonals, g.W * v)


def redistribute(X, beta: float = 0.0):
    """Resample a periodic cubic spline through the vertices.

    Vertices equidistribute the weight ``(1 - beta) ds / L + beta |dpsi| / sum|psi|``:
    plain arclength for ``beta = 0``, while ``beta > 0`` also spreads the
    turning so that small loops keep a fixed share of the vertices.
    Vertex 0 stays where it is.
    """
    M = len(X)
    e = np.roll(X, -1, axis=0) - X
    h = np.hypot(e[:, 0], e[:, 1])
    s = np.concatenate([[0.0], np.cumsum(h)])
    spline = CubicSpline(s, np.vstack([X, X[:1]]), bc_type="periodic")
    weight = h / s[-1]
    if beta > 0:
        ep = np.roll(e, 1, axis=0)
        psi = np.abs(np.arctan2(cross2(ep, e), np.sum(ep * e, axis=1)))
        psi = (np.roll(psi, 1) + 2 * psi + np.roll(psi, -1)) / 4
        turn = 0.5 * (psi + np.roll(psi, -1))  # turning attributed to edge j
        weight = (1 - beta) * weight + beta * turn / turn.sum()
    cum = np.concatenate([[0.0], np.cumsum(weight)])
    cum /= cum[-1]
    targets = np.interp(np.arange(M) / M, cum, s)
    return spline(targets)


_REDISTRIBUTION = {"none": None, "every-step": 0.0, "curvature": 0.5}


# -- configuration, state, report -----------------------------------------------

@dataclass
class FlowConfig:
    M: int | None = None
    dt: float | None = None              # fixed step; None -> adaptive
    disp_fraction: float = 0.1           # dt * max|w| <= disp_fraction * h_min
    safety_kappa: float = 0.05           # dt <= safety_kappa / max|kappa|^4
    dt_growth: float = 1.5
    area_constraint: bool = True         # restore the initial area after each step
    dt_max: float = math.inf
    redistribution: str = "every-step"   # "none" | "every-step" | "curvature"
    symmetry: tuple[int, int] | None = None
    project_every: int = 50              # 0 disables projection
    t_end: float = math.inf
    max_steps: int = 200_000
    bending_factor: float = 1e4
    min_edge_fraction: float = 1e-3
    convergence_kosc: float = 1e-8
    velocity_tol: float = 1e-6           # max|v| L^3 below this counts as stationary
    K: float | None = None
    n: int | None = None
    sample_every: int = 20
    bp_area_every: int = 0               # in samples; 0 disables
    bp_area_h_rel: float = 1.0 / 400     # grid spacing relative to the diameter
    snapshot_every: int = 0              # in samples; 0 disables
    max_halvings: int = 20

    def validate(self):
        if self.M is not None and self.M < 16:
            raise ValueError("M must be at least 16")
        for name in ("disp_fraction", "safety_kappa", "bending_factor", "min_edge_fraction",
                     "convergence_kosc", "velocity_tol", "t_end", "dt_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.redistribution not in _REDISTRIBUTION:
            raise ValueError(f"unknown redistribution policy {self.redistribution!r}")
        if self.symmetry is not None:
            m, i = self.symmetry
            if self.M is not None and self.M % m:
                raise ValueError(f"M={self.M} not divisible by m={m}")
            if not 1 <= i <= m:
                raise ValueError("symmetry index must lie in 1..m")


@dataclass
class FlowState:
    t: float
    curve: DiscreteCurve
    metrics: object

    @classmethod
    def from_curve(cls, curve, t=0.0):
        return cls(t=t, curve=curve, metrics=metrics(curve))


SERIES_COLUMNS = ("t", "L", "A", "N", "kosc", "bending", "min_kappa", "max_kappa", "sym_defect", "bp_area")


@dataclass
class FlowReport:
    series: dict
    verdict: str
    final: DiscreteCurve
    t_final: float
    steps: int
    rejected: int
    T_M_estimate: float | None
    T_W_measured: float
    T_W_bound: float
    wheeler_bound_ok: bool
    kosc_2K_ok: bool | None
    length_bound_ok: bool | None
    length_monotone_ok: bool
    rotation_ok: bool
    identity_ok: bool
    max_area_drift: float            # relative to |A0|, or absolute when A0 is roundoff-zero
    area_correction: float           # summed |normal offset| applied by the area constraint
    max_sym_defect: float | None
    limit_radius: float | None
    measured_radius: float | None
    initial: dict
    gate: GateResult | None = None
    bp_area_error: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    def column(self, name):
        return np.asarray(self.series[name], dtype=float)

    def summary(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "verdict", "t_final", "steps", "rejected", "T_M_estimate", "T_W_measured", "T_W_bound",
            "wheeler_bound_ok", "kosc_2K_ok", "length_bound_ok", "length_monotone_ok", "rotation_ok",
            "identity_ok", "max_area_drift", "area_correction", "max_sym_defect", "limit_radius", "measured_radius")}
        out["initial"] = self.initial
        out["gate"] = None if self.gate is None else vars(self.gate)
        out["violations"] = self.violations[:20]
        return out


class StepRejected(RuntimeError):
    pass


def _choose_dt(g: _Geom, cfg: FlowConfig, speed=None, dt_prev=None):
    if cfg.dt is not None:
        return cfg.dt
    if speed is None:
        speed = float(np.max(np.abs(_normal_speed(g))))
    kmax = float(np.max(np.abs(g.kappa)))
    dt = cfg.dt_max
    if speed > 0:
        dt = min(dt, cfg.disp_fraction * float(g.h.min()) / speed)
    if kmax > 0:
        dt = min(dt, cfg.safety_kappa / kmax**4)
    if dt_prev is not None:
        dt = min(dt, cfg.dt_growth * dt_prev)
    return dt


def _stationary(X, g: _Geom, tol):
    """max|v| L^3 below ``tol``, or below the roundoff floor of the fourth-order stencil.

    Coordinate roundoff eps*R perturbs kappa by about eps*R/h^2 and the speed
    by eps*R/h^4, which for fine polygons exceeds any fixed dimensionless tol.
    """
    speed = float(np.max(np.abs(_normal_speed(g))))
    L = float(g.h.sum())
    R = float(np.max(np.hypot(*(X - X.mean(axis=0)).T)))
    floor = 1e3 * np.finfo(float).eps * R / float(g.h.min()) ** 4
    return speed * L**3 < tol or speed < floor


def _polygon_area(X):
    return 0.5 * float(np.sum(cross2(X, np.roll(X, -1, axis=0))))


def _restore_area(X, target):
    """Uniform normal offset that brings the polygon area back to ``target``.

    dA/dX_j . nu_j = -W_j, so an offset c along nu changes the area by
    -c sum(W) to first order; two Newton passes reach roundoff.
    """
    shift = 0.0
    for _ in range(2):
        g = _geometry(X)
        c = (_polygon_area(X) - target) / float(g.W.sum())
        X = X + c * g.nu
        shift += abs(c)
    return X, shift


def _advance(X, g: _Geom, dt, cfg: FlowConfig):
    v = _normal_speed(g)
    w = _implicit_speed(g, v, dt)
    if not np.all(np.isfinite(w)):
        raise StepRejected("linear solve produced non-finite values")
    disp = dt * float(np.max(np.abs(w)))
    if disp > 0.5 * float(g.h.min()):
        raise StepRejected(f"displacement {disp:.3g} exceeds half the minimum edge")
    Xn = X + dt * w[:, None] * g.nu
    try:
        gn = _geometry(Xn)
    except CurveError as exc:
        raise StepRejected(str(exc)) from exc
    if gn.h.min() < 0.5 * g.h.min() and gn.h.min() < cfg.min_edge_fraction * gn.h.sum() / len(gn.h):
        raise StepRejected("edge collapse")
    return Xn, w


def step(state: FlowState, config: FlowConfig, dt: float | None = None) -> FlowState:
    """One linearly implicit step, with dt halving on rejection."""
    X = np.array(state.curve.points)
    g = _geometry(X)
    dt = _choose_dt(g, config) if dt is None else dt
    for _ in range(config.max_halvings + 1):
        try:
            Xn, _ = _advance(X, g, dt, config)
            break
        except StepRejected:
            dt *= 0.5
    else:
        raise StepRejected(f"step rejected after {config.max_halvings} halvings")
    if _REDISTRIBUTION[config.redistribution] is not None:
        Xn = redistribute(Xn, _REDISTRIBUTION[config.redistribution])
    if config.area_constraint:
        Xn, _ = _restore_area(Xn, _polygon_area(X))
    return FlowState.from_curve(state.curve.with_points(Xn), t=state.t + dt)


# -- driver ----------------------------------------------------------------------

def _sample(X, g: _Geom, t, sym, n_expected):
    L = float(g.h.sum())
    turn = float(g.psi.sum()) / (2 * math.pi)
    A = 0.5 * float(np.sum(cross2(X, np.roll(X, -1, axis=0))))
    bending = float(np.sum(g.kappa**2 * g.ds))
    kbar = float(g.psi.sum()) / L
    kosc = L * float(np.sum((g.kappa - kbar) ** 2 * g.ds))
    row = {
        "t": t, "L": L, "A": A, "N": round(turn), "kosc": kosc, "bending": bending,
        "min_kappa": float(g.kappa.min()), "max_kappa": float(np.abs(g.kappa).max()),
        "sym_defect": math.nan, "bp_area": math.nan,
    }
    if sym is not None:
        row["sym_defect"] = symmetry_defect(DiscreteCurve(X), *sym)
    return row, turn


def run(init: DiscreteCurve, config: FlowConfig | None = None) -> FlowReport:
    """Integrate until convergence, a singularity, ``t_end`` or ``max_steps``."""
    cfg = config or FlowConfig()
    cfg.validate()
    if not init.closed:
        raise CurveError("initial curve must be closed")
    if cfg.M is not None and cfg.M != len(init):
        from .curve import reparameterize
        init = reparameterize(init, cfg.M)
    sym = tuple(cfg.symmetry) if cfg.symmetry is not None else None
    if sym is not None and len(init) % sym[0]:
        raise ValueError(f"vertex count {len(init)} not divisible by m={sym[0]}")

    m0 = metrics(init)
    n = cfg.n if cfg.n is not None else m0.rotation_number
    L0, A0, K0 = m0.length, m0.signed_area, m0.k_osc
    I0 = m0.iso_ratio
    X = np.array(init.points)
    g = _geometry(X)
    B0 = float(np.sum(g.kappa**2 * g.ds))
    series = {c: [] for c in SERIES_COLUMNS}
    violations = []
    bp_err = []
    snapshots = []

    wheeler_window = n >= 1
    wheeler_ok = True
    kosc_2K_ok = None if cfg.K is None else True
    use_length_bound = sym is not None and 1 <= n <= sym[0] and A0 > 0
    length_bound_ok = True if use_length_bound else None
    length_ok = rotation_ok = identity_ok = True
    max_drift = 0.0
    area_shift = 0.0
    max_sym = None
    nonconvex_time = 0.0
    # zero-area curves (figure-eights) are measured in absolute terms
    area_scale = abs(A0) if abs(A0) > 1e-12 * L0**2 else 1.0
    L_prev = L0
    t = 0.0
    steps = rejected = 0
    verdict = None
    T_M = None
    n_samples = 0

    def record(X, g, t):
        nonlocal n_samples, wheeler_window, wheeler_ok, kosc_2K_ok, length_bound_ok
        nonlocal rotation_ok, identity_ok, max_sym
        row, turn = _sample(X, g, t, sym, n)
        if abs(turn - m0.rotation_number) > 0.01:
            rotation_ok = False
            violations.append(("rotation", t, turn))
        ident = row["L"] * row["bending"] - 4 * math.pi**2 * turn**2
        if abs(row["kosc"] - ident) > 1e-9 * max(1.0, row["L"] * row["bending"]):
            identity_ok = False
            violations.append(("identity", t, row["kosc"] - ident))
        if wheeler_window and row["kosc"] > 2 * kstar(n):
            wheeler_window = False
        if wheeler_window:
            bound = K0 + 8 * math.pi**2 * n * n * math.log(L0 / row["L"])
            if row["kosc"] > bound + 1e-6:
                wheeler_ok = False
                violations.append(("wheeler", t, row["kosc"] - bound))
        if cfg.K is not None and row["kosc"] > 2 * cfg.K + 1e-6:
            kosc_2K_ok = False
            violations.append(("kosc_2K", t, row["kosc"]))
        if use_length_bound and L0 / row["L"] > math.sqrt(I0 / n) + 1e-6:
            length_bound_ok = False
            violations.append(("length_bound", t, L0 / row["L"]))
        if sym is not None:
            max_sym = row["sym_defect"] if max_sym is None else max(max_sym, row["sym_defect"])
        if cfg.bp_area_every and n_samples % cfg.bp_area_every == 0:
            c = DiscreteCurve(X)
            h = cfg.bp_area_h_rel * float(np.hypot(*(X.max(axis=0) - X.min(axis=0))))
            wf = winding_field(c, h)
            row["bp_area"] = wf.bp_area
            bp_err.append(wf.bp_area_error)
        if cfg.snapshot_every and n_samples % cfg.snapshot_every == 0:
            snapshots.append((t, X.copy()))
        for k in SERIES_COLUMNS:
            series[k].append(row[k])
        n_samples += 1
        return row

    row = record(X, g, t)
    gate = None
    if cfg.K is not None and n >= 1:
        gate = smallness_gate(init, n, cfg.K)
    if row["kosc"] < cfg.convergence_kosc and _stationary(X, g, cfg.velocity_tol):
        verdict = "converged"
    dt_prev = None
    speed = None
    while verdict is None:
        if steps >= cfg.max_steps or t >= cfg.t_end:
            verdict = "t_end reached"
            break
        dt = min(_choose_dt(g, cfg, speed, dt_prev), cfg.t_end - t)
        for _ in range(cfg.max_halvings + 1):
            try:
                Xn, w = _advance(X, g, dt, cfg)
                break
            except StepRejected as exc:
                rejected += 1
                logger.debug("t=%.6g: %s; halving dt", t, exc)
                dt *= 0.5
        else:
            verdict = "singular"
            T_M = t
            break
        if float(g.kappa.min()) <= 0.0:
            nonconvex_time += dt
        t_new = t + dt
        if t_new <= t:
            verdict = "singular"
            T_M = t
            violations.append(("time_underflow", t, dt))
            break
        t = t_new
        steps += 1
        dt_prev = dt
        speed = float(np.max(np.abs(w)))
        if _REDISTRIBUTION[cfg.redistribution] is not None:
            Xn = redistribute(Xn, _REDISTRIBUTION[cfg.redistribution])
        if sym is not None and cfg.project_every and steps % cfg.project_every == 0:
            Xn = symmetrize(DiscreteCurve(Xn), *sym).points.copy()
        if cfg.area_constraint:
            try:
                Xn, shift = _restore_area(Xn, A0)
            except CurveError as exc:
                verdict = "singular"
                T_M = t
                violations.append(("area_restore", t, str(exc)))
                break
            area_shift += shift
        try:
            gn = _geometry(Xn)
        except CurveError as exc:
            verdict = "singular"
            T_M = t
            violations.append(("degenerate", t, str(exc)))
            break
        X, g = Xn, gn
        L = float(g.h.sum())
        if L > L_prev + 1e-10 * L0:
            length_ok = False
            violations.append(("length_increase", t, L - L_prev))
        L_prev = L
        max_drift = max(max_drift, abs(_polygon_area(X) - A0) / area_scale)
        bending = float(np.sum(g.kappa**2 * g.ds))
        if bending > cfg.bending_factor * B0:
            row = record(X, g, t)
            verdict = "singular"
            T_M = t
            break
        if steps % cfg.sample_every == 0:
            row = record(X, g, t)
            if row["kosc"] < cfg.convergence_kosc:
                if _stationary(X, g, cfg.velocity_tol):
                    verdict = "converged"
                    break
    if series["t"][-1] != t:
        record(X, g, t)

    final = init.with_points(X)
    limit_radius = measured_radius = None
    if verdict == "converged" and n != 0:
        A = series["A"][-1]
        limit_radius = math.sqrt(abs(A) / (abs(n) * math.pi))
        measured_radius = float(np.mean(np.hypot(*(X - X.mean(axis=0)).T)))
    T_W_bound = waiting_time_bound(L0, A0, n)
    return FlowReport(
        series=series,
        verdict=verdict,
        final=final,
        t_final=t,
        steps=steps,
        rejected=rejected,
        T_M_estimate=T_M,
        T_W_measured=nonconvex_time,
        T_W_bound=T_W_bound,
        wheeler_bound_ok=wheeler_ok,
        kosc_2K_ok=kosc_2K_ok,
        length_bound_ok=length_bound_ok,
        length_monotone_ok=length_ok,
        rotation_ok=rotation_ok,
        identity_ok=identity_ok,
        max_area_drift=max_drift,
        area_correction=area_shift,
        max_sym_defect=max_sym,
        limit_radius=limit_radius,
        measured_radius=measured_radius,
        gate=gate,
        initial={"L": L0, "A": A0, "N": m0.rotation_number, "I": I0, "kosc": K0, "bending": B0, "n": n},
        bp_area_error=bp_err,
        snapshots=snapshots,
        violations=violations,
    )


def waiting_time_bound(L0: float, A0: float, n: int) -> float:
    """(L0^4 - (4 pi n A0)^2) / (16 pi^2 n^2); infinite when n = 0."""
    if n == 0:
        return math.inf
    return (L0**4 - (4 * math.pi * n * A0) ** 2) / (16 * math.pi**2 * n * n)


def waiting_time(report: FlowReport, spec: SymmetrySpec | None = None) -> tuple[float, float]:
    """Measured non-convex time and its upper bound.

    With a symmetry spec the bound uses its rotation number n; otherwise the
    rotation number of the initial curve (the general estimate).
    """
    n = spec.n if spec is not None else report.initial["N"]
    return report.T_W_measured, waiting_time_bound(report.initial["L"], report.initial["A"], n)
