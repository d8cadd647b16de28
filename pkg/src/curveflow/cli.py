"""Command-line experiment runner.

    curveflow <command> --config <file> [--set key=value]... --out <dir>

Commands: metrics, flow, minimize, verify-iso, sweep. Exit status is 0 on
success, 2 for bad input and 3 for numerical failure.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import io
from .curve import metrics as curve_metrics
from .flow import FlowConfig, StepRejected, kstar, run, waiting_time
from .isomin import (ConvergenceError, FreeBoundaryProblem, MinimizeOptions, solve_free_boundary,
                     verify_sector_inequality)
from .presets import (PRESETS, ellipse, figure_eight, get_preset, limacon, perturbed_circle)
from .symmetry import SymmetrySpec, covered_circle, vanishing_loop_curve, verify_symmetric_isoperimetric
from .winding import winding_field

logger = logging.getLogger("curveflow")

COMMANDS = ("metrics", "flow", "minimize", "verify-iso", "sweep")

GENERATORS = {
    "covered_circle": covered_circle,
    "vanishing_loop_curve": vanishing_loop_curve,
    "ellipse": ellipse,
    "limacon": limacon,
    "figure_eight": figure_eight,
    "perturbed_circle": perturbed_circle,
}

DEFAULTS = {
    "input": None,
    "symmetry": None,
    "flow": {},
    "frames": 0,
    "winding_field": None,
    "problem": {"theta": math.pi, "area_target": 1.0},
    "minimize": {"M": 1024, "windings": [1, 2, 3], "perturbation": 0.02, "tol": 1e-8, "max_iters": 200},
    "sweep": None,
    "seed": 0,
}


class InputError(ValueError):
    pass


# -- configuration ----------------------------------------------------------------

def _merge(base, extra):
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_dotted(cfg: dict, key: str, value):
    parts = key.split(".")
    node = cfg
    for p in parts[:-1]:
        if node.get(p) is None:
            node[p] = {}
        node = node[p]
        if not isinstance(node, dict):
            raise InputError(f"cannot set {key!r}: {p!r} is not a section")
    node[parts[-1]] = value


def get_dotted(cfg: dict, key: str):
    node = cfg
    for p in key.split("."):
        if not isinstance(node, dict) or p not in node:
            raise InputError(f"config has no key {key!r}")
        node = node[p]
    return node


def parse_override(text: str):
    if "=" not in text:
        raise InputError(f"--set expects key=value, got {text!r}")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config(path, overrides=()) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from None
        if not isinstance(user, dict):
            raise InputError(f"{path}: top level must be a JSON object")
        cfg = _merge(cfg, user)
    for text in overrides:
        key, value = parse_override(text)
        set_dotted(cfg, key, value)
    return cfg


def load_input(cfg: dict):
    """Curve, symmetry spec (or None) and preset (or None) described by ``cfg['input']``."""
    spec = cfg.get("input")
    if spec is None:
        raise InputError("config needs an 'input' section (file, preset or generator)")
    if isinstance(spec, str):
        spec = {"preset": spec} if spec in PRESETS else {"file": spec}
    params = dict(spec.get("params") or {})
    preset = None
    symmetry = None
    if "file" in spec:
        curve, meta = io.read_curve(spec["file"])
        if meta.get("symmetry"):
            symmetry = SymmetrySpec.from_dict(meta["symmetry"])
    elif "preset" in spec:
        preset = get_preset(spec["preset"])
        curve = preset.curve(**params)
        symmetry = preset.symmetry
        if preset.symmetry is not None and ("n" in params or "m" in params):
            symmetry = SymmetrySpec(int(params.get("n", preset.symmetry.n)), int(params.get("m", preset.symmetry.m)))
    elif "generator" in spec:
        try:
            gen = GENERATORS[spec["generator"]]
        except KeyError:
            raise InputError(f"unknown generator {spec['generator']!r}; choose from {sorted(GENERATORS)}") from None
        try:
            curve = gen(**params)
        except TypeError as exc:
            raise InputError(f"bad generator parameters: {exc}") from None
        if "n" in params and "m" in params:
            symmetry = SymmetrySpec(int(params["n"]), int(params["m"]))
    else:
        raise InputError("input needs one of 'file', 'preset', 'generator'")
    if cfg.get("symmetry"):
        symmetry = SymmetrySpec.from_dict(cfg["symmetry"])
    return curve, symmetry, preset


def flow_config(cfg: dict, preset, symmetry) -> FlowConfig:
    opts = dict(cfg.get("flow") or {})
    known = {f.name for f in fields(FlowConfig)}
    unknown = set(opts) - known
    if unknown:
        raise InputError(f"unknown flow option(s): {sorted(unknown)}")
    if opts.get("symmetry") is not None:
        opts["symmetry"] = tuple(opts["symmetry"])
    if cfg.get("frames"):
        opts.setdefault("snapshot_every", 1)
    if preset is not None:
        if symmetry is not None and symmetry != preset.symmetry:
            opts.setdefault("symmetry", (symmetry.m, symmetry.i))
            opts.setdefault("n", symmetry.n)
        fc = preset.flow_config(**opts)
    else:
        if symmetry is not None:
            opts.setdefault("symmetry", (symmetry.m, symmetry.i))
            opts.setdefault("n", symmetry.n)
        if opts.get("K") == "kstar":
            opts["K"] = kstar(opts.get("n") or 1)
        fc = FlowConfig(**opts)
    fc.validate()
    return fc


# -- commands -----------------------------------------------------------------------

def metrics_payload(curve, symmetry):
    m = curve_metrics(curve)
    out = m.as_dict()
    n = m.rotation_number
    if n >= 1:
        ks = kstar(n)
        out["kstar"] = ks
        out["kstar_kosc_margin"] = ks - m.k_osc
        out["kstar_iso_margin"] = math.exp(ks / (8 * n * n * math.pi**2)) - m.iso_ratio / n
    if symmetry is not None:
        try:
            out["symmetric_isoperimetric"] = verify_symmetric_isoperimetric(curve, symmetry)
        except ValueError as exc:
            out["symmetric_isoperimetric"] = {"error": str(exc)}
    return out


def cmd_metrics(cfg, out: Path):
    curve, symmetry, _ = load_input(cfg)
    payload = metrics_payload(curve, symmetry)
    io.write_curve(out / "curve.csv", curve, None if symmetry is None else symmetry.as_dict())
    wf_cfg = cfg.get("winding_field")
    if wf_cfg:
        h = wf_cfg.get("h") if isinstance(wf_cfg, dict) else None
        if h is None:
            h = float(np.ptp(curve.points, axis=0).max()) / 200
        wf = winding_field(curve, float(h))
        payload["bp_area"] = wf.bp_area
        payload["bp_area_error"] = wf.bp_area_error
        X, Y = np.meshgrid(wf.xs, wf.ys)
        rows = ({"x": x, "y": y, "w": int(w), "indeterminate": int(d)}
                for x, y, w, d in zip(X.ravel(), Y.ravel(), wf.values.ravel(), wf.indeterminate.ravel()))
        io.write_table(out / "winding_field.csv", ["x", "y", "w", "indeterminate"], rows)
    io.write_json(out / "metrics.json", payload)
    return payload


def cmd_flow(cfg, out: Path):
    curve, symmetry, preset = load_input(cfg)
    fc = flow_config(cfg, preset, symmetry)
    report = run(curve, fc)
    summary = report.summary()
    if symmetry is not None:
        summary["T_W_bound_symmetric"] = waiting_time(report, symmetry)[1]
    io.write_series(out / "series.csv", report.series)
    io.write_json(out / "verdict.json", summary)
    io.write_curve(out / "final.csv", report.final, None if symmetry is None else symmetry.as_dict())
    frames = int(cfg.get("frames") or 0)
    if frames > 0 and report.snapshots:
        box = io.viewbox(np.asarray(curve.points))
        snaps = report.snapshots
        pick = np.unique(np.linspace(0, len(snaps) - 1, min(frames, len(snaps))).round().astype(int))
        io.write_frames(out / "frames", [snaps[k] for k in pick], box)
    return summary


def cmd_minimize(cfg, out: Path):
    prob = cfg.get("problem") or {}
    try:
        problem = FreeBoundaryProblem(float(prob["theta"]), float(prob.get("area_target", 1.0)))
    except KeyError:
        raise InputError("problem.theta is required") from None
    mc = cfg.get("minimize") or {}
    opts = MinimizeOptions(tol=float(mc.get("tol", 1e-8)), max_iters=int(mc.get("max_iters", 200)))
    curve, rep = solve_free_boundary(problem, M=int(mc.get("M", 1024)), windings=tuple(mc.get("windings", (1, 2, 3))),
                                     perturbation=float(mc.get("perturbation", 0.02)),
                                     seed=int(cfg.get("seed", 0)), opts=opts)
    payload = verify_sector_inequality(curve, problem)
    payload.update(multiplier=rep.multiplier, residual=rep.residual, iters=rep.iters,
                   length_exact=math.sqrt(2 * problem.theta * problem.area_target))
    io.write_curve(out / "minimizer.csv", curve)
    io.write_json(out / "report.json", payload)
    return payload


def cmd_verify_iso(cfg, out: Path):
    curve, symmetry, _ = load_input(cfg)
    if symmetry is None:
        raise InputError("verify-iso needs a symmetry (config 'symmetry': {n, m}, or a sidecar)")
    payload = verify_symmetric_isoperimetric(curve, symmetry)
    io.write_json(out / "verify_iso.json", payload)
    return payload


FLOW_ROW = ("verdict", "t_final", "steps", "max_area_drift", "wheeler_bound_ok", "kosc_2K_ok",
            "length_bound_ok", "T_W_measured", "T_W_bound", "limit_radius", "measured_radius")


def _sweep_cell(args):
    index, command, cell_cfg = args
    row = {"index": index, "status": "ok", "error": ""}
    try:
        if command == "metrics":
            curve, symmetry, _ = load_input(cell_cfg)
            m = curve_metrics(curve)
            row.update(m.as_dict())
            if symmetry is not None:
                row["margin"] = m.iso_ratio - symmetry.i
        elif command == "flow":
            curve, symmetry, preset = load_input(cell_cfg)
            rep = run(curve, flow_config(cell_cfg, preset, symmetry))
            s = rep.summary()
            row.update({k: s[k] for k in FLOW_ROW})
            row["gate_passed"] = None if rep.gate is None else rep.gate.passed
            row["kosc0"] = rep.initial["kosc"]
            row["kosc_final"] = rep.series["kosc"][-1]
        else:
            raise InputError(f"sweep command must be 'flow' or 'metrics', got {command!r}")
    except Exception as exc:  # a failed cell is recorded, never fatal
        row["status"] = "failed"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def sweep_cells(cfg):
    sw = cfg.get("sweep")
    if not sw or not sw.get("grid"):
        raise InputError("sweep needs 'sweep.grid' mapping dotted keys to value lists")
    grid = sw["grid"]
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise InputError(f"sweep.grid[{k!r}] must be a non-empty list")
    tie = sw.get("tie") or {}
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    cells = []
    for index, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        c = copy.deepcopy(base)
        for k, v in zip(keys, values):
            set_dotted(c, k, v)
        for target, source in tie.items():
            set_dotted(c, target, get_dotted(c, source))
        cells.append((index, dict(zip(keys, values)), c))
    return keys, cells


def cmd_sweep(cfg, out: Path):
    sw = cfg.get("sweep") or {}
    command = sw.get("command", "flow")
    keys, cells = sweep_cells(cfg)
    workers = int(sw.get("workers") or min(len(cells), os.cpu_count() or 1))
    tasks = [(i, command, c) for i, _, c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]
    rows = []
    for (index, params, _), res in zip(cells, results):
        rows.append({**params, **res})
    extra = []
    for r in rows:
        for k in r:
            if k not in keys and k not in ("index", "status", "error") and k not in extra:
                extra.append(k)
    columns = ["index", *keys, "status", "error", *extra]
    io.write_table(out / "sweep.csv", columns, rows)
    return rows


HANDLERS = {
    "metrics": cmd_metrics,
    "flow": cmd_flow,
    "minimize": cmd_minimize,
    "verify-iso": cmd_verify_iso,
    "sweep": cmd_sweep,
}


def build_parser():
    p = argparse.ArgumentParser(prog="curveflow", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry; dotted keys, JSON values (repeatable)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        cfg = load_config(args.config, args.overrides)
        out.mkdir(parents=True, exist_ok=True)
        HANDLERS[args.command](cfg, out)
    except (ConvergenceError, StepRejected, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"curveflow: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"curveflow: input error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
