"""Curve files (CSV + JSON sidecar), series CSV, JSON reports and SVG frames."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .curve import CurveError, DiscreteCurve


class CurveParseError(CurveError):
    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_curve(path, curve: DiscreteCurve, symmetry: dict | None = None) -> Path:
    """Write ``x,y`` rows (repr floats, so values round-trip exactly) plus a JSON sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write("x,y\n")
        for x, y in curve.points:
            fh.write(f"{float(x)!r},{float(y)!r}\n")
    meta = {"closed": curve.closed, "name": curve.name, "vertices": len(curve)}
    if symmetry is not None:
        meta["symmetry"] = symmetry
    write_json(sidecar_path(path), meta)
    return path


def read_curve(path, closed: bool | None = None):
    """Parse a curve CSV; returns ``(curve, meta)``.

    The header row ``x,y`` is optional. Errors name the offending line.
    Consecutive duplicate vertices are rejected, including the wrap-around
    pair of a closed curve.
    """
    path = Path(path)
    meta = {}
    side = sidecar_path(path)
    if side.exists():
        try:
            meta = json.loads(side.read_text())
        except json.JSONDecodeError as exc:
            raise CurveParseError(side, exc.lineno, f"bad sidecar JSON: {exc.msg}") from None
    if closed is None:
        closed = bool(meta.get("closed", True))
    rows, lines = [], []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or all(not f.strip() for f in rec) or rec[0].lstrip().startswith("#"):
                continue
            if lineno == 1 and rec[0].strip().lower() == "x":
                continue
            if len(rec) != 2:
                raise CurveParseError(path, lineno, f"expected 2 fields, got {len(rec)}")
            try:
                x, y = float(rec[0]), float(rec[1])
            except ValueError:
                raise CurveParseError(path, lineno, f"not a number: {','.join(rec)!r}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise CurveParseError(path, lineno, "non-finite coordinate")
            if rows and rows[-1] == (x, y):
                raise CurveParseError(path, lineno, f"duplicate consecutive vertex (same as line {lines[-1]})")
            rows.append((x, y))
            lines.append(lineno)
    if closed and len(rows) > 1 and rows[0] == rows[-1]:
        raise CurveParseError(path, lines[-1], f"last vertex repeats the first (line {lines[0]}); "
                                               "closed curves are stored without the closing vertex")
    try:
        curve = DiscreteCurve(np.array(rows, dtype=float).reshape(-1, 2), closed=closed,
                              name=meta.get("name", path.stem))
    except CurveError as exc:
        raise CurveParseError(path, 0, str(exc)) from None
    return curve, meta


def _jsonable(obj):
    if isinstance(obj, float) or isinstance(obj, np.floating):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path, data) -> Path:
    """JSON with non-finite floats written as the strings "inf", "-inf", "nan"."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def write_table(path, columns, rows) -> Path:
    """CSV with a header; floats written with repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c, "")) for c in columns])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_series(path, series: dict) -> Path:
    cols = list(series)
    n = len(series[cols[0]]) if cols else 0
    return write_table(path, cols, ({c: series[c][k] for c in cols} for k in range(n)))


def viewbox(points, inflate: float = 0.2):
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    size = np.maximum(hi - lo, 1e-12)
    pad = 0.5 * inflate * size
    lo = lo - pad
    size = size + 2 * pad
    return float(lo[0]), float(lo[1]), float(size[0]), float(size[1])


def svg_frame(points, box, label: str = "") -> str:
    x0, y0, w, h = box
    # flip y so the picture has the usual orientation
    pts = " ".join(f"{x:.6g},{2 * y0 + h - y:.6g}" for x, y in points)
    stroke = max(w, h) / 400
    text = ""
    if label:
        text = (f'<text x="{x0 + 0.02 * w:.6g}" y="{y0 + 0.06 * h:.6g}" '
                f'font-size="{0.04 * h:.6g}">{label}</text>')
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6g} {y0:.6g} {w:.6g} {h:.6g}">'
        f'<polygon points="{pts}" fill="none" stroke="black" stroke-width="{stroke:.3g}"/>'
        f"{text}</svg>\n"
    )


def write_frames(directory, snapshots, box) -> list[Path]:
    """One SVG per ``(t, points)`` snapshot, all sharing the viewBox ``box``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, (t, pts) in enumerate(snapshots):
        p = directory / f"frame_{k:04d}.svg"
        p.write_text(svg_frame(pts, box, label=f"t = {t:.6g}"))
        paths.append(p)
    return paths
