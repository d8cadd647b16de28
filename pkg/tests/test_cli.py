import csv
import json
import re

import numpy as np
import pytest

from curveflow import io
from curveflow.cli import load_config, main, parse_override, set_dotted
from curveflow.curve import DiscreteCurve
from curveflow.presets import perturbed_circle
from curveflow.symmetry import covered_circle


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_curve_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    c = perturbed_circle(2, 4, 0.05, M=64)
    c = c.with_points(c.points + 1e-7 * rng.standard_normal(c.points.shape))
    io.write_curve(tmp_path / "c.csv", c, {"n": 2, "m": 4, "i": 2})
    back, meta = io.read_curve(tmp_path / "c.csv")
    assert np.array_equal(back.points, c.points)
    assert back.closed and meta["symmetry"] == {"n": 2, "m": 4, "i": 2}


def test_open_curve_round_trip(tmp_path):
    c = DiscreteCurve([[0.1, 0.2], [1 / 3, 0.5], [2.0, -1e-300]], closed=False)
    io.write_curve(tmp_path / "o.csv", c)
    back, _ = io.read_curve(tmp_path / "o.csv")
    assert not back.closed and np.array_equal(back.points, c.points)


@pytest.mark.parametrize("body,line,fragment", [
    ("x,y\n0,0\n1,0\n1,0\n0,1\n", 4, "duplicate"),
    ("x,y\n0,0\n1,zero\n0,1\n", 3, "not a number"),
    ("0,0\n1,0,5\n0,1\n", 2, "expected 2 fields"),
    ("x,y\n0,0\n1,0\n0,1\n0,0\n", 5, "repeats the first"),
])
def test_parse_errors_name_the_line(tmp_path, body, line, fragment):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(io.CurveParseError) as info:
        io.read_curve(p)
    assert info.value.line == line and fragment in str(info.value)


def test_json_writes_non_finite_as_strings(tmp_path):
    io.write_json(tmp_path / "a.json", {"I": float("inf"), "x": np.float64(1.5), "n": np.int64(3)})
    d = json.loads((tmp_path / "a.json").read_text())
    assert d == {"I": "inf", "x": 1.5, "n": 3}


def test_overrides():
    assert parse_override("flow.dt=0.001") == ("flow.dt", 0.001)
    assert parse_override("input=limacon") == ("input", "limacon")
    cfg = {}
    set_dotted(cfg, "a.b.c", [1, 2])
    assert cfg == {"a": {"b": {"c": [1, 2]}}}
    cfg = load_config(None, ["problem.theta=1.0", 'input={"preset": "ellipse"}'])
    assert cfg["problem"]["theta"] == 1.0 and cfg["problem"]["area_target"] == 1.0


def test_metrics_command(tmp_path):
    rc = main(["metrics", "--set", 'input={"generator": "covered_circle", "params": {"n": 3, "r": 1, "M": 768}}',
               "--out", str(tmp_path)])
    assert rc == 0
    d = json.loads((tmp_path / "metrics.json").read_text())
    assert d["N"] == 3 and abs(d["I"] - 3) < 1e-3


def test_metrics_of_figure_eight_reports_infinite_ratio(tmp_path):
    assert main(["metrics", "--set", "input=figure-eight", "--set", "winding_field={\"h\": 0.02}",
                 "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "metrics.json").read_text())
    assert d["I"] == "inf" and abs(d["A"]) < 1e-12
    assert len(read_rows(tmp_path / "winding_field.csv")) > 100


def test_malformed_curve_exits_with_input_error(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("x,y\n0,0\n1,0\n1,0\n0,1\n")
    assert main(["metrics", "--set", f"input={p}", "--out", str(tmp_path / "o")]) == 2
    assert re.search(r"bad\.csv:4: duplicate", capsys.readouterr().err)


def test_minimize_rejects_zero_angle(tmp_path):
    assert main(["minimize", "--set", "problem.theta=0", "--out", str(tmp_path)]) == 2


def test_minimize_command(tmp_path):
    assert main(["minimize", "--set", "problem.theta=1.5707963267948966", "--set", "minimize.M=256",
                 "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "report.json").read_text())
    assert abs(d["L"] - d["length_exact"]) < 1e-3
    assert d["margin"] >= 0


def test_numerical_failure_exit_code(tmp_path):
    assert main(["minimize", "--set", "problem.theta=3.0", "--set", "minimize.max_iters=1",
                 "--set", "minimize.windings=[1]", "--out", str(tmp_path)]) == 3


def test_unknown_flow_option_is_input_error(tmp_path):
    assert main(["flow", "--set", "input=ellipse", "--set", "flow.bogus=1", "--out", str(tmp_path)]) == 2


def test_flow_outputs_are_deterministic(tmp_path):
    args = ["flow", "--set", 'input={"preset": "stable-nm", "params": {"M": 256}}', "--set", "frames=3"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("series.csv", "verdict.json", "final.csv", "final.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    frames = sorted((tmp_path / "a" / "frames").glob("*.svg"))
    assert frames
    for f in frames:
        pts = re.search(r'points="([^"]*)"', f.read_text()).group(1).split()
        assert len(pts) == 256
    boxes = {re.search(r'viewBox="([^"]*)"', f.read_text()).group(1) for f in frames}
    assert len(boxes) == 1
    verdict = json.loads((tmp_path / "a" / "verdict.json").read_text())
    assert verdict["verdict"] == "converged"


def test_verify_iso_command(tmp_path):
    io.write_curve(tmp_path / "c.csv", covered_circle(2, 1.0, 512), {"n": 2, "m": 4})
    assert main(["verify-iso", "--set", f"input={tmp_path / 'c.csv'}", "--out", str(tmp_path / "o")]) == 0
    d = json.loads((tmp_path / "o" / "verify_iso.json").read_text())
    assert d["equality"] is True
    # no symmetry anywhere: input error
    io.write_curve(tmp_path / "d.csv", covered_circle(2, 1.0, 512))
    assert main(["verify-iso", "--set", f"input={tmp_path / 'd.csv'}", "--out", str(tmp_path / "p")]) == 2


def test_sweep_rows_are_ordered_and_failures_recorded(tmp_path):
    cfg = {
        "input": {"generator": "perturbed_circle", "params": {"n": 1, "m": 1, "amplitude": 0.0, "M": 120}},
        "sweep": {"command": "flow", "grid": {"input.params.n": [1, 2, 3], "input.params.amplitude": [0, 0.02]},
                  "tie": {"input.params.m": "input.params.n"}, "workers": 2},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "sweep.csv")
    assert [int(r["index"]) for r in rows] == list(range(6))
    assert all(r["status"] == "ok" and r["verdict"] == "converged" for r in rows)
    assert all(r["steps"] == "0" for r in rows if float(r["input.params.amplitude"]) == 0)

    # an impossible cell (M not divisible by m) fails alone
    cfg["sweep"]["grid"] = {"input.params.n": [1, 7]}
    (tmp_path / "cfg2.json").write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(tmp_path / "cfg2.json"), "--out", str(tmp_path / "p")]) == 0
    rows = read_rows(tmp_path / "p" / "sweep.csv")
    assert [r["status"] for r in rows] == ["ok", "failed"]
    assert "not divisible" in rows[1]["error"]


def test_metrics_sweep_over_loop_radius(tmp_path):
    cfg = {
        "input": {"generator": "vanishing_loop_curve", "params": {"n": 4, "m": 2, "loop_radius": 0.1}},
        "sweep": {"command": "metrics", "grid": {"input.params.loop_radius": [0.1, 0.01, 0.001]}, "workers": 1},
    }
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["sweep", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")]) == 0
    I = [float(r["I"]) for r in read_rows(tmp_path / "o" / "sweep.csv")]
    assert I[0] > I[1] > I[2] > 2
