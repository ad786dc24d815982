import csv
import json
import math

import pytest

from hollowopt.cli import run
from hollowopt.optimize import discretize_u0
from hollowopt.shapes import PLShape, load_shape, make_u0, save_shape


def _out(capsys):
    return json.loads(capsys.readouterr().out)


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


@pytest.fixture
def u0_file(tmp_path):
    p = tmp_path / "u0.json"
    save_shape(make_u0(), p)
    return str(p)


@pytest.fixture
def steep_file(tmp_path):
    p = tmp_path / "steep.json"
    save_shape(PLShape.v_shape(0.9), p)
    return str(p)


def test_check_exit_codes(capsys, u0_file, steep_file):
    assert run(["check", "--shape", u0_file, "--quiet"]) == 0
    assert _out(capsys)["admissible"] is True
    assert run(["check", "--shape", steep_file, "--quiet"]) == 1
    rep = _out(capsys)
    assert rep["admissible"] is False and rep["witnesses"]


def test_check_strong(capsys, tmp_path):
    p = tmp_path / "s.json"
    save_shape(discretize_u0(64).scaled(0.9), p)
    assert run(["check", "--shape", str(p), "--strong", "0.095", "--quiet"]) == 0
    assert run(["check", "--shape", str(p), "--strong", "-1", "--quiet"]) == 2


def test_usage_and_io_errors(tmp_path, capsys):
    assert run([]) == 2
    assert run(["resist", "--shape", str(tmp_path / "missing.json"), "--quiet"]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"kind": "pl"')
    assert run(["check", "--shape", str(bad), "--quiet"]) == 2
    assert "line 1" in capsys.readouterr().err
    assert run(["resist", "--shape", str(bad.with_name("x")), "--weight", "cubic", "--quiet"]) in (2, 3)


def test_resist_and_csv(capsys, u0_file, tmp_path):
    csv_path = tmp_path / "g.csv"
    assert run(["resist", "--shape", u0_file, "--weight", "radial:2", "--csv", str(csv_path),
                "--samples", "11", "--quiet"]) == 0
    res = _out(capsys)
    assert res["value"] == pytest.approx(4 * math.log(8 / 5) - math.pi + 4 * math.atan(0.5), abs=1e-9)
    rows = _rows(csv_path)
    assert rows[0] == ["x", "f", "g"] and len(rows) == 12


def test_config_echo(capsys, u0_file):
    run(["check", "--shape", u0_file, "--seed", "5"])
    err = capsys.readouterr().err
    assert json.loads(err.splitlines()[0])["config"]["seed"] == 5


def test_u0_csv_is_stable(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["u0", "--csv", str(a), "--points", "5", "--quiet"]) == 0
    assert run(["u0", "--csv", str(b), "--points", "5", "--quiet"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert _rows(a) == [
        ["x", "u0", "du0"],
        ["-1", "0", "-1"],
        ["-0.5", "-0.4375", "-0.75"],
        ["0", "-0.75", "0.5"],  # right derivative at the kink
        ["0.5", "-0.4375", "0.75"],
        ["1", "0", "1"],
    ]


def test_u0_out_round_trip(tmp_path, capsys):
    p = tmp_path / "u0.json"
    assert run(["u0", "--out", str(p), "--quiet"]) == 0
    assert load_shape(p).pieces == make_u0().pieces


def test_transform_writes_trace_and_shape(tmp_path, capsys):
    src = tmp_path / "in.json"
    save_shape(discretize_u0(16), src)
    out, trace = tmp_path / "out.json", tmp_path / "trace.csv"
    assert run(["transform", "--shape", str(src), "--out", str(out), "--trace", str(trace), "--quiet"]) == 0
    rows = _rows(trace)
    assert rows[0] == ["stage", "F", "sic_margin", "eps"]
    assert [r[0] for r in rows[1:]] == ["input", "strongify", "pl", "convex", "parabolic"]
    assert load_shape(out) is not None
    assert run(["transform", "--shape", str(src), "--pipeline", "smooth", "--quiet"]) == 2


def test_transform_failure_exit_code(steep_file, capsys):
    assert run(["transform", "--shape", steep_file, "--pipeline", "convex", "--quiet"]) == 1


def test_flow_dump(tmp_path, capsys, u0_file, steep_file):
    rays = tmp_path / "rays.csv"
    assert run(["flow", "--shape", u0_file, "-n", "2000", "--dump-rays", str(rays),
                "--dump-limit", "50", "--quiet"]) == 0
    rows = _rows(rays)
    assert rows[0][0] == "entry_x" and len(rows) == 51
    assert run(["flow", "--shape", steep_file, "-n", "2000", "--quiet"]) == 1


def test_optimize_outputs(tmp_path, capsys):
    out, hist = tmp_path / "best.json", tmp_path / "h.csv"
    assert run(["optimize", "-n", "8", "--budget", "50", "--seed", "3", "--out", str(out),
                "--history", str(hist), "--quiet"]) == 0
    summary = _out(capsys)
    assert load_shape(out).n_edges == 8
    assert _rows(hist)[0] == ["iteration", "value"]
    assert summary


def test_mdtable_csv(tmp_path, capsys):
    p = tmp_path / "m.csv"
    assert run(["mdtable", "--max-d", "3", "--csv", str(p), "--quiet"]) == 0
    rows = _rows(p)
    assert rows[0] == ["d", "m_d"] and [r[0] for r in rows[1:]] == ["1", "2", "3"]
    assert float(rows[1][1]) == pytest.approx(math.pi / 2 - 2 * math.atan(0.5), abs=1e-12)
    assert run(["mdtable", "--max-d", "0", "--quiet"]) == 2


def test_appendix(capsys):
    assert run(["appendix", "--domain", "box:1", "--dim", "3", "--delta", "0.5", "--quiet"]) == 0
    out = _out(capsys)
    assert out["n_cubes"] == 8 and out["bound"] == pytest.approx(0.51)
    assert run(["appendix", "--domain", "torus:1", "--quiet"]) == 2
