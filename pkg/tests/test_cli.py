import contextlib
import io
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ptrabi.cli import main
from ptrabi.io import format_value, parse_value, read_csv, read_json, write_csv


def run(tmp_path, monkeypatch, argv):
    monkeypatch.setenv("PTRABI_OUTPUT_DIR", str(tmp_path))
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        assert main(argv) == 0
    return Path(out.getvalue().strip())


@given(st.floats(allow_nan=False, allow_infinity=True))
def test_float_round_trip(x):
    assert parse_value(format_value(x)) == x


def test_csv_round_trip_exact(tmp_path):
    rows = [[0.1, 3, "1/4", True, -2.5e-300], [1 / 3, -1, "+i", False, np.pi]]
    path = tmp_path / "x.csv"
    write_csv(path, ["a", "b", "c", "d", "e"], rows, {"command": "test", "params": {"g": 0.1}})
    meta, header, back = read_csv(path)
    assert meta["params"]["g"] == 0.1
    assert header == ["a", "b", "c", "d", "e"]
    assert back == rows


def test_spectrum_file(tmp_path, monkeypatch):
    path = run(tmp_path, monkeypatch, ["spectrum", "--model", "btp", "--delta", "0.5",
                                       "--epsilon", "0.1", "--g-range", "0.1:0.2:2",
                                       "--levels", "3", "--n-max", "40"])
    meta, header, rows = read_csv(path)
    assert header == ["g", "level_index", "re_E", "im_E", "q", "pi_parity", "pt_status", "converged"]
    assert len(rows) == 6
    assert meta["version"] and meta["params"]["epsilon"] == 0.1
    assert rows[0][4] == "1/4"


def test_deterministic_output(tmp_path, monkeypatch):
    argv = ["gscan", "--model", "dtp", "--delta", "5", "--g", "0.7802", "--parity", "-",
            "--e-range=0:3:31", "--derivative"]
    a = run(tmp_path / "a", monkeypatch, argv).read_bytes()
    b = run(tmp_path / "b", monkeypatch, argv).read_bytes()
    assert a == b


def test_gscan_window_and_pole_flags(tmp_path, monkeypatch):
    # the window contains the first dtp pole at 2 * gamma / 4 - 1/2 for g=0.25
    gamma = np.sqrt(1.25)
    pole = 0.5 * gamma - 0.5
    path = run(tmp_path, monkeypatch, ["gscan", "--model", "dtp", "--delta", "0.5", "--g", "0.25",
                                       "--parity", "+", f"--e-range={pole - 0.1}:{pole + 0.1}:3"])
    _, header, rows = read_csv(path)
    flags = [r[header.index("pole_flag")] for r in rows]
    assert flags == [False, True, False]
    path = run(tmp_path, monkeypatch, ["gscan", "--model", "btp", "--delta", "0.5", "--epsilon",
                                       "0.1", "--g", "0.25", "--window=0:1:-0.5:0.5:4:3"])
    _, header, rows = read_csv(path)
    assert header == ["re_E", "im_E", "ln_abs_G2", "pole_flag"] and len(rows) == 12


def test_critical_reports(tmp_path, monkeypatch):
    path = run(tmp_path, monkeypatch, ["critical", "juddian", "--model", "dtp", "--delta", "5.0",
                                       "--q", "1/4", "--n", "1"])
    rep = read_json(path)
    assert rep["status"] == "found"
    assert rep["points"][0]["g"] == pytest.approx(0.306186, abs=1e-6)
    assert list(rep)[:5] == ["artifact", "version", "command", "params", "tolerances"]
    path = run(tmp_path, monkeypatch, ["critical", "threshold", "--delta", "0.5", "--epsilon", "0.1"])
    assert read_json(path)["points"][0]["g"] == pytest.approx(0.4996, abs=1e-6)
    path = run(tmp_path, monkeypatch, ["critical", "collapse", "--model", "dtp", "--delta", "5"])
    rep = read_json(path)
    assert rep["status"] == "none found" and rep["points"] == []
    path = run(tmp_path, monkeypatch, ["critical", "juddian", "--model", "dtp", "--delta", "3.0"])
    assert read_json(path)["status"] == "none found"


def test_critical_tables(tmp_path, monkeypatch):
    path = run(tmp_path, monkeypatch, ["critical", "aa", "--delta", "0.5", "--epsilon", "0.1",
                                       "--g-range", "0.1:0.4:4", "--blocks", "2"])
    _, header, rows = read_csv(path)
    assert header[:3] == ["g", "n", "D_n"] and len(rows) == 8
    path = run(tmp_path, monkeypatch, ["critical", "fidelity", "--model", "dtp", "--delta", "5",
                                       "--g-range", "0.30:0.31:11", "--level", "2",
                                       "--n-max", "80"])
    _, header, rows = read_csv(path)
    assert header[:6] == ["g", "level", "re_chi", "im_chi", "re_cprod", "im_cprod"]
    chi = np.array([r[2] for r in rows])
    assert np.argmax(chi) == 6  # interval [0.306, 0.307] holds the Juddian point


def test_dynamics_file(tmp_path, monkeypatch):
    path = run(tmp_path, monkeypatch, ["dynamics", "--delta", "0.5", "--epsilon", "0.1",
                                       "--g", "0.25", "--t-max", "5", "--n-max", "40"])
    meta, header, rows = read_csv(path)
    assert header == ["t", "W", "n_avg", "log_norm"]
    assert rows[0][1] == pytest.approx(1.0)
    assert meta["params"]["n_max"] == 40


@pytest.mark.parametrize("argv", [
    ["spectrum", "--model", "btp", "--delta", "0.5", "--g-range", "0.1:0.6:5"],
    ["spectrum", "--model", "btp", "--delta", "0.5", "--g-range", "0:0.4:0"],
    ["dynamics", "--delta", "0.5", "--t-max", "0"],
    ["dynamics", "--delta", "0.5", "--t-max", "-3"],
    ["gscan", "--delta", "0.5", "--g", "0.5"],
    ["spectrum", "--model", "dtp", "--delta", "0.5", "--epsilon", "0.1", "--g-range", "0:1:3"],
])
def test_usage_errors(tmp_path, monkeypatch, argv, capsys):
    monkeypatch.setenv("PTRABI_OUTPUT_DIR", str(tmp_path))
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    assert "error" in capsys.readouterr().err


def test_json_has_no_nan_tokens(tmp_path, monkeypatch):
    path = run(tmp_path, monkeypatch, ["critical", "threshold", "--delta", "0.5", "--epsilon", "0.7"])
    json.loads(path.read_text())  # strict parse
