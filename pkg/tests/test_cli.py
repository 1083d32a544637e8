from __future__ import annotations

import csv
import io
import json
from fractions import Fraction

import pytest

from flipflop_ergodic.cli import (
    ConfigError,
    decimal_str,
    dumps,
    emit_report,
    from_jsonable,
    load_config,
    loads,
    main,
    render,
    run_config,
    to_jsonable,
)


def _write(tmp_path, name, cfg):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_fraction_serialization():
    assert to_jsonable(Fraction(-5, 48)) == {"num": -5, "den": 48}
    assert json.loads(dumps({"x": Fraction(-5, 48)})) == {"x": {"num": -5, "den": 48}}
    assert from_jsonable({"num": -5, "den": 48}) == Fraction(-5, 48)


def test_decimal_rendering_is_exact_rounding():
    assert decimal_str(Fraction(-5, 48)) == "-0.104166666667"
    assert decimal_str(Fraction(1, 3), 4) == "0.3333"
    assert decimal_str(Fraction(1)) == "1"


def test_floats_rejected():
    with pytest.raises(ConfigError, match="float"):
        load_config({"driver": "theorem-d", "model": {"beta": 0.5}})


@pytest.mark.parametrize(
    "cfg, needle",
    [
        ({"driver": "bridge", "schedule": {"K": 2, "b": ["1/8", "1/8"]}}, "a_1 > b_2"),
        ({"driver": "nope"}, "driver"),
        ({"driver": "theorem-d", "stepz": 3}, "unknown keys"),
        ({"driver": "theorem-d", "model": {"tau": 1}}, "2*tau"),
        ({"driver": "theorem-c", "schedule": {"K": 2, "b": ["1/2", "1/4"]}}, "lambda_q"),
        ({"driver": "descend", "gamma": "++-"}, "negative"),
        ({"driver": "verify"}, "orbit_file"),
    ],
)
def test_invalid_configs_name_the_invariant(cfg, needle):
    with pytest.raises(ConfigError, match=needle.replace("*", r"\*")):
        load_config(cfg)


def test_invalid_schedule_exit_code(tmp_path, capsys):
    p = _write(tmp_path, "bad.json", {"driver": "bridge", "schedule": {"K": 2, "b": ["1/8", "1/8"]}})
    assert main(["run", str(p)]) == 3
    assert "a_1 > b_2" in capsys.readouterr().err


def test_report_formats_and_row_count(tmp_path):
    out = run_config({"driver": "theorem-d", "steps": 3})
    assert out.ok and out.exit_code == 0
    rep = out.report
    assert len(rep["rows"]) == 3
    assert rep["rows"][0]["lambda"]["exact"] == {"num": -13, "den": 19}
    rows = list(csv.reader(io.StringIO(render(rep, "csv"))))
    assert rows[0][:3] == ["step", "period", "lambda"] and len(rows) - 1 == 3
    for fmt, name in (("json", "report.json"), ("csv", "report.csv"), ("text", "report.txt")):
        assert emit_report(rep, fmt, tmp_path).name == name
    assert json.loads((tmp_path / "report.json").read_text()) == rep


def test_deterministic_bytes():
    cfg = {"driver": "bridge", "schedule": {"K": 2}, "pattern_seed": 7}
    assert dumps(run_config(cfg).report) == dumps(run_config(cfg).report)


def test_env_overrides_report_path_only(monkeypatch, tmp_path):
    monkeypatch.setenv("FLIPFLOP_ERGODIC_REPORT_PATH", str(tmp_path / "env"))
    cfg = load_config({"driver": "theorem-d", "steps": 2, "report_path": "elsewhere"})
    assert cfg.report_path == str(tmp_path / "env")
    monkeypatch.delenv("FLIPFLOP_ERGODIC_REPORT_PATH")
    body = dumps(run_config(cfg).report)
    assert body == dumps(run_config({"driver": "theorem-d", "steps": 2}).report)


def test_theorem_d_eight_steps_seed_42(tmp_path):
    p = _write(tmp_path, "d.json", {"driver": "theorem-d", "steps": 8, "pattern_seed": 42,
                                    "report_path": str(tmp_path / "run")})
    assert main(["run", str(p)]) == 0
    rep = loads((tmp_path / "run" / "report.json").read_text())
    assert len(rep["rows"]) == 8 and rep["ok"]
    assert all(c["ok"] for r in rep["rows"] for c in r["checks"])
    assert rep["environment"]["seed"] == 42


@pytest.mark.parametrize("cfg", [
    {"driver": "descend", "steps": 3, "gamma": "--+"},
    {"driver": "bridge", "schedule": {"K": 2}, "model": {"skew": {"b_minus": "1/3"}}},
    {"driver": "full-support", "steps": 2, "density_m": 2},
])
def test_verify_round_trip(tmp_path, capsys, cfg):
    run_dir = tmp_path / "run"
    p = _write(tmp_path, "c.json", {**cfg, "save_orbits": True, "report_path": str(run_dir)})
    assert main(["run", str(p)]) == 0
    assert main(["verify", str(run_dir / "orbits.json"), "--out", str(tmp_path / "v")]) == 0
    rep = json.loads((tmp_path / "v" / "report.json").read_text())
    assert rep["ok"] and rep["driver"] == "verify"
    # verification is idempotent
    assert main(["verify", str(run_dir / "orbits.json"), "--out", str(tmp_path / "v2")]) == 0
    assert (tmp_path / "v" / "report.json").read_bytes() == (tmp_path / "v2" / "report.json").read_bytes()
    assert main(["report", str(run_dir), "--format", "csv"]) == 0
    assert "step,period" in capsys.readouterr().out


def test_tampered_orbit_file_fails_with_margin(tmp_path, capsys):
    run_dir = tmp_path / "run"
    p = _write(tmp_path, "c.json", {"driver": "theorem-d", "steps": 2, "save_orbits": True,
                                    "report_path": str(run_dir)})
    assert main(["run", str(p)]) == 0
    doc = json.loads((run_dir / "orbits.json").read_text())
    doc["orbits"][2] = doc["orbits"][1] + "-" * 40
    bad = _write(tmp_path, "bad.json", doc)
    capsys.readouterr()
    assert main(["verify", str(bad)]) == 2
    text = capsys.readouterr().out
    assert "FAIL" in text and "margin -" in text


def test_driver_failure_is_reported(monkeypatch):
    from flipflop_ergodic import cli
    from flipflop_ergodic.constructors import CertificateError, Check

    def broken(*a, **k):
        raise CertificateError("bridge orbit at level 1", [Check("exponent window", False, Fraction(-1, 8))])

    monkeypatch.setattr(cli, "build_bridge_orbit", broken)
    out = run_config({"driver": "bridge", "schedule": {"K": 1}})
    assert out.exit_code == 2 and not out.ok
    assert out.report["failure"]["checks"][0]["margin"] == {"num": -1, "den": 8}
    assert "FAIL  exponent window  margin -0.125" in render(out.report, "text")
    with pytest.raises(ConfigError):
        run_config({"driver": "verify", "orbit_file": "/nonexistent/orbits.json"})


def test_report_command_missing_dir(tmp_path, capsys):
    assert main(["report", str(tmp_path / "missing"), "--format", "text"]) == 3
