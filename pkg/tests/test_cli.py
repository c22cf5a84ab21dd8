from __future__ import annotations

import json

import numpy as np
import pytest

from csslab import cli
from csslab.soliton import soliton_charge


@pytest.fixture(autouse=True)
def _no_env_output(monkeypatch):
    monkeypatch.delenv(cli.OUTPUT_ENV, raising=False)


def write_cfg(path, payload):
    path.write_text(json.dumps(payload))
    return str(path)


SIM_CFG = {
    "grid": {"r_max": 15.0, "n": 256},
    "sim": {"dt": 1e-2, "t_end": 0.05, "snapshot_stride": 5},
    "initial": {"kind": "expression", "id": "gaussian", "m": 1, "amplitude": 0.5},
}


def test_empty_config_exits_with_diagnostics(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {})
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "grid" in err and "sim" in err and "initial" in err


def test_bad_sim_key_and_missing_file(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.json", {**SIM_CFG, "sim": {"dt": 1e-2, "bogus": 1}})
    assert cli.main(["simulate", "--config", cfg]) == cli.EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    assert cli.main(["simulate", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG


def test_soliton_subcommand(tmp_path):
    out = tmp_path / "sol"
    assert cli.main(["soliton", "--m", "1", "--r-max", "20", "--n", "1024", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["charge"] == pytest.approx(soliton_charge(1), rel=1e-2)
    assert (out / "soliton.csv").exists()
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["argv"][:2] == ["csslab", "soliton"]


def test_simulate_is_deterministic(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", SIM_CFG)
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["simulate", "--config", cfg, "--out", str(b)]) == 0
    for name in ("diagnostics.csv", "snapshot_00001.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_env_variable_overrides_output(tmp_path, monkeypatch):
    cfg = write_cfg(tmp_path / "c.json", SIM_CFG)
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "ignored")]) == 0
    assert (tmp_path / "env" / "diagnostics.csv").exists()
    assert not (tmp_path / "ignored").exists()


def test_simulate_reports_blowup(tmp_path):
    cfg = write_cfg(
        tmp_path / "c.json",
        {
            "grid": {"r_max": 10.0, "n": 2048},
            "sim": {"dt": 1e-3, "t_end": 0.3, "blowup_threshold": 10.0},
            "initial": {"kind": "soliton", "m": 1, "T": 0.2},
        },
    )
    assert cli.main(["simulate", "--config", cfg, "--out", str(tmp_path / "o")]) == cli.EXIT_BLOWUP


def test_virial_and_csv_initial(tmp_path):
    sol = tmp_path / "sol"
    cli.main(["soliton", "--m", "0", "--r-max", "30", "--n", "512", "--out", str(sol)])
    cfg = write_cfg(
        tmp_path / "v.json",
        {"sim": {"dt": 1e-2, "t_end": 0.05}, "initial": {"kind": "csv", "path": "sol/soliton.csv"}, "virial": {"R": 5.0}},
    )
    code = cli.main(["virial", "--config", cfg, "--out", str(tmp_path / "v")])
    assert code in (0, cli.EXIT_ACCEPTANCE)
    header = (tmp_path / "v" / "virial.csv").read_text().splitlines()[0]
    assert header.startswith("t,")


def test_groundstate_and_modulate(tmp_path):
    out = tmp_path / "gs"
    assert cli.main(["groundstate", "--m", "0", "--g", "1.5", "--r-max", "30", "--n", "512", "--out", str(out)]) == 0
    row = json.loads((out / "summary.json").read_text())
    assert row["residual"] < 1e-8
    sol = tmp_path / "sol"
    cli.main(["soliton", "--m", "1", "--lam", "1.2", "--gamma", "0.3", "--r-max", "40", "--n", "2048", "--out", str(sol)])
    assert cli.main(["modulate", "--input", str(sol / "soliton.csv"), "--out", str(tmp_path / "mod")]) == 0
    fit = json.loads((tmp_path / "mod" / "summary.json").read_text())
    assert fit["lambda0"] == pytest.approx(1 / 1.2, rel=1e-4)
    # the CSV carries samples only, so the fit goes through the spline
    assert fit["eps_l2"] < 1e-4


def test_scenario_and_report(tmp_path):
    runs = tmp_path / "runs"
    params = json.dumps({"r_max": 12.0, "n": 512, "t_end": 0.05, "dt": 1e-2})
    code = cli.main(["scenario", "static_soliton", "--params", params, "--out", str(runs / "coarse")])
    assert code in (0, cli.EXIT_ACCEPTANCE)
    bad = {"scenario": "static_soliton", "seed": 0, "passed": False, "items": [{"name": "x", "value": 1.0, "threshold": 0.5, "relation": "<", "passed": False}], "results": {}}
    (runs / "failing").mkdir()
    (runs / "failing" / "summary.json").write_text(json.dumps(bad))
    assert cli.main(["report", str(runs)]) == cli.EXIT_ACCEPTANCE
    merged = json.loads((runs / "report.json").read_text())
    assert any(f["run"] == "failing" for f in merged["failures"])
    assert (runs / "report.csv").read_text().startswith("run,scenario,passed")


def test_scenario_config_validation(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "s.json", {"scenario": "nope", "seed": "x", "params": []})
    assert cli.main(["scenario", "--config", cfg]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "scenario" in err and "seed" in err and "params" in err


def test_item_relations():
    assert cli.Item("a", 1.0, 2.0, "<").passed
    assert not cli.Item("a", np.nan, 2.0, "<").passed
    with pytest.raises(ValueError):
        cli.Item("a", 1.0, 2.0, "==")
