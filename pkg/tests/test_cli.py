"""Command-line interface tests: exit codes, outputs, overrides."""

import json

import pytest

from swarmlink.cli import SHIPPED_SCENARIOS, main, resolve_scenario

from conftest import base_scenario_dict


@pytest.fixture
def scenario_file(tmp_path):
    p = tmp_path / "unit.json"
    p.write_text(json.dumps(base_scenario_dict()))
    return str(p)


def test_run_writes_report(tmp_path, scenario_file):
    out = tmp_path / "report.json"
    rc = main(["run", "--scenario", scenario_file, "--out", str(out)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["scenario"] == "unit"
    assert report["delivery"]["overall_ratio"] == 1.0


def test_run_accepts_shipped_names(tmp_path):
    out = tmp_path / "basic.json"
    rc = main(["run", "--scenario", "basic_pair", "--out", str(out)])
    assert rc == 0
    assert json.loads(out.read_text())["scenario"] == "basic_pair"


def test_run_to_stdout(capsys, scenario_file):
    rc = main(["run", "--scenario", scenario_file, "--out", "-"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["scenario"] == "unit"


def test_run_csv_format(tmp_path, scenario_file):
    out = tmp_path / "report.csv"
    rc = main(["run", "--scenario", scenario_file, "--out", str(out), "--format", "csv"])
    assert rc == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "scenario,seed,mode,src,dst,sent,delivered,ratio"
    assert len(lines) > 1


def test_run_seed_and_mode_overrides(tmp_path, scenario_file):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    assert main(["run", "--scenario", scenario_file, "--seed", "7", "--out", str(out1)]) == 0
    assert main(["run", "--scenario", scenario_file, "--seed", "7", "--out", str(out2), "--mode", "star"]) == 0
    a = json.loads(out1.read_text())
    b = json.loads(out2.read_text())
    assert a["seed"] == b["seed"] == 7
    assert a["mode"] == "mesh" and b["mode"] == "star"


def test_run_writes_trace(tmp_path, scenario_file):
    out = tmp_path / "r.json"
    trace = tmp_path / "r.trace"
    assert main(["run", "--scenario", scenario_file, "--out", str(out), "--trace", str(trace)]) == 0
    for line in trace.read_text().strip().splitlines():
        json.loads(line)


def test_default_out_respects_env(tmp_path, monkeypatch, scenario_file):
    monkeypatch.setenv("SWARMLINK_OUT_DIR", str(tmp_path))
    assert main(["run", "--scenario", scenario_file]) == 0
    assert (tmp_path / "unit_report.json").exists()


def test_validate_ok(scenario_file, capsys):
    assert main(["validate", "--scenario", scenario_file]) == 0
    assert "valid" in capsys.readouterr().out


def test_validate_rejects_bad_scenario(tmp_path):
    d = base_scenario_dict()
    d["nodes"] = [d["nodes"][0]]  # no uavs
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(d))
    assert main(["validate", "--scenario", str(p)]) == 1


def test_missing_scenario_is_io_error(tmp_path):
    assert main(["run", "--scenario", str(tmp_path / "nope.json")]) == 2
    assert main(["validate", "--scenario", "not_a_shipped_name"]) == 2


def test_golden_regenerates(tmp_path):
    out = tmp_path / "golden.json"
    assert main(["golden", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert "frame_samples" in data and "packet_samples" in data


def test_all_shipped_scenarios_resolve():
    for name in SHIPPED_SCENARIOS:
        sc = resolve_scenario(name)
        sc.validate()
        assert sc.name == name
