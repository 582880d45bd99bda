import copy
import json

import pytest
import yaml
from click.testing import CliRunner

from couplergate.cli import main
from couplergate.config import shipped_config


@pytest.fixture
def small_config(tmp_path):
    raw = copy.deepcopy(shipped_config("aba").raw)
    raw["zz_map"] = {"omega1_GHz": [4.8, 5.2, 5], "omega2_GHz": [5.7, 6.1, 5], "min_overlap": 0.5}
    raw["j12_scan"] = {"alpha_c_MHz": [-400, 0, 3], "dynamics": False}
    raw["floquet"]["scales"] = [0, 1, 2]
    path = tmp_path / "small.yaml"
    path.write_text(yaml.safe_dump(raw))
    return path


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args], catch_exceptions=False)


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_zz_map_rows(tmp_path, small_config):
    res = run("zz-map", "--config", small_config, "--out", tmp_path / "o")
    assert res.exit_code == 0
    lines = (tmp_path / "o" / "zz_map.csv").read_text().splitlines()
    assert lines[0] == "omega1_GHz,omega2_GHz,zeta_kHz,log10_abs_zeta"
    assert len(lines) == 26
    row = next(r.split(",") for r in lines[1:] if r.startswith("5.0,5.9,"))
    assert float(row[2]) == pytest.approx(-273, rel=0.15)
    files = manifest(tmp_path / "o")["files"]
    assert set(files) == {"zz_map.csv"}


def test_empty_range_is_usage_error(tmp_path, small_config):
    raw = yaml.safe_load(small_config.read_text())
    raw["zz_map"]["omega1_GHz"] = [4.8, 5.2, 0]
    small_config.write_text(yaml.safe_dump(raw))
    res = CliRunner().invoke(main, ["zz-map", "--config", str(small_config), "--out", str(tmp_path / "o")])
    assert res.exit_code == 2


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("schema_version: 1\nunknown: 3\n")
    res = CliRunner().invoke(main, ["zz-map", "--config", str(bad)])
    assert res.exit_code == 2
    res = CliRunner().invoke(main, ["zz-map", "--config", str(tmp_path / "missing.yaml")])
    assert res.exit_code == 2


def test_numerical_failure_exit_code(tmp_path, small_config):
    raw = yaml.safe_load(small_config.read_text())
    raw["calibration"]["scan_window_MHz"] = 0.5
    raw["calibration"]["horizon_ns"] = 5
    raw["calibration"]["samples"] = 11
    small_config.write_text(yaml.safe_dump(raw))
    res = CliRunner().invoke(main, ["calibrate", "--config", str(small_config), "--out", str(tmp_path / "o")])
    assert res.exit_code == 3
    assert "scan" in res.output


def test_j12_scan_columns(tmp_path, small_config):
    assert run("j12-scan", "--config", small_config, "--out", tmp_path / "o").exit_code == 0
    lines = (tmp_path / "o" / "j12_scan.csv").read_text().splitlines()
    assert lines[0] == "alpha_c_MHz,J_closed_MHz,J_pathsum_MHz,J_dynamics_MHz"
    first = lines[1].split(",")
    assert float(first[1]) == pytest.approx(-0.6025, abs=1e-4)
    assert float(first[2]) == pytest.approx(float(first[1]), rel=1e-10)
    assert abs(float(lines[3].split(",")[1])) < 1e-12


def test_outputs_are_deterministic_across_runs_and_threads(tmp_path, small_config):
    sums = []
    for k, threads in enumerate((1, 1, 3)):
        files = {}
        for cmd in ("zz-map", "j12-scan", "floquet-map"):
            out = tmp_path / f"{cmd}{k}"
            assert run(cmd, "--config", small_config, "--out", out, "--threads", threads).exit_code == 0
            files.update(manifest(out)["files"])
        sums.append(files)
    assert len(sums[0]) == 4
    assert sums[0] == sums[1] == sums[2]


def test_manifest_lists_every_file(tmp_path, small_config):
    out = tmp_path / "o"
    run("floquet-map", "--config", small_config, "--out", out)
    m = manifest(out)
    emitted = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(m["files"]) == emitted
    assert m["config_sha256"] and m["version"]
    assert "floquet" in m["stage_seconds"]


def test_levels_override(tmp_path, small_config):
    assert run("zz-map", "--config", small_config, "--out", tmp_path / "o", "--levels", 3).exit_code == 0
