import json
import os

import yaml
from click.testing import CliRunner

from cfmimo.cli import main


def _write_config(path, **overrides):
    base = {
        "area_m": 100.0, "n_aps": 2, "n_ms": 2, "n_ap_ant": 4, "n_ms_ant": 2,
        "p_streams": 1, "mode": "cf", "beamforming": "fd", "csi": "perfect",
        "shadowing": False, "p_max_w": 0.1, "cluster_density_per_m2": 0.01,
        "drops": 2, "seed": 0,
    }
    base.update(overrides)
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(base, fh)
    return str(path)


def test_run_writes_outputs(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml")
    out = tmp_path / "out"
    result = CliRunner().invoke(
        main, ["run", "--config", cfg, "--out", str(out), "--format", "json"])
    assert result.exit_code == 0, result.output
    assert "included drops: 2" in result.output
    with open(out / "results.json", encoding="utf-8") as fh:
        payload = json.load(fh)
    assert payload["aggregates"]["included_drops"] == 2


def test_run_honors_env_out_dir(tmp_path, monkeypatch):
    cfg = _write_config(tmp_path / "cfg.yaml", drops=1)
    monkeypatch.setenv("CFMIMO_OUT_DIR", str(tmp_path / "env_out"))
    result = CliRunner().invoke(main, ["run", "--config", cfg,
                                       "--format", "csv"])
    assert result.exit_code == 0, result.output
    assert os.path.exists(tmp_path / "env_out" / "results.csv")


def test_run_overrides_drops_and_seed(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml")
    result = CliRunner().invoke(
        main, ["run", "--config", cfg, "--drops", "1", "--seed", "5",
               "--out", str(tmp_path), "--format", "json"])
    assert result.exit_code == 0, result.output
    with open(tmp_path / "results.json", encoding="utf-8") as fh:
        payload = json.load(fh)
    assert payload["config"]["drops"] == 1
    assert payload["config"]["seed"] == 5


def test_run_bad_config_exits_1(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml", n_aps=0)
    result = CliRunner().invoke(main, ["run", "--config", cfg])
    assert result.exit_code == 1
    assert "config error" in result.output


def test_run_missing_config_file(tmp_path):
    result = CliRunner().invoke(
        main, ["run", "--config", str(tmp_path / "nope.yaml")])
    assert result.exit_code == 2          # click path check


def test_run_unwritable_out_exits_2(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml", drops=1)
    blocker = tmp_path / "blocked"
    blocker.write_text("not a directory")
    result = CliRunner().invoke(
        main, ["run", "--config", cfg, "--out", str(blocker)])
    assert result.exit_code == 2
    assert "runtime failure" in result.output


def test_validate_config_ok(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml")
    result = CliRunner().invoke(main, ["validate-config", "--config", cfg])
    assert result.exit_code == 0
    assert "ok: M=2 K=2" in result.output


def test_validate_config_rejects(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml", uc_n=0, mode="uc")
    result = CliRunner().invoke(main, ["validate-config", "--config", cfg])
    assert result.exit_code == 1


def test_sweep_emits_per_point_lines(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml", drops=1,
                        objective="uniform")
    result = CliRunner().invoke(
        main, ["sweep", "--param", "p_max_w", "--values", "0.05,0.1",
               "--config", cfg, "--out", str(tmp_path), "--format", "csv"])
    assert result.exit_code == 0, result.output
    assert "p_max_w=0.05" in result.output
    assert "p_max_w=0.1" in result.output
    assert os.path.exists(tmp_path / "sweep_p_max_w.csv")


def test_sweep_rejects_empty_values(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml", drops=1)
    result = CliRunner().invoke(
        main, ["sweep", "--param", "p_max_w", "--values", ",",
               "--config", cfg])
    assert result.exit_code == 1


def test_sweep_rejects_unknown_param(tmp_path):
    cfg = _write_config(tmp_path / "cfg.yaml", drops=1)
    result = CliRunner().invoke(
        main, ["sweep", "--param", "bandwidth_hz", "--values", "1",
               "--config", cfg])
    assert result.exit_code == 2          # click choice check


def test_oracle_small_instance():
    result = CliRunner().invoke(main, ["oracle", "--drops", "2",
                                       "--points", "12"])
    assert result.exit_code == 0, result.output
    assert "worst gap vs grid" in result.output
