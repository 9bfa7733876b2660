import csv
import json
import subprocess
import sys
from importlib.resources import files

import numpy as np
import pytest

from ilcbench.cli import EXIT_CERT, EXIT_CONFIG, EXIT_DIVERGED, EXIT_IO, EXIT_OK, main, run_experiment, sustained_growth
from ilcbench.config import build_reference, build_scenario, load_config, parse_config
from ilcbench.errors import ConfigError
from ilcbench.plant_lab import default_printer_scenario, printer_reference

CONFIGS = files("ilcbench") / "configs"
PRINTER_CFG = str(CONFIGS / "printer.json")
RIGID_CFG = str(CONFIGS / "printer_rigid_l.json")

MINIMAL = {
    "name": "mini",
    "ts_s": 0.001,
    "plant": {"kind": "modal", "mass_kg": 1.0},
    "controller": {"kp_n_per_m": 400.0, "kd_n_s_per_m": 20.0},
    "reference": {"order": 3, "displacement_m": 0.01, "v_max_m_s": 0.2, "a_max_m_s2": 2.0,
                  "j_max_m_s3": 100.0, "n_samples": 400},
}


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj) if not isinstance(obj, str) else obj)
    return str(p)


def with_changes(base, **changes):
    d = json.loads(json.dumps(base))
    for path, value in changes.items():
        node = d
        keys = path.split("__")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return d


# ---------------------------------------------------------------- parsing


def test_round_trip_is_canonical():
    cfg = parse_config(json.dumps(MINIMAL))
    text = cfg.canonical_json()
    again = parse_config(text)
    assert again == cfg
    assert again.canonical_json() == text


def test_negative_mass_names_field():
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(with_changes(MINIMAL, plant__mass_kg=-1.0)))
    assert any("mass_kg" in v for v in exc.value.violations)


def test_all_violations_reported():
    bad = with_changes(MINIMAL, plant__mass_kg=-1.0, ts_s=0.0, controller__kp_n_per_m=-5.0)
    bad["extra_key"] = 1
    with pytest.raises(ConfigError) as exc:
        parse_config(json.dumps(bad))
    joined = "\n".join(exc.value.violations)
    for field in ("mass_kg", "ts_s", "kp_n_per_m", "extra_key"):
        assert field in joined
    assert len(exc.value.violations) >= 4


def test_syntax_error_has_position():
    text = '{\n  "name": "x",\n  "ts_s": 0.001,,\n}'
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == 3
    assert exc.value.column is not None and exc.value.column > 1


def test_fourth_order_needs_snap_bound():
    with pytest.raises(ConfigError):
        parse_config(json.dumps(with_changes(MINIMAL, reference__order=4)))


def test_shipped_printer_config_matches_programmatic():
    cfg = load_config(PRINTER_CFG)
    assert build_scenario(cfg) == default_printer_scenario()
    ref = build_reference(cfg)
    assert ref.position == printer_reference().position


# ---------------------------------------------------------------- CLI


def run_cli(*args):
    return main(list(args) + ["--quiet"])


def test_check_passes(tmp_path):
    assert run_cli("check", "--config", PRINTER_CFG, "--out", str(tmp_path)) == EXIT_OK
    rep = json.loads((tmp_path / "printer" / "convergence.json").read_text())
    assert rep["verdict"] == "pass" and rep["sup_rho"] < 1
    assert {"grid_rad_s", "rho", "sup_rho", "verdict"} <= rep.keys()


def test_check_certification_failure(tmp_path):
    cfg = json.loads(open(PRINTER_CFG).read())
    cfg["ilc"]["q"]["policy"] = "identity"  # accurate but imperfect model without Q
    assert run_cli("check", "--config", write(tmp_path, cfg), "--out", str(tmp_path)) == EXIT_CERT


def test_divergent_design_reports_first_rise(tmp_path):
    assert run_cli("run", "--config", RIGID_CFG, "--out", str(tmp_path)) == EXIT_DIVERGED
    out = tmp_path / json.loads(open(RIGID_CFG).read())["name"]
    summary = json.loads((out / "run.json").read_text())
    assert summary["diverged"] and summary["exit_status"] == EXIT_DIVERGED
    assert isinstance(summary["first_rising_task"], int) and 1 <= summary["first_rising_task"] <= 10
    rows = list(csv.reader(open(out / "history.csv")))
    assert rows[0] == ["task", "e_norm_2", "f_norm_2"]


def test_run_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = json.loads(open(PRINTER_CFG).read())
    cfg["ilc"]["save_signals"] = True
    cfg["ilc"]["n_iter"] = 3
    path = write(tmp_path, cfg)
    assert run_cli("run", "--config", path, "--out", str(a)) == EXIT_OK
    assert run_cli("run", "--config", path, "--out", str(b)) == EXIT_OK
    fa = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    fb = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert fa == fb and any(p.parts[-2] == "signals" for p in fa)
    for rel in fa:
        assert (a / rel).read_bytes() == (b / rel).read_bytes()


def test_analyze_only(tmp_path):
    cfg = json.loads(open(PRINTER_CFG).read())
    del cfg["ilc"]
    assert run_cli("analyze", "--config", write(tmp_path, cfg), "--out", str(tmp_path)) == EXIT_OK
    produced = sorted(p.name for p in (tmp_path / "printer").iterdir())
    assert produced == ["analysis.json"]
    rep = json.loads((tmp_path / "printer" / "analysis.json").read_text())
    assert rep["improvement_factor"] >= 10


def test_run_without_ilc_section_is_config_error(tmp_path):
    assert run_cli("run", "--config", write(tmp_path, MINIMAL), "--out", str(tmp_path)) == EXIT_CONFIG


def test_profile_csv(tmp_path):
    assert run_cli("profile", "--config", PRINTER_CFG, "--out", str(tmp_path)) == EXIT_OK
    rows = list(csv.reader(open(tmp_path / "printer" / "profile.csv")))
    assert rows[0] == ["t", "pos", "vel", "acc", "jerk", "snap"]
    assert len(rows) == 1 + 1500
    assert float(rows[-1][1]) == pytest.approx(0.1, rel=1e-6)


def test_env_var_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv("ILCBENCH_OUT", str(tmp_path / "env"))
    assert run_cli("profile", "--config", write(tmp_path, MINIMAL)) == EXIT_OK
    assert (tmp_path / "env" / "mini" / "profile.csv").is_file()
    # the flag wins over the environment
    assert run_cli("profile", "--config", write(tmp_path, MINIMAL), "--out", str(tmp_path / "flag")) == EXIT_OK
    assert (tmp_path / "flag" / "mini" / "profile.csv").is_file()


def test_seed_override(tmp_path):
    cfg = json.loads(open(PRINTER_CFG).read())
    del cfg["ilc"]
    cfg["ensemble"]["n_exp"] = 3
    path = write(tmp_path, cfg)
    run_cli("analyze", "--config", path, "--out", str(tmp_path / "a"))
    run_cli("analyze", "--config", path, "--out", str(tmp_path / "b"), "--seed-override", "7")
    a = json.loads((tmp_path / "a" / "printer" / "analysis.json").read_text())
    b = json.loads((tmp_path / "b" / "printer" / "analysis.json").read_text())
    assert a["residual_norms_2"] != b["residual_norms_2"]
    assert run_cli("analyze", "--config", path, "--seed-override", "-1") == EXIT_CONFIG


def test_config_and_io_errors(tmp_path):
    assert run_cli("check", "--config", write(tmp_path, "{ not json")) == EXIT_CONFIG
    assert run_cli("check", "--config", str(tmp_path / "missing.json")) == EXIT_IO


def test_sustained_growth_rule():
    assert sustained_growth([1.0, 0.1, 0.2, 0.3, 0.4]) == 2
    assert sustained_growth([1.0, 0.1, 0.11, 0.12, 0.13]) is None  # wiggle at the floor
    assert sustained_growth([1.0, 0.5, 0.25]) is None


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ilcbench", "profile", "--config", write(tmp_path, MINIMAL),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
    assert "profile" in proc.stdout


def test_run_experiment_api(tmp_path):
    cfg = parse_config(json.dumps(MINIMAL))
    assert run_experiment(cfg, "profile", str(tmp_path)) == EXIT_OK
    data = np.loadtxt(tmp_path / "mini" / "profile.csv", delimiter=",", skiprows=1)
    assert data.shape == (400, 5)
