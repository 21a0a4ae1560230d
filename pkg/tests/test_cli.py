import csv
import json
import shutil
import subprocess
from pathlib import Path

import pytest

from mdclt.cli import load_config, main
from mdclt.errors import ConfigError
from mdclt.mda_diagnostics import report_csv_header

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write_config(tmp_path, **overrides):
    data = {
        "schema_version": 1,
        "model": {"theta": [0.5, 0.2]},
        "innovation": {"kind": "normal", "scale": 1.0},
        "n_grid": [20, 40, 80],
        "replications": 40,
        "seed": 5,
    }
    data.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_shipped_configs_parse():
    for path in CONFIGS.glob("*.json"):
        load_config(path).to_mc()


def test_compute_sigma_scalar(capsys):
    assert main(["compute-sigma", "--theta", "0.9", "--d", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["sigma"][0][0] == pytest.approx(1 / 0.19, rel=1e-12)
    assert out["header"]["schema_version"] == 1


def test_compute_sigma_lyapunov_field(capsys):
    assert main(["compute-sigma", "--theta", "0.5", "0.2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["lyapunov_max_abs_diff"] <= 1e-10
    assert set(out) >= {"sigma_inv", "sigma_sqrt", "sigma_inv_sqrt", "head", "spectral_radius", "kappa1", "terms_used"}


def test_compute_sigma_unstable_exit_code(capsys):
    assert main(["compute-sigma", "--theta", "1.5", "--d", "1"]) == 2
    assert "rho=1.5" in capsys.readouterr().err


def test_config_errors_exit_4(tmp_path, capsys):
    out = str(tmp_path / "out")
    assert main(["verify-clt", "--config", str(write_config(tmp_path, replications=1)), "--out", out]) == 4
    assert "replications" in capsys.readouterr().err
    assert main(["diagnose-conditions", "--config", str(write_config(tmp_path, eps_grid=[])), "--out", out]) == 4
    assert main(["verify-clt", "--config", str(write_config(tmp_path, surprise=1)), "--out", out]) == 4
    assert "surprise" in capsys.readouterr().err
    assert main(["verify-clt", "--config", str(write_config(tmp_path, schema_version=2)), "--out", out]) == 4


def test_malformed_json_reports_position(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "schema_version": 1,\n  "model": \n}')
    with pytest.raises(ConfigError, match="line 4"):
        load_config(bad)


def test_unstable_model_in_config_exit_2(tmp_path):
    cfg = write_config(tmp_path, model={"theta": [1.2]})
    assert main(["verify-clt", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_verify_clt_outputs(tmp_path):
    out = tmp_path / "o"
    code = main(["verify-clt", "--config", str(write_config(tmp_path)), "--out", str(out)])
    assert code in (0, 1)
    summary = json.loads((out / "summary.json").read_text())
    assert set(summary["header"]) == {"config_hash", "seed", "schema_version", "version"}
    stats_rows = read_csv(out / "statistics.csv")
    assert stats_rows[0] == ["r", "n", "gram_pd", "w", "z1", "clt_1", "clt_2", "selfnorm_1", "selfnorm_2"]
    assert len(stats_rows) == 1 + 40 * 3
    assert read_csv(out / "mixing.csv")[0] == ["n", "bucket", "component", "n_bucket", "n_rest", "statistic", "p_value"]
    assert read_csv(out / "decay.csv")[0] == ["statistic", "n", "median", "p90", "strictly_decreasing", "ceiling", "passed"]


def test_seed_override_and_env_workers(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    main(["verify-clt", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "99"])
    monkeypatch.setenv("MDCLT_WORKERS", "3")
    main(["verify-clt", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "99"])
    a = (tmp_path / "a" / "summary.json").read_bytes()
    assert a == (tmp_path / "b" / "summary.json").read_bytes()
    assert json.loads(a)["header"]["seed"] == 99


def test_diagnose_conditions_outputs(tmp_path, capsys):
    out = tmp_path / "o"
    main(["diagnose-conditions", "--config", str(write_config(tmp_path, replications=10)), "--out", str(out)])
    assert "audit violations: 0" in capsys.readouterr().out
    rows = read_csv(out / "conditions.csv")
    assert rows[0] == ["r"] + report_csv_header(2)
    assert len(rows) == 1 + 10 * 3
    report = json.loads((out / "conditions.json").read_text())
    assert report["audit"]["count"] == 0


def test_rank_demo_zero_start(tmp_path):
    cfg = write_config(tmp_path, n_grid=[3], replications=500)
    out = tmp_path / "o"
    assert main(["rank-demo", "--case", "zero_start_continuous", "--config", str(cfg), "--out", str(out)]) == 0
    omega = json.loads((out / "omega.json").read_text())
    assert omega["frequency"][2] == 1.0
    assert read_csv(out / "omega.csv")[0] == ["n", "frequency", "bound", "bound_ok"]


def test_simulate_dump(tmp_path):
    cfg = write_config(tmp_path, model={"theta": [0.0]}, n_grid=[5], replications=2)
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--replication", "1"]) == 0
    rows = read_csv(out / "path_r1.csv")
    assert rows[0] == ["k", "Y_k", "Z_k"]
    assert [r[0] for r in rows[1:]] == ["0", "1", "2", "3", "4", "5"]
    # theta = 0 and a zero start: Y_k = Z_k
    assert all(r[1] == r[2] for r in rows[2:])


@pytest.mark.skipif(shutil.which("mdclt") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["mdclt", "compute-sigma", "--theta", "0.5"], capture_output=True, text=True, check=False)
    assert res.returncode == 0
    assert json.loads(res.stdout)["sigma"][0][0] == pytest.approx(4 / 3)
