import json
import subprocess
import sys

import pytest

from liesde import __version__
from liesde.cli import parse_step, read_config_file, run


def test_version(capsys):
    assert run(["--version"]) == 0
    assert __version__ in capsys.readouterr().out


def test_parse_step():
    assert parse_step("2^-6") == 2.0**-6
    assert parse_step("1/64") == 2.0**-6
    assert parse_step("0.03") == 0.03


def test_underresolved_truncation_is_config_error(tmp_path, capsys):
    rc = run(["convergence", "--scheme", "gsrk15", "--param", "exp", "--q", "0",
              "--out", str(tmp_path)])
    assert rc == 2
    assert "2*gamma - 2" in capsys.readouterr().err


def test_bad_grid_is_config_error(tmp_path):
    assert run(["convergence", "--dt", "0.3", "--out", str(tmp_path)]) == 2


def test_unknown_flag_is_config_error():
    assert run(["convergence", "--bogus"]) == 2


def test_small_convergence_run(tmp_path):
    out = tmp_path / "c"
    rc = run(["convergence", "--scheme", "gsrk15", "--param", "cay", "--paths", "4",
              "--dt", "2^-5,2^-4,2^-3", "--dt-ref", "2^-6", "--out", str(out), "--threads", "1"])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["scheme"] == "gsrk15"
    assert report["config"]["paths"] == 4
    assert report["slope"] is not None
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "dt,mean_error,std_error" and len(lines) == 4
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "convergence"
    assert "convergence.csv" in manifest["outputs"]


def test_rigid_body_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["rigid-body", "--seed", "7", "--out", str(a)]) == 0
    assert run(["rigid-body", "--seed", "7", "--out", str(b)]) == 0
    for name in ("trajectory.csv", "drift.csv", "report.json", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    report = json.loads((a / "report.json").read_text())
    assert report["within_tol"]


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# settings\nseed = 3\nsteps = 20\nparam = exp\nq = 2\n")
    assert read_config_file(cfg)["steps"] == 20
    out = tmp_path / "o"
    assert run(["rigid-body", "--config", str(cfg), "--seed", "4", "--out", str(out)]) == 0
    echo = json.loads((out / "report.json").read_text())["config"]
    assert echo["seed"] == 4 and echo["steps"] == 20 and echo["param"] == "exp"
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert run(["rigid-body", "--config", str(bad), "--out", str(out)]) == 2


def test_rerun_from_manifest_reproduces(tmp_path):
    a = tmp_path / "a"
    assert run(["rigid-body", "--seed", "2", "--steps", "30", "--out", str(a)]) == 0
    conf = json.loads((a / "manifest.json").read_text())["config"]
    cfg = tmp_path / "from_manifest.cfg"
    keys = ("seed", "steps", "dt", "scheme", "param", "q")
    cfg.write_text("".join(f"{k}={conf[k]}\n" for k in keys))
    b = tmp_path / "b"
    assert run(["rigid-body", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()


def test_corr_flow_pipeline(tmp_path):
    out = tmp_path / "cf"
    rc = run(["corr-flow", "--paths", "200", "--budget", "4", "--r0", "0.5",
              "--out", str(out)])
    assert rc == 0
    lines = (out / "density.csv").read_text().splitlines()
    assert lines[0] == "x,hist,model" and len(lines) == 402
    report = json.loads((out / "report.json").read_text())
    assert report["evaluations"] == 4 and report["distance"] >= 0


def test_corr_flow_reads_csv(tmp_path):
    from liesde.experiments import synthetic_gbm_prices, write_prices_csv

    p = tmp_path / "prices.csv"
    write_prices_csv(p, *synthetic_gbm_prices(120, rho=0.3, seed=1))
    assert run(["corr-flow", "--input-csv", str(p), "--paths", "100", "--budget", "2",
                "--out", str(tmp_path / "o")]) == 0
    bad = tmp_path / "bad.csv"
    bad.write_text("when,a,b\n")
    assert run(["corr-flow", "--input-csv", str(bad), "--out", str(tmp_path / "x")]) == 2


def test_step_check(tmp_path):
    assert run(["step-check", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["ddcayinv_fd_residual"] < 1e-7
    assert report["ddexpinv_fd_residual"] < 1e-7


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    import liesde.cli as cli
    from liesde.integrators import NonFiniteState

    def boom(cfg, out):
        raise NonFiniteState("non-finite state", 17)

    monkeypatch.setitem(cli.COMMANDS, "step-check", boom)
    assert run(["step-check", "--out", str(tmp_path)]) == 3
    assert "step 17" in capsys.readouterr().err


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "liesde.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "liesde" in proc.stdout
