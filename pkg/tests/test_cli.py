import subprocess
import sys
import time

import numpy as np
import pytest

from ramp import audits, cli, oracle

SMOKE = """\
[env]
maze = "easy"
horizon = 20

[buffers]
M = 200
beta = 0.1

[reward]
variant = "{variant}"
hidden = [16]
batch_size = 32
steps_per_epoch = 20

[sac]
hidden = [16]
batch_size = 32
updates_per_env_step = 0.5

[trainer]
n_epochs = 3
episodes_per_epoch = 2
eval_every = 2
states_every = 2
"""


@pytest.fixture
def smoke_config(tmp_path):
    def make(variant="W"):
        p = tmp_path / f"smoke_{variant}.toml"
        p.write_text(SMOKE.format(variant=variant))
        return p

    return make


def test_run_smoke_and_determinism(smoke_config, tmp_path, capsys):
    cfg = smoke_config("W")
    t0 = time.perf_counter()
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert time.perf_counter() - t0 < 60
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--quiet"]) == 0
    a = (tmp_path / "a" / "epochs.csv").read_bytes()
    assert a == (tmp_path / "b" / "epochs.csv").read_bytes()
    assert len(a.splitlines()) == 5
    assert "final coverage" in capsys.readouterr().out


def test_seed_flag_changes_the_run(smoke_config, tmp_path):
    cfg = smoke_config("KL")
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "s0"), "--quiet", "--seed", "0"])
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "s1"), "--quiet", "--seed", "1"])
    assert (tmp_path / "s0" / "epochs.csv").read_bytes() != (tmp_path / "s1" / "epochs.csv").read_bytes()
    assert "seed = 1" in (tmp_path / "s1" / "config.snapshot").read_text()


def test_plotdata(smoke_config, tmp_path, capsys):
    run = tmp_path / "run"
    cli.main(["run", "--config", str(smoke_config("W")), "--out", str(run), "--quiet"])
    capsys.readouterr()
    assert cli.main(["plotdata", "--run", str(run), "--epoch", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "x,y,f_phi_value" and len(out) > 1
    assert cli.main(["plotdata", "--run", str(run), "--epoch", "4", "--grid", "5", "--out", str(tmp_path / "g.csv")]) == 0
    rows = (tmp_path / "g.csv").read_text().splitlines()
    assert len(rows) == 26
    assert cli.main(["plotdata", "--run", str(run), "--epoch", "3"]) == 1


def test_sweep(smoke_config, tmp_path, capsys):
    assert cli.main(["sweep", "--config", str(smoke_config("KL")), "--seeds", "0", "1", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "seed 0:" in out and "seed 1:" in out and "mean" in out
    assert (tmp_path / "seed_1" / "epochs.csv").is_file()


def test_config_errors_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.toml"
    p.write_text("[buffers]\nbeta = 1.5\n")
    assert cli.main(["run", "--config", str(p)]) == 2
    assert "buffers.beta" in capsys.readouterr().err
    assert cli.main(["run", "--config", str(tmp_path / "nope.toml")]) == 2


def test_verify_only_runs_one(capsys):
    assert cli.main(["verify", "--only", "theorem1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("PASS theorem1")


def test_verify_unknown_name(capsys):
    assert cli.main(["verify", "--only", "theorem9"]) == 2


def test_verify_reports_injected_fault(monkeypatch, capsys):
    real = oracle.theorem1_decomposition

    def flipped(rho, mu, beta):
        dh, lb, res = real(rho, mu, beta)
        return dh, -lb, res

    monkeypatch.setattr(oracle, "theorem1_decomposition", flipped)
    assert cli.main(["verify", "--only", "theorem1"]) == 1
    out = capsys.readouterr().out
    assert "FAIL theorem1" in out and "counterexample" in out and "'rho'" in out


def test_verify_fast_audits():
    for name in ("theorem2", "theorem3", "prop1", "w1_dual"):
        assert audits.run_audit(name).passed, name


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "ramp.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "verify" in out.stdout
