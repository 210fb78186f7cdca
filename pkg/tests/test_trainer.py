import dataclasses
import math

import numpy as np
import pytest

from ramp import trainer
from ramp.config import EnvConfig, RampConfig, RewardConfig, TrainerConfig, BufferConfig
from ramp.envs import chain_mdp, deterministic_policy
from ramp.sac import SacConfig
from ramp.trainer import (
    EPOCH_COLUMNS,
    init_state,
    intrinsic_weight,
    mix_reward,
    relabel,
    run_epoch,
    run_training,
    tabular_epoch,
    tabular_objective,
)


def tiny(variant="W", **trainer_kw):
    t = dict(n_epochs=2, episodes_per_epoch=1, eval_every=1, eval_episodes=2, states_every=1)
    t.update(trainer_kw)
    return RampConfig(
        env=EnvConfig(maze="easy", horizon=5),
        buffers=BufferConfig(M=50, beta=0.2),
        reward=RewardConfig(variant=variant, hidden=(8,), batch_size=16, steps_per_epoch=5),
        sac=SacConfig(hidden=(8,), batch_size=16, updates_per_env_step=1.0),
        trainer=TrainerConfig(**t),
    )


def test_intrinsic_weight():
    assert intrinsic_weight(0, 1000) == 1.0
    assert intrinsic_weight(500, 1000) == 0.0
    assert intrinsic_weight(250, 1000) == 0.5
    assert intrinsic_weight(900, 1000) == 0.0
    w = [intrinsic_weight(t, 997) for t in range(998)]
    assert all(a >= b for a, b in zip(w, w[1:]))
    with pytest.raises(ValueError):
        intrinsic_weight(1001, 1000)


def test_mix_reward():
    assert mix_reward(0.3, 5.0, 0.0, 1.0) == 0.3
    assert mix_reward(0.0, 2.5, 1.0, 1.0) == 2.5
    assert mix_reward(0.5, 2.0, 0.5, 0.1) == pytest.approx(0.6)


def test_present_buffer_holds_one_epoch():
    st = init_state(tiny())
    run_epoch(st)
    assert len(st.d_rho) == 5
    run_epoch(st)
    assert len(st.d_rho) == 5
    assert st.env_steps == 10


@pytest.mark.parametrize("variant", ["KL", "W"])
def test_epochs_are_deterministic(variant):
    a, b = init_state(tiny(variant)), init_state(tiny(variant))
    for _ in range(3):
        assert run_epoch(a).csv_row() == run_epoch(b).csv_row()


def test_relabel_uses_current_model():
    cfg = tiny(extrinsic=True, intrinsic_scale=0.5)
    st = init_state(cfg)
    run_epoch(st)
    rng = np.random.default_rng(0)
    batch = trainer.sample_union(st.d_rho, st.d_mu, rng, 32)
    mean, std = st.norm
    w = intrinsic_weight(st.env_steps, st.total_env_steps)
    for i in range(32):
        r_int = (trainer.reward_model_values(st.model, batch.s2[i : i + 1])[0] - mean) / std
        expected = mix_reward(batch.r[i], r_int, w, 0.5)
        assert relabel(st, batch)[i] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_pure_exploration_passes_zero_extrinsic(monkeypatch):
    seen = []
    real = trainer.mix_reward

    def spy(r_ext, r_int, w, alpha):
        seen.append(np.asarray(r_ext).copy())
        return real(r_ext, r_int, w, alpha)

    monkeypatch.setattr(trainer, "mix_reward", spy)
    run_training(tiny(extrinsic=False))
    assert seen and all(not r.any() for r in seen)


def test_zero_scale_skips_reward_model():
    logs = run_training(tiny(intrinsic_scale=0.0))
    assert all(math.isnan(l.rm_loss) for l in logs)
    assert all(l.mean_r_int == 0.0 for l in logs)


def test_n_zero_runs_one_epoch():
    assert len(run_training(tiny(n_epochs=0))) == 1


def test_run_directory(tmp_path):
    out = tmp_path / "nested" / "run"
    logs = run_training(tiny("KL"), out)
    assert len(logs) == 3
    lines = (out / "epochs.csv").read_text().splitlines()
    assert lines[0] == ",".join(EPOCH_COLUMNS)
    assert len(lines) == 4
    assert (out / "config.snapshot").is_file()
    assert (out / "states_epoch_3.csv").read_text().startswith("x,y,f_phi_value\n")
    assert len((out / "eval.csv").read_text().splitlines()) == 4
    ckpt = out / "checkpoints" / "epoch_3"
    assert {p.name for p in ckpt.iterdir()} == {"actor.bin", "q1.bin", "q2.bin", "q1_target.bin", "q2_target.bin", "reward.bin", "meta.toml"}


def test_partial_logs_survive_a_failure(tmp_path, monkeypatch):
    real = trainer.run_epoch
    calls = []

    def flaky(st):
        calls.append(1)
        if len(calls) == 2:
            raise FloatingPointError("injected")
        return real(st)

    monkeypatch.setattr(trainer, "run_epoch", flaky)
    with pytest.raises(FloatingPointError):
        run_training(tiny(), tmp_path)
    assert len((tmp_path / "epochs.csv").read_text().splitlines()) == 2


def test_wall_clock_is_opt_in():
    assert all(l.wall_s == 0.0 for l in run_training(tiny(n_epochs=0)))
    assert run_training(tiny(n_epochs=0, wall_clock=True))[0].wall_s > 0.0


def test_default_step_budget():
    st = init_state(tiny(n_epochs=4, episodes_per_epoch=2))
    assert st.total_env_steps == 5 * 2 * 5
    st = init_state(tiny(total_env_steps=123))
    assert st.total_env_steps == 123


def test_tabular_epoch_increases_objective():
    """Six-state chain: exhaustive policy search beats the previous policy's objective."""
    mdp = chain_mdp(6, T=6, slip=0.2)
    beta = 0.3
    mu = np.array([0.1, 0.1, 0.1, 0.2, 0.2, 0.3])
    pi = deterministic_policy([1] * 6, 2)  # runs right, into what the past already covers
    for epoch in range(5):
        before = tabular_objective(mdp, pi, mu, beta)
        step = tabular_epoch(mdp, mu, beta)
        if epoch == 0:
            assert step.objective > before + 1e-3
        else:
            assert step.objective >= before
        assert step.objective == pytest.approx(tabular_objective(mdp, step.policy, mu, beta))
        np.testing.assert_allclose(step.mu_next, beta * step.rho + (1 - beta) * mu)
        pi, mu = step.policy, step.mu_next
