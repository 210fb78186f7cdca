"""The exploration loop: sample, re-estimate, improve, remember.

Each epoch (1) refills the present buffer with episodes of the current
policy, (2) retrains the reward model to separate present from past, (3)
runs SAC on the union of both buffers with rewards relabeled by the current
reward model, and (4) pushes every new transition through the past buffer's
accept-reject rule.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import approximator, oracle
from .buffers import PastBuffer, PresentBuffer, past_init, past_update_batch, sample_union
from .config import RampConfig, serialize
from .envs import MazeSpec, TabularMDP, Transitions, exact_occupancy, load_maze, maze_step_batch, rollout, uniform_policy
from .metrics import CoverageGrid, coverage_update, coverage_value, histogram_entropy
from .reward_kl import KlRewardModel, make_kl_model, reward_kl, train_kl
from .reward_w import WRewardModel, make_w_model, reward_w, train_w
from .sac import SacAgent, act, actor_update, critic_update, make_agent, target_soft_update

EPOCH_COLUMNS = (
    "epoch",
    "env_steps",
    "coverage_pct",
    "entropy_est",
    "mean_r_int",
    "rm_loss",
    "q1_loss",
    "q2_loss",
    "actor_loss",
    "lambda",
    "wall_s",
)
# rows of the past buffer used for reward standardisation and scatter dumps
_REF_ROWS = 4096


@dataclass
class EpochLog:
    epoch: int
    env_steps: int
    coverage_pct: float
    entropy_est: float
    mean_r_int: float
    rm_loss: float
    q1_loss: float
    q2_loss: float
    actor_loss: float
    lam: float
    wall_s: float

    def csv_row(self) -> str:
        vals = [self.epoch, self.env_steps, self.coverage_pct, self.entropy_est, self.mean_r_int, self.rm_loss,
                self.q1_loss, self.q2_loss, self.actor_loss, self.lam, self.wall_s]
        return ",".join(str(v) if isinstance(v, int) else repr(float(v)) for v in vals)


def intrinsic_weight(t: int, total: int) -> float:
    """Linear decay from 1 at ``t = 0`` to 0 at ``t = total / 2``."""
    if total <= 0:
        raise ValueError("total must be positive")
    if not 0 <= t <= total:
        raise ValueError(f"step {t} outside [0, {total}]")
    return max(0.0, 1.0 - 2.0 * t / total)


def mix_reward(r_ext, r_int, w, alpha):
    return r_ext + w * alpha * r_int


@dataclass
class RunState:
    cfg: RampConfig
    spec: MazeSpec
    agent: SacAgent
    model: KlRewardModel | WRewardModel
    d_rho: PresentBuffer
    d_mu: PastBuffer
    grid: CoverageGrid
    rngs: dict
    epoch: int = 0
    env_steps: int = 0
    norm: tuple[float, float] = (0.0, 1.0)
    logs: list = field(default_factory=list)

    @property
    def total_env_steps(self) -> int:
        t = self.cfg.trainer
        if t.total_env_steps is not None:
            return t.total_env_steps
        return (t.n_epochs + 1) * t.episodes_per_epoch * self.spec.horizon


def _spawn_rngs(seed: int) -> dict:
    names = ("init", "buffer", "rollout", "reward", "sac", "eval")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(s) for n, s in zip(names, children)}


def load_env(cfg: RampConfig) -> MazeSpec:
    return load_maze(cfg.env.maze, dt=cfg.env.dt, horizon=cfg.env.horizon)


def init_state(cfg: RampConfig) -> RunState:
    spec = load_env(cfg)
    rngs = _spawn_rngs(cfg.trainer.seed)
    agent = make_agent(2, 2, cfg.sac, rngs["init"])
    r = cfg.reward
    common = dict(hidden=r.hidden, lr=r.lr, batch_size=r.batch_size, steps_per_epoch=r.steps_per_epoch)
    if r.variant == "KL":
        model = make_kl_model(2, cfg.buffers.beta, rngs["init"], clamp_low=r.clamp_low, **common)
    else:
        model = make_w_model(2, cfg.buffers.beta, rngs["init"], lam=r.lambda0, eps_relax=r.eps_relax,
                             lr_lambda=r.lr_lambda, **common)
    rand = uniform_policy(rngs["buffer"])
    d_mu = past_init(lambda n: rollout(spec, rand, n), spec.horizon, cfg.buffers.M, cfg.buffers.beta, rngs["buffer"])
    grid = CoverageGrid(spec.bounds[:2].copy(), spec.bounds[2:].copy(), cfg.trainer.coverage_resolution)
    return RunState(cfg, spec, agent, model, PresentBuffer(cfg.trainer.episodes_per_epoch), d_mu, grid, rngs)


def reward_model_values(model, s) -> np.ndarray:
    if isinstance(model, KlRewardModel):
        return np.asarray(reward_kl(model, s))
    return np.asarray(reward_w(model, s))


def intrinsic_reward(st: RunState, s2) -> np.ndarray:
    """Current reward model on landing states, standardised when configured."""
    mean, std = st.norm
    return (reward_model_values(st.model, s2) - mean) / std


def relabel(st: RunState, batch: Transitions) -> np.ndarray:
    """Training rewards for a replay batch under the current reward model and weight."""
    t = st.cfg.trainer
    r_ext = batch.r if t.extrinsic else np.zeros(len(batch))
    if t.intrinsic_scale == 0.0:
        return r_ext.astype(np.float64)
    w = intrinsic_weight(min(st.env_steps, st.total_env_steps), st.total_env_steps) if t.extrinsic else 1.0
    return mix_reward(r_ext, intrinsic_reward(st, batch.s2), w, t.intrinsic_scale)


def _reference_states(st: RunState) -> np.ndarray:
    m = len(st.d_mu)
    idx = np.linspace(0, m - 1, min(m, _REF_ROWS)).astype(np.int64)
    return np.concatenate([st.d_rho.data.s2, st.d_mu.s2[idx]])


def _update_norm(st: RunState) -> None:
    if not st.cfg.reward.normalize_effective:
        st.norm = (0.0, 1.0)
        return
    v = reward_model_values(st.model, _reference_states(st))
    st.norm = (float(v.mean()), float(max(v.std(), 1e-6)))


def collect(st: RunState) -> Transitions:
    rng = st.rngs["rollout"]
    return rollout(st.spec, lambda s: act(st.agent, s, False, rng), st.cfg.trainer.episodes_per_epoch)


def run_epoch(st: RunState) -> EpochLog:
    cfg = st.cfg
    t0 = time.perf_counter()
    # (1) fresh present buffer from the current policy
    st.d_rho.reset()
    trans = collect(st)
    st.d_rho.add_episodes(trans, cfg.trainer.episodes_per_epoch)
    st.env_steps += len(trans)
    coverage_update(st.grid, trans.s)
    coverage_update(st.grid, trans.s2)

    # (2) reward model: present vs past
    active = cfg.trainer.intrinsic_scale > 0.0
    rm_loss = math.nan
    if active:
        if isinstance(st.model, KlRewardModel):
            rm_loss = train_kl(st.model, st.d_rho, st.d_mu, st.rngs["reward"])
        else:
            rm_loss = train_w(st.model, st.d_rho, st.d_mu, st.rngs["reward"])
        _update_norm(st)
    mean_r_int = float(np.mean(intrinsic_reward(st, trans.s2))) if active else 0.0

    # (3) SAC on relabeled replay from both buffers
    n_updates = int(round(len(trans) * cfg.sac.updates_per_env_step))
    rng = st.rngs["sac"]
    q1s, q2s, acts = [], [], []
    for _ in range(n_updates):
        b = sample_union(st.d_rho, st.d_mu, rng, cfg.sac.batch_size)
        r = relabel(st, b)
        l1, l2 = critic_update(st.agent, (b.s, b.a, r, b.s2, b.done), rng)
        acts.append(actor_update(st.agent, b.s, rng))
        target_soft_update(st.agent)
        q1s.append(l1)
        q2s.append(l2)

    # (4) remember
    past_update_batch(st.d_mu, trans, st.rngs["buffer"], epoch=st.epoch + 1)

    st.epoch += 1
    mean = lambda xs: float(np.mean(xs)) if xs else math.nan  # noqa: E731
    log = EpochLog(
        epoch=st.epoch,
        env_steps=st.env_steps,
        coverage_pct=coverage_value(st.grid),
        entropy_est=histogram_entropy(st.d_mu.s2, st.grid),
        mean_r_int=mean_r_int,
        rm_loss=rm_loss,
        q1_loss=mean(q1s),
        q2_loss=mean(q2s),
        actor_loss=mean(acts),
        lam=st.model.lam if isinstance(st.model, WRewardModel) else math.nan,
        wall_s=time.perf_counter() - t0 if cfg.trainer.wall_clock else 0.0,
    )
    st.logs.append(log)
    return log


def evaluate(st: RunState) -> float:
    """Mean extrinsic return of the deterministic policy."""
    n = st.cfg.trainer.eval_episodes
    s = np.repeat(st.spec.start[None, :], n, axis=0)
    ret = np.zeros(n)
    for _ in range(st.spec.horizon):
        s, r = maze_step_batch(st.spec, s, act(st.agent, s, True, st.rngs["eval"]))
        ret += r
    return float(ret.mean())


def write_states(st: RunState, path: Path) -> None:
    """Scatter dump of present and (subsampled) past landing states with the current reward."""
    pts = _reference_states(st)
    f = reward_model_values(st.model, pts)
    with path.open("w") as fh:
        fh.write("x,y,f_phi_value\n")
        for (x, y), v in zip(pts, f):
            fh.write(f"{float(x)!r},{float(y)!r},{float(v)!r}\n")


def save_checkpoint(st: RunState, d: Path) -> None:
    d.mkdir(parents=True, exist_ok=True)
    for name in ("actor", "q1", "q2", "q1_target", "q2_target"):
        approximator.save_mlp(getattr(st.agent, name), d / f"{name}.bin")
    approximator.save_mlp(st.model.params, d / "reward.bin")
    lam = st.model.lam if isinstance(st.model, WRewardModel) else 0.0
    (d / "meta.toml").write_text(
        f'variant = "{st.cfg.reward.variant}"\nepoch = {st.epoch}\nenv_steps = {st.env_steps}\n'
        f"lambda = {lam!r}\nnorm_mean = {st.norm[0]!r}\nnorm_std = {st.norm[1]!r}\n"
    )


def run_training(cfg: RampConfig, out_dir=None, progress=None) -> list[EpochLog]:
    """Run ``n_epochs + 1`` epochs; optionally persist logs, scatter dumps and checkpoints."""
    st = init_state(cfg)
    out = Path(out_dir) if out_dir is not None else None
    t = cfg.trainer
    fh = fe = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.snapshot").write_text(serialize(cfg))
        fh = (out / "epochs.csv").open("w")
        fh.write(",".join(EPOCH_COLUMNS) + "\n")
        fe = (out / "eval.csv").open("w")
        fe.write("epoch,env_steps,mean_return\n")
    try:
        for _ in range(t.n_epochs + 1):
            log = run_epoch(st)
            last = st.epoch == t.n_epochs + 1
            if fh is not None:
                fh.write(log.csv_row() + "\n")
                fh.flush()
                if t.eval_every and (st.epoch % t.eval_every == 0 or last):
                    fe.write(f"{st.epoch},{st.env_steps},{evaluate(st)!r}\n")
                    fe.flush()
                if t.states_every and (st.epoch % t.states_every == 0 or last):
                    write_states(st, out / f"states_epoch_{st.epoch}.csv")
                if (t.checkpoint_every and st.epoch % t.checkpoint_every == 0) or last:
                    save_checkpoint(st, out / "checkpoints" / f"epoch_{st.epoch}")
            if progress is not None:
                progress(log)
    finally:
        if fh is not None:
            fh.close()
            fe.close()
    return st.logs


# --- exact tabular epoch ---------------------------------------------------


@dataclass
class TabularStep:
    policy: np.ndarray
    objective: float
    rho: np.ndarray
    mu_next: np.ndarray


def tabular_objective(mdp: TabularMDP, policy, mu, beta: float, lambda_A: float = 0.0) -> float:
    """``KL(rho || beta rho + (1 - beta) mu) + lambda_A H(pi)`` for the policy's exact occupancy."""
    return oracle.kl_objective(exact_occupancy(mdp, policy), mu, beta) + lambda_A * oracle.policy_entropy(policy)


def tabular_epoch(mdp: TabularMDP, mu, beta: float, lambda_A: float = 0.0) -> TabularStep:
    """One epoch with exact occupancies and exhaustive policy search in place of sampling and SAC."""
    best, best_val = None, -math.inf
    for pi in oracle.deterministic_policies(mdp):
        v = tabular_objective(mdp, pi, mu, beta, lambda_A)
        if v > best_val + 1e-15:
            best, best_val = pi, v
    rho = exact_occupancy(mdp, best)
    return TabularStep(best, best_val, rho, oracle.mixture(rho, mu, beta))
