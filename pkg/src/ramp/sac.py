"""Soft actor-critic with a tanh-squashed Gaussian actor and twin critics.

The entropy weight ``lambda_A`` is fixed.  All gradients are computed by
hand on top of :mod:`ramp.approximator`; noise for the reparameterised
samples can be passed in explicitly so that every update is a pure
function of (networks, batch, noise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .approximator import Adam, Mlp, adam_step, backward, forward, forward_cache, init_mlp, soft_update

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_LOG2 = np.log(2.0)
# keeps emitted actions strictly inside the open box once tanh rounds to +-1
_ACTION_EDGE = 1.0 - 1e-12


@dataclass
class SacConfig:
    gamma: float = 0.99
    tau: float = 0.005
    lambda_A: float = 0.1
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    batch_size: int = 256
    updates_per_env_step: float = 1.0
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if self.lambda_A < 0.0:
            raise ValueError("lambda_A must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class SacAgent:
    actor: Mlp
    q1: Mlp
    q2: Mlp
    q1_target: Mlp
    q2_target: Mlp
    config: SacConfig
    opt_actor: Adam = field(default=None)  # type: ignore[assignment]
    opt_q1: Adam = field(default=None)  # type: ignore[assignment]
    opt_q2: Adam = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        c = self.config
        if self.opt_actor is None:
            self.opt_actor = Adam.for_params(self.actor.params(), lr=c.lr_actor)
        if self.opt_q1 is None:
            self.opt_q1 = Adam.for_params(self.q1.params(), lr=c.lr_critic)
        if self.opt_q2 is None:
            self.opt_q2 = Adam.for_params(self.q2.params(), lr=c.lr_critic)

    @property
    def act_dim(self) -> int:
        return self.actor.n_out // 2

    @property
    def obs_dim(self) -> int:
        return self.actor.n_in


def make_agent(obs_dim: int, act_dim: int, config: SacConfig, rng: np.random.Generator) -> SacAgent:
    hidden = tuple(config.hidden)
    actor = init_mlp((obs_dim, *hidden, 2 * act_dim), rng)
    q1 = init_mlp((obs_dim + act_dim, *hidden, 1), rng)
    q2 = init_mlp((obs_dim + act_dim, *hidden, 1), rng)
    return SacAgent(actor, q1, q2, q1.copy(), q2.copy(), config)


def _softplus(x):
    return np.logaddexp(0.0, x)


def log1m_tanh_sq(u):
    """``log(1 - tanh(u)**2)`` without cancellation for large ``|u|``."""
    return 2.0 * (_LOG2 - u - _softplus(-2.0 * u))


def squashed_log_prob(u, mean, log_std):
    """Log-density of ``a = tanh(u)`` where ``u ~ N(mean, exp(log_std)**2)``; sums the last axis."""
    z = (u - mean) * np.exp(-log_std)
    per_dim = -0.5 * z * z - log_std - _HALF_LOG_2PI - log1m_tanh_sq(u)
    return per_dim.sum(axis=-1)


def _split_head(agent: SacAgent, out: np.ndarray):
    k = agent.act_dim
    mean = out[:, :k]
    raw_ls = out[:, k:]
    log_std = np.clip(raw_ls, LOG_STD_MIN, LOG_STD_MAX)
    inside = (raw_ls >= LOG_STD_MIN) & (raw_ls <= LOG_STD_MAX)
    return mean, log_std, inside


def policy_sample(agent: SacAgent, s, noise):
    """Reparameterised sample: returns ``(a, log_prob)`` for states ``s`` and unit-normal ``noise``."""
    out = forward(agent.actor, np.atleast_2d(s))
    mean, log_std, _ = _split_head(agent, out)
    u = mean + np.exp(log_std) * noise
    return np.tanh(u), squashed_log_prob(u, mean, log_std)


def act(agent: SacAgent, s, deterministic: bool, rng: np.random.Generator) -> np.ndarray:
    """Action(s) for one state or a batch; stochastic unless ``deterministic``."""
    s = np.asarray(s, dtype=np.float64)
    single = s.ndim == 1
    out = forward(agent.actor, np.atleast_2d(s))
    mean, log_std, _ = _split_head(agent, out)
    if deterministic:
        a = np.tanh(mean)
    else:
        a = np.tanh(mean + np.exp(log_std) * rng.standard_normal(mean.shape))
    a = np.clip(a, -_ACTION_EDGE, _ACTION_EDGE)
    return a[0] if single else a


def _q_in(s, a):
    return np.concatenate([s, a], axis=1)


def critic_targets(agent: SacAgent, r, s2, done, noise) -> np.ndarray:
    """Soft Bellman targets ``r + gamma (1 - done) (min Q_targ(s', a') - lambda_A log pi(a'|s'))``."""
    c = agent.config
    a2, logp2 = policy_sample(agent, s2, noise)
    x2 = _q_in(s2, a2)
    q_next = np.minimum(forward(agent.q1_target, x2)[:, 0], forward(agent.q2_target, x2)[:, 0])
    return r + c.gamma * (1.0 - done) * (q_next - c.lambda_A * logp2)


def critic_loss_grads(q: Mlp, s, a, y):
    """MSE of one critic against fixed targets, with its parameter gradient."""
    pred, cache = forward_cache(q, _q_in(s, a))
    err = pred[:, 0] - y
    n = err.shape[0]
    grads, _ = backward(q, cache, (2.0 / n) * err[:, None])
    return float(np.mean(err * err)), grads


def critic_update(agent: SacAgent, batch, rng: np.random.Generator, noise=None) -> tuple[float, float]:
    """One gradient step on both critics; ``batch = (s, a, r, s2, done)``."""
    s, a, r, s2, done = batch
    if len(s) == 0:
        raise ValueError("empty batch")
    if noise is None:
        noise = rng.standard_normal((len(s), agent.act_dim))
    y = critic_targets(agent, np.asarray(r, dtype=np.float64), s2, np.asarray(done, dtype=np.float64), noise)
    l1, g1 = critic_loss_grads(agent.q1, s, a, y)
    l2, g2 = critic_loss_grads(agent.q2, s, a, y)
    adam_step(agent.opt_q1, agent.q1.params(), g1)
    adam_step(agent.opt_q2, agent.q2.params(), g2)
    return l1, l2


def actor_loss_grads(agent: SacAgent, s, noise):
    """``mean(lambda_A log pi(a|s) - min(Q1, Q2)(s, a))`` and its actor gradient, ``a`` reparameterised."""
    lam = agent.config.lambda_A
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    n = s.shape[0]
    out, acache = forward_cache(agent.actor, s)
    mean, log_std, inside = _split_head(agent, out)
    std = np.exp(log_std)
    u = mean + std * noise
    a = np.tanh(u)
    logp = squashed_log_prob(u, mean, log_std)

    x = _q_in(s, a)
    q1v, c1 = forward_cache(agent.q1, x)
    q2v, c2 = forward_cache(agent.q2, x)
    pick1 = (q1v[:, 0] <= q2v[:, 0]).astype(np.float64)[:, None]
    qmin = np.where(pick1[:, 0] > 0, q1v[:, 0], q2v[:, 0])
    loss = float(np.mean(lam * logp - qmin))

    _, dx1 = backward(agent.q1, c1, pick1, need_input_grad=True)
    _, dx2 = backward(agent.q2, c2, 1.0 - pick1, need_input_grad=True)
    dq_da = (dx1 + dx2)[:, s.shape[1]:]

    # d/du of (lam*logp - Q): lam * 2 tanh(u) - dQ/da * (1 - a^2)
    du = lam * 2.0 * a - dq_da * (1.0 - a * a)
    d_mean = du
    d_logstd = (-lam + du * std * noise) * inside
    dout = np.concatenate([d_mean, d_logstd], axis=1) / n
    grads, _ = backward(agent.actor, acache, dout)
    return loss, grads


def actor_update(agent: SacAgent, s, rng: np.random.Generator, noise=None) -> float:
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    if len(s) == 0:
        raise ValueError("empty batch")
    if noise is None:
        noise = rng.standard_normal((len(s), agent.act_dim))
    loss, grads = actor_loss_grads(agent, s, noise)
    adam_step(agent.opt_actor, agent.actor.params(), grads)
    return loss


def target_soft_update(agent: SacAgent) -> None:
    tau = agent.config.tau
    soft_update(agent.q1_target, agent.q1, tau)
    soft_update(agent.q2_target, agent.q2, tau)


def policy_entropy_estimate(agent: SacAgent, s, rng: np.random.Generator, n_samples: int = 64) -> float:
    """Monte-Carlo estimate of ``E_s H[pi(.|s)]`` over the given states."""
    s = np.atleast_2d(np.asarray(s, dtype=np.float64))
    reps = np.repeat(s, n_samples, axis=0)
    _, logp = policy_sample(agent, reps, rng.standard_normal((len(reps), agent.act_dim)))
    return float(-np.mean(logp))
