"""Wasserstein intrinsic reward: a Kantorovich potential under temporal distance.

``f`` is pushed up on present states and down on beta-mixed states while a
Lagrange multiplier keeps ``|f(s) - f(s')| <= 1`` on observed transitions
(one environment step is one unit of temporal distance).  The relaxed
constraint term is ``E[max(|f(s) - f(s')| - 1, -eps)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .approximator import Adam, Mlp, adam_step, backward, forward, forward_cache, init_mlp
from .buffers import PastBuffer, PresentBuffer, sample_negative, sample_present, sample_union


@dataclass
class WRewardModel:
    params: Mlp
    beta: float
    lam: float = 30.0
    eps_relax: float = 0.05
    lr_lambda: float = 0.03
    lr: float = 3e-4
    batch_size: int = 256
    steps_per_epoch: int = 500
    opt: Adam = field(default=None)  # type: ignore[assignment]
    last_loss: float = float("nan")

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if self.lam < 0.0:
            raise ValueError("lambda must be >= 0")
        if not self.eps_relax > 0.0:
            raise ValueError("eps_relax must be > 0")
        if self.opt is None:
            self.opt = Adam.for_params(self.params.params(), lr=self.lr)


def make_w_model(obs_dim: int, beta: float, rng: np.random.Generator, hidden=(64, 64), **kw) -> WRewardModel:
    return WRewardModel(init_mlp((obs_dim, *hidden, 1), rng), beta, **kw)


def _as2d(x):
    return np.atleast_2d(np.asarray(x, dtype=np.float64))


def constraint_term(m: WRewardModel, s, s2) -> float:
    """``mean(max(|f(s) - f(s')| - 1, -eps))`` over transition pairs."""
    s, s2 = _as2d(s), _as2d(s2)
    df = forward(m.params, s)[:, 0] - forward(m.params, s2)[:, 0]
    return float(np.mean(np.maximum(np.abs(df) - 1.0, -m.eps_relax)))


def _terms_grads(m: WRewardModel, pos, neg, s, s2, penalty_sign: float):
    pos, neg, s, s2 = _as2d(pos), _as2d(neg), _as2d(s), _as2d(s2)
    if min(len(pos), len(neg), len(s)) == 0:
        raise ValueError("empty batch")
    if len(s) != len(s2):
        raise ValueError("transition pair arrays differ in length")
    npos, nneg, npair = len(pos), len(neg), len(s)
    out, cache = forward_cache(m.params, np.concatenate([pos, neg, s, s2]))
    f = out[:, 0]
    fp = f[:npos]
    fn = f[npos : npos + nneg]
    fa = f[npos + nneg : npos + nneg + npair]
    fb = f[npos + nneg + npair :]
    df = fa - fb
    slack = np.abs(df) - 1.0
    pen = np.maximum(slack, -m.eps_relax)
    value = -fp.mean() + fn.mean() + penalty_sign * m.lam * pen.mean()
    active = slack > -m.eps_relax  # the constant branch has zero gradient
    dpen = penalty_sign * m.lam * np.where(active, np.sign(df), 0.0) / npair
    dout = np.concatenate([np.full(npos, -1.0 / npos), np.full(nneg, 1.0 / nneg), dpen, -dpen])[:, None]
    grads, _ = backward(m.params, cache, dout)
    return float(value), grads


def w_loss(m: WRewardModel, pos, neg, s, s2) -> float:
    """``-E f(pos) + E f(neg) - lam * E max(|f(s) - f(s')| - 1, -eps)``."""
    return w_loss_grads(m, pos, neg, s, s2)[0]


def w_loss_grads(m: WRewardModel, pos, neg, s, s2):
    return _terms_grads(m, pos, neg, s, s2, -1.0)


def phi_objective_grads(m: WRewardModel, pos, neg, s, s2):
    """The potential's training objective: negated dual plus ``lam`` times the violation.

    ``f`` descends this; ``lam`` ascends the same violation term in
    :func:`lambda_update`.
    """
    return _terms_grads(m, pos, neg, s, s2, 1.0)


def lambda_update(m: WRewardModel, s, s2) -> float:
    """``lam <- max(0, lam + lr_lambda * E max(|f(s) - f(s')| - 1, -eps))``; returns the new value."""
    m.lam = max(0.0, m.lam + m.lr_lambda * constraint_term(m, s, s2))
    return m.lam


Sampler = Callable[[int], np.ndarray]
PairSampler = Callable[[int], tuple[np.ndarray, np.ndarray]]


def train_w_samplers(m: WRewardModel, sample_pos: Sampler, sample_neg: Sampler, sample_pairs: PairSampler, steps: int | None = None) -> float:
    """Alternate a multiplier step and a potential step; returns the mean objective."""
    steps = m.steps_per_epoch if steps is None else steps
    total = 0.0
    for _ in range(steps):
        s, s2 = sample_pairs(m.batch_size)
        lambda_update(m, s, s2)
        value, grads = phi_objective_grads(m, sample_pos(m.batch_size), sample_neg(m.batch_size), s, s2)
        if not math.isfinite(value):
            raise FloatingPointError(f"non-finite Wasserstein objective {value}")
        adam_step(m.opt, m.params.params(), grads)
        total += value
    if steps:
        m.last_loss = total / steps
    return m.last_loss


def train_w(m: WRewardModel, d_rho: PresentBuffer, d_mu: PastBuffer, rng: np.random.Generator, steps: int | None = None) -> float:
    def pairs(n):
        t = sample_union(d_rho, d_mu, rng, n)
        return t.s, t.s2

    return train_w_samplers(
        m,
        lambda n: sample_present(d_rho, rng, n).s2,
        lambda n: sample_negative(d_rho, d_mu, m.beta, rng, n)[0].s2,
        pairs,
        steps,
    )


def reward_w(m: WRewardModel, s):
    """The potential itself, unclamped."""
    r = forward(m.params, np.asarray(s, dtype=np.float64))[..., 0]
    return float(r) if np.ndim(r) == 0 else r


def dual_value(m: WRewardModel, pos, neg) -> float:
    return float(np.mean(reward_w(m, _as2d(pos))) - np.mean(reward_w(m, _as2d(neg))))
