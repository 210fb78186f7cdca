"""KL intrinsic reward: a contrastive classifier between present and mixed states.

Positives come from the present buffer, negatives from ``beta * D_rho +
(1 - beta) * D_mu``.  With balanced classes the Bayes-optimal logit is
``log(rho / (beta rho + (1 - beta) mu))``, which is the reward.  That ratio
never exceeds ``log(1/beta)``, so the reward is clamped there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .approximator import Adam, Mlp, adam_step, backward, forward, forward_cache, init_mlp
from .buffers import PastBuffer, PresentBuffer, sample_negative, sample_present


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class KlRewardModel:
    params: Mlp
    beta: float
    clamp_low: float = None  # type: ignore[assignment]
    clamp_high: float = None  # type: ignore[assignment]
    lr: float = 3e-4
    batch_size: int = 256
    steps_per_epoch: int = 500
    opt: Adam = field(default=None)  # type: ignore[assignment]
    last_loss: float = float("nan")

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        cap = math.log(1.0 / self.beta)
        if self.clamp_high is None:
            self.clamp_high = cap
        if self.clamp_low is None:
            self.clamp_low = -cap
        if not math.isfinite(self.clamp_low) or self.clamp_low > self.clamp_high:
            raise ValueError("clamp_low must be finite and below clamp_high")
        if self.opt is None:
            self.opt = Adam.for_params(self.params.params(), lr=self.lr)


def make_kl_model(obs_dim: int, beta: float, rng: np.random.Generator, hidden=(64, 64), **kw) -> KlRewardModel:
    return KlRewardModel(init_mlp((obs_dim, *hidden, 1), rng), beta, **kw)


def _check_balanced(pos, neg):
    if len(pos) != len(neg):
        raise ValueError(f"unbalanced batches: {len(pos)} positives vs {len(neg)} negatives")
    if len(pos) == 0:
        raise ValueError("empty batch")


def kl_loss_grads(m: KlRewardModel, pos, neg):
    """``mean softplus(-f(pos)) + mean softplus(f(neg))`` and its parameter gradient."""
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    _check_balanced(pos, neg)
    n = len(pos)
    out, cache = forward_cache(m.params, np.concatenate([pos, neg]))
    fp, fn = out[:n, 0], out[n:, 0]
    loss = float(np.mean(_softplus(-fp)) + np.mean(_softplus(fn)))
    if not math.isfinite(loss):
        raise FloatingPointError(f"non-finite KL loss {loss}")
    dout = np.concatenate([-_sigmoid(-fp), _sigmoid(fn)])[:, None] / n
    grads, _ = backward(m.params, cache, dout)
    return loss, grads


def kl_loss(m: KlRewardModel, pos, neg) -> float:
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    _check_balanced(pos, neg)
    fp = forward(m.params, pos)[:, 0]
    fn = forward(m.params, neg)[:, 0]
    return float(np.mean(_softplus(-fp)) + np.mean(_softplus(fn)))


Sampler = Callable[[int], np.ndarray]


def train_kl_samplers(m: KlRewardModel, sample_pos: Sampler, sample_neg: Sampler, steps: int | None = None) -> float:
    """Minimise the classifier loss for ``steps`` Adam steps; returns the mean loss."""
    steps = m.steps_per_epoch if steps is None else steps
    total = 0.0
    for _ in range(steps):
        loss, grads = kl_loss_grads(m, sample_pos(m.batch_size), sample_neg(m.batch_size))
        adam_step(m.opt, m.params.params(), grads)
        total += loss
    if steps:
        m.last_loss = total / steps
    return m.last_loss


def train_kl(m: KlRewardModel, d_rho: PresentBuffer, d_mu: PastBuffer, rng: np.random.Generator, steps: int | None = None) -> float:
    """Retrain on landing states: positives from ``D_rho``, negatives from the beta-mixture."""
    return train_kl_samplers(
        m,
        lambda n: sample_present(d_rho, rng, n).s2,
        lambda n: sample_negative(d_rho, d_mu, m.beta, rng, n)[0].s2,
        steps,
    )


def raw_logit(m: KlRewardModel, s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    out = forward(m.params, s)
    return out[..., 0]


def reward_kl(m: KlRewardModel, s):
    """Clamped logit; a float for one state, an array for a batch."""
    r = np.clip(raw_logit(m, s), m.clamp_low, m.clamp_high)
    return float(r) if np.ndim(r) == 0 else r
