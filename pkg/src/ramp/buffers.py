"""Present and past experience buffers.

The present buffer holds the episodes of the current epoch.  The past buffer
is a fixed-size pool of ``M`` transitions; each new transition enters with
probability ``beta`` and overwrites a uniformly chosen slot, so after many
epochs the pool is a geometric mixture of past occupancies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import kernels
from .envs import Transition, Transitions


@dataclass
class PresentBuffer:
    capacity: int  # episodes
    data: Transitions | None = None
    n_episodes: int = 0

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("present buffer capacity must be >= 1 episode")

    def reset(self) -> None:
        self.data = None
        self.n_episodes = 0

    def add_episodes(self, trans: Transitions, n_episodes: int) -> None:
        if self.n_episodes + n_episodes > self.capacity:
            raise ValueError(f"present buffer holds at most {self.capacity} episodes")
        self.data = trans if self.data is None else Transitions.concat([self.data, trans])
        self.n_episodes += n_episodes

    def __len__(self) -> int:
        return 0 if self.data is None else len(self.data)


@dataclass
class PastBuffer:
    s: np.ndarray
    a: np.ndarray
    s2: np.ndarray
    r: np.ndarray
    done: np.ndarray
    beta: float
    tag: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be in [0, 1]")
        if self.tag is None:
            self.tag = np.zeros(len(self.s), dtype=np.int64)

    @property
    def size(self) -> int:
        return len(self.s)

    def __len__(self) -> int:
        return len(self.s)

    def as_transitions(self) -> Transitions:
        return Transitions(self.s, self.a, self.s2, self.r, self.done)

    def take(self, idx) -> Transitions:
        return Transitions(self.s[idx], self.a[idx], self.s2[idx], self.r[idx], self.done[idx])


def past_init(collect: Callable[[int], Transitions], horizon: int, M: int, beta: float, rng: np.random.Generator) -> PastBuffer:
    """Fill ``M`` slots from random-policy rollouts.

    ``collect(n)`` returns ``n`` full episodes.  Enough episodes are run to
    cover ``M`` rows and a uniform subset of ``M`` rows is kept, so the pool
    is an unbiased sample of the random policy's occupancy.
    """
    if M < 1:
        raise ValueError("past buffer size M must be >= 1")
    n_ep = -(-M // horizon)
    pool = collect(n_ep)
    keep = np.sort(rng.choice(len(pool), size=M, replace=False))
    t = pool.take(keep)
    return PastBuffer(t.s.copy(), t.a.copy(), t.s2.copy(), t.r.copy(), t.done.copy(), beta)


def _slot(u: float, m: int) -> int:
    return min(int(u * m), m - 1)


def past_update_step(buf: PastBuffer, t: Transition, rng: np.random.Generator, epoch: int = 0) -> bool:
    """Accept ``t`` with probability ``beta`` into a uniformly random slot.

    Consumes exactly two uniforms per call (accept draw, slot draw) so that
    :func:`past_update_batch` reproduces a sequence of calls bit for bit.
    """
    u = rng.random(2)
    if not u[0] < buf.beta:
        return False
    k = _slot(u[1], buf.size)
    buf.s[k] = t.s
    buf.a[k] = t.a
    buf.s2[k] = t.s_next
    buf.r[k] = t.r_ext
    buf.done[k] = t.done
    buf.tag[k] = epoch
    return True


def past_update_batch(buf: PastBuffer, trans: Transitions, rng: np.random.Generator, epoch: int = 0) -> int:
    """Apply :func:`past_update_step` to every row of ``trans`` in order; returns accepted count."""
    n = len(trans)
    if n == 0:
        return 0
    u = rng.random((n, 2))
    slots = np.minimum((u[:, 1] * buf.size).astype(np.int64), buf.size - 1)
    writer = kernels.last_writer(np.ascontiguousarray(u[:, 0]), slots, float(buf.beta), buf.size)
    hit = writer >= 0
    src = writer[hit]
    buf.s[hit] = trans.s[src]
    buf.a[hit] = trans.a[src]
    buf.s2[hit] = trans.s2[src]
    buf.r[hit] = trans.r[src]
    buf.done[hit] = trans.done[src]
    buf.tag[hit] = epoch
    return int(np.count_nonzero(u[:, 0] < buf.beta))


def replacement_mass(beta: float, M: int, E: int) -> float:
    """Chance that a given slot is overwritten during an epoch of ``E`` pushes."""
    return 1.0 - (1.0 - beta / M) ** E


def sample_negative(d_rho: PresentBuffer, d_mu: PastBuffer, beta: float, rng: np.random.Generator, n: int):
    """Draw ``n`` rows from ``beta * D_rho + (1 - beta) * D_mu``.

    Returns ``(rows, from_rho)`` where ``from_rho`` marks rows taken from the
    present buffer.
    """
    if len(d_rho) == 0 or len(d_mu) == 0:
        raise ValueError("sample_negative needs two non-empty buffers")
    from_rho = rng.random(n) < beta
    i_rho = rng.integers(len(d_rho), size=n)
    i_mu = rng.integers(len(d_mu), size=n)
    pres = d_rho.data
    pick = lambda x, y: np.where(from_rho.reshape((-1,) + (1,) * (x.ndim - 1)), x[i_rho], y[i_mu])  # noqa: E731
    rows = Transitions(
        pick(pres.s, d_mu.s), pick(pres.a, d_mu.a), pick(pres.s2, d_mu.s2), pick(pres.r, d_mu.r), pick(pres.done, d_mu.done)
    )
    return rows, from_rho


def sample_present(d_rho: PresentBuffer, rng: np.random.Generator, n: int) -> Transitions:
    if len(d_rho) == 0:
        raise ValueError("present buffer is empty")
    return d_rho.data.take(rng.integers(len(d_rho), size=n))


def sample_union(d_rho: PresentBuffer, d_mu: PastBuffer, rng: np.random.Generator, n: int) -> Transitions:
    """Uniform rows from the concatenation of both buffers."""
    n_rho = len(d_rho)
    total = n_rho + len(d_mu)
    if total == 0:
        raise ValueError("both buffers are empty")
    idx = rng.integers(total, size=n)
    in_rho = idx < n_rho
    if n_rho == 0:
        return d_mu.take(idx)
    pres = d_rho.data
    j_rho = np.where(in_rho, idx, 0)
    j_mu = np.where(in_rho, 0, idx - n_rho)
    pick = lambda x, y: np.where(in_rho.reshape((-1,) + (1,) * (x.ndim - 1)), x[j_rho], y[j_mu])  # noqa: E731
    return Transitions(
        pick(pres.s, d_mu.s), pick(pres.a, d_mu.a), pick(pres.s2, d_mu.s2), pick(pres.r, d_mu.r), pick(pres.done, d_mu.done)
    )


def dump_csv(buf: PastBuffer, path) -> None:
    """Write landing-state coordinates and epoch tags, one slot per line."""
    d = buf.s2.shape[1]
    cols = ["x", "y"] if d == 2 else [f"s{k}" for k in range(d)]
    with Path(path).open("w") as fh:
        fh.write(",".join(cols + ["tag"]) + "\n")
        for row, tag in zip(buf.s2, buf.tag):
            fh.write(",".join(repr(float(v)) for v in row) + f",{int(tag)}\n")
