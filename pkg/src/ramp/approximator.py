"""Small dense networks with hand-written backpropagation and Adam.

Everything is float64 numpy.  A network is a plain record of weight and
bias arrays; forward/backward are free functions so that evaluation
copies can be shared without hidden state.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

ACTIVATIONS = ("relu", "tanh")
_MAGIC = b"RAMPMLP1"


@dataclass
class Mlp:
    """Feed-forward net; hidden layers use ``activation``, the output is linear.

    ``weights[i]`` has shape ``(sizes[i], sizes[i + 1])`` so a batch ``x`` of
    shape ``(B, sizes[0])`` maps to ``x @ W + b``.
    """

    sizes: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.weights) != len(self.sizes) - 1 or len(self.biases) != len(self.weights):
            raise ValueError("layer count does not match sizes")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.sizes[i], self.sizes[i + 1]) or b.shape != (self.sizes[i + 1],):
                raise ValueError(f"layer {i}: shapes {w.shape}, {b.shape} inconsistent with sizes")

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in canonical order ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "Mlp":
        return Mlp(
            self.sizes,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.params())


def init_mlp(sizes: Sequence[int], rng: np.random.Generator, activation: str = "relu") -> Mlp:
    """Uniform fan-in initialisation, ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return Mlp(tuple(sizes), weights, biases, activation)


def zeros_like_mlp(p: Mlp) -> Mlp:
    return Mlp(p.sizes, [np.zeros_like(w) for w in p.weights], [np.zeros_like(b) for b in p.biases], p.activation)


def _as_batch(p: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != p.n_in:
        raise ValueError(f"input shape {x.shape} does not match input width {p.n_in}")
    return x


def forward(p: Mlp, x) -> np.ndarray:
    """Evaluate the network on a batch ``(B, n_in)`` (or a single vector)."""
    single = np.ndim(x) == 1
    h = _as_batch(p, x)
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0) if p.activation == "relu" else np.tanh(h)
    return h[0] if single else h


def forward_cache(p: Mlp, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Like :func:`forward` for batches, also returning layer inputs for backprop."""
    h = _as_batch(p, x)
    cache = [h]
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0) if p.activation == "relu" else np.tanh(h)
            cache.append(h)
    return h, cache


def backward(p: Mlp, cache: list[np.ndarray], dout: np.ndarray, need_input_grad: bool = False):
    """Backpropagate ``dout = dL/d(output)`` through a cached forward pass.

    Returns ``(grads, dx)`` where ``grads`` follows :meth:`Mlp.params` order and
    ``dx`` is ``dL/d(input)`` (``None`` unless requested).
    """
    n = len(p.weights)
    grads: list[np.ndarray] = [None] * (2 * n)  # type: ignore[list-item]
    delta = np.asarray(dout, dtype=np.float64)
    for i in range(n - 1, -1, -1):
        a_in = cache[i]
        grads[2 * i] = a_in.T @ delta
        grads[2 * i + 1] = delta.sum(axis=0)
        if i == 0 and not need_input_grad:
            return grads, None
        delta = delta @ p.weights[i].T
        if i > 0:
            # cache[i] is the post-activation output of hidden layer i-1
            if p.activation == "relu":
                delta = delta * (a_in > 0.0)
            else:
                delta = delta * (1.0 - a_in * a_in)
    return grads, delta


LossFn = Callable[[np.ndarray], tuple[float, np.ndarray]]


def grad(loss_fn: LossFn, p: Mlp, batch) -> tuple[float, list[np.ndarray]]:
    """Loss and parameter gradient for ``loss_fn`` applied to the net's output.

    ``loss_fn(out)`` must return ``(loss, dloss/dout)``.
    """
    out, cache = forward_cache(p, batch)
    loss, dout = loss_fn(out)
    if not np.isfinite(loss):
        raise FloatingPointError(f"non-finite loss {loss}")
    grads, _ = backward(p, cache, dout)
    return float(loss), grads


@dataclass
class Adam:
    """Adam moments for one parameter list."""

    lr: float = 3e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], **kw) -> "Adam":
        return cls(m=[np.zeros_like(q) for q in params], v=[np.zeros_like(q) for q in params], **kw)


def adam_step(opt: Adam, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
    """In-place bias-corrected Adam update of ``params``."""
    if not opt.m:
        opt.m = [np.zeros_like(q) for q in params]
        opt.v = [np.zeros_like(q) for q in params]
    if len(grads) != len(params) or len(opt.m) != len(params):
        raise ValueError("gradient/parameter/moment lengths differ")
    opt.t += 1
    b1, b2 = opt.beta1, opt.beta2
    c1 = 1.0 - b1**opt.t
    c2 = 1.0 - b2**opt.t
    for q, g, m, v in zip(params, grads, opt.m, opt.v):
        if g.shape != q.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {q.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        q -= opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps)


def soft_update(target: Mlp, source: Mlp, tau: float) -> None:
    """``target <- tau * source + (1 - tau) * target`` in place."""
    for t, s in zip(target.params(), source.params()):
        t *= 1.0 - tau
        t += tau * s


# --- checkpoints -----------------------------------------------------------
# layout: magic | u32 n_sizes | u32 sizes[n] | u8 len | activation ascii |
#         per layer: W (row-major) then b, all float64 little-endian


def dumps_mlp(p: Mlp) -> bytes:
    act = p.activation.encode("ascii")
    head = _MAGIC + struct.pack(f"<I{len(p.sizes)}I", len(p.sizes), *p.sizes) + struct.pack("<B", len(act)) + act
    body = b"".join(np.ascontiguousarray(q, dtype="<f8").tobytes() for q in p.params())
    return head + body


def loads_mlp(data: bytes) -> Mlp:
    if data[:8] != _MAGIC:
        raise ValueError("not a network checkpoint")
    off = 8
    (n,) = struct.unpack_from("<I", data, off)
    off += 4
    sizes = struct.unpack_from(f"<{n}I", data, off)
    off += 4 * n
    (alen,) = struct.unpack_from("<B", data, off)
    off += 1
    activation = data[off : off + alen].decode("ascii")
    off += alen
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(data, dtype="<f8", count=fan_in * fan_out, offset=off).reshape(fan_in, fan_out)
        off += 8 * fan_in * fan_out
        b = np.frombuffer(data, dtype="<f8", count=fan_out, offset=off)
        off += 8 * fan_out
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if off != len(data):
        raise ValueError(f"trailing bytes in checkpoint ({len(data) - off})")
    return Mlp(tuple(sizes), weights, biases, activation)


def save_mlp(p: Mlp, path) -> None:
    Path(path).write_bytes(dumps_mlp(p))


def load_mlp(path) -> Mlp:
    return loads_mlp(Path(path).read_bytes())
