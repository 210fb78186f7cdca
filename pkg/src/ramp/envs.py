"""Reward-free environments: 2-D point mazes and finite MDPs.

Maze dynamics are a single Euler step ``s' = s + a * dt`` followed by wall
collision resolution.  Walls are zero-thickness axis-aligned segments; a
step whose path touches a wall loses the displacement component normal to
that wall.  The extrinsic reward is the progress toward the goal,
``|g - s| - |g - s'|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import kernels

BUILTIN_MAZES = ("easy", "u", "hard")


class MazeFormatError(ValueError):
    """Malformed maze definition; the message carries the line number."""


@dataclass(frozen=True, eq=False)
class MazeSpec:
    walls: np.ndarray  # (W, 4) rows x1 y1 x2 y2 with x1 <= x2, y1 <= y2
    start: np.ndarray
    goal: np.ndarray
    dt: float = 0.01
    horizon: int = 200
    bounds: np.ndarray = field(default_factory=lambda: np.array([-1.0, -1.0, 1.0, 1.0]))
    name: str = ""

    def __post_init__(self):
        walls = np.ascontiguousarray(np.asarray(self.walls, dtype=np.float64).reshape(-1, 4))
        walls = _normalise_walls(walls)
        object.__setattr__(self, "walls", walls)
        object.__setattr__(self, "bounds", np.ascontiguousarray(np.asarray(self.bounds, dtype=np.float64)))
        object.__setattr__(self, "start", np.asarray(self.start, dtype=np.float64))
        object.__setattr__(self, "goal", np.asarray(self.goal, dtype=np.float64))
        for w in walls:
            if (w[0] != w[2]) == (w[1] != w[3]):
                raise ValueError(f"wall {tuple(w)} must be axis-aligned with positive length")
        b = self.bounds
        if b.shape != (4,) or not (b[0] < b[2] and b[1] < b[3]):
            raise ValueError("bounds must be x1 y1 x2 y2 with x1 < x2, y1 < y2")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError("horizon must be a positive integer")
        for label, p in (("start", self.start), ("goal", self.goal)):
            if p.shape != (2,) or not self.is_free(p):
                raise ValueError(f"{label} {tuple(p)} is outside the free space")

    def is_free(self, s) -> bool:
        s = np.asarray(s, dtype=np.float64)
        b = self.bounds
        if not (b[0] <= s[0] <= b[2] and b[1] <= s[1] <= b[3]):
            return False
        return not bool(on_wall(self.walls, s[None, :])[0])


def _normalise_walls(walls: np.ndarray) -> np.ndarray:
    out = walls.copy()
    out[:, 0] = np.minimum(walls[:, 0], walls[:, 2])
    out[:, 2] = np.maximum(walls[:, 0], walls[:, 2])
    out[:, 1] = np.minimum(walls[:, 1], walls[:, 3])
    out[:, 3] = np.maximum(walls[:, 1], walls[:, 3])
    return out


def on_wall(walls: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Per point, whether it lies on any wall segment (closed)."""
    pts = np.atleast_2d(pts)
    out = np.zeros(len(pts), dtype=bool)
    for x1, y1, x2, y2 in walls:
        out |= (x1 <= pts[:, 0]) & (pts[:, 0] <= x2) & (y1 <= pts[:, 1]) & (pts[:, 1] <= y2)
    return out


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray
    s_next: np.ndarray
    r_ext: float
    done: bool


@dataclass
class Transitions:
    """Column store of transitions, one row each."""

    s: np.ndarray
    a: np.ndarray
    s2: np.ndarray
    r: np.ndarray
    done: np.ndarray

    def __len__(self) -> int:
        return len(self.s)

    def row(self, i: int) -> Transition:
        return Transition(self.s[i].copy(), self.a[i].copy(), self.s2[i].copy(), float(self.r[i]), bool(self.done[i]))

    def take(self, idx) -> "Transitions":
        return Transitions(self.s[idx], self.a[idx], self.s2[idx], self.r[idx], self.done[idx])

    @staticmethod
    def concat(parts: list["Transitions"]) -> "Transitions":
        return Transitions(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("s", "a", "s2", "r", "done")))


# --- maze file format ------------------------------------------------------

_ARITY = {"bounds": 4, "wall": 4, "start": 2, "goal": 2, "dt": 1, "horizon": 1}


def parse_maze(text: str, name: str = "") -> MazeSpec:
    """Parse the line-oriented maze format (``#`` starts a comment)."""
    fields: dict[str, list[float]] = {}
    walls: list[list[float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, *args = line.split()
        if key not in _ARITY:
            raise MazeFormatError(f"line {lineno}: unknown directive {key!r}")
        if len(args) != _ARITY[key]:
            raise MazeFormatError(f"line {lineno}: {key} takes {_ARITY[key]} values, got {len(args)}")
        try:
            vals = [float(v) for v in args]
        except ValueError:
            raise MazeFormatError(f"line {lineno}: non-numeric value in {line!r}") from None
        if not all(np.isfinite(vals)):
            raise MazeFormatError(f"line {lineno}: non-finite value in {line!r}")
        if key == "wall":
            x1, y1, x2, y2 = vals
            if (x1 != x2) == (y1 != y2):
                raise MazeFormatError(f"line {lineno}: wall must be axis-aligned with positive length")
            walls.append(vals)
            continue
        if key in fields:
            raise MazeFormatError(f"line {lineno}: duplicate {key}")
        if key == "horizon" and (vals[0] != int(vals[0]) or vals[0] < 1):
            raise MazeFormatError(f"line {lineno}: horizon must be a positive integer")
        if key == "dt" and not vals[0] > 0:
            raise MazeFormatError(f"line {lineno}: dt must be positive")
        fields[key] = vals
    missing = [k for k in ("bounds", "start", "goal", "dt", "horizon") if k not in fields]
    if missing:
        raise MazeFormatError(f"missing directive(s): {', '.join(missing)}")
    try:
        return MazeSpec(
            walls=np.array(walls, dtype=np.float64).reshape(-1, 4),
            start=np.array(fields["start"]),
            goal=np.array(fields["goal"]),
            dt=fields["dt"][0],
            horizon=int(fields["horizon"][0]),
            bounds=np.array(fields["bounds"]),
            name=name,
        )
    except ValueError as exc:
        raise MazeFormatError(str(exc)) from None


def format_maze(spec: MazeSpec) -> str:
    lines = [f"bounds {' '.join(repr(float(v)) for v in spec.bounds)}"]
    lines += [f"wall {' '.join(repr(float(v)) for v in w)}" for w in spec.walls]
    lines.append(f"start {float(spec.start[0])!r} {float(spec.start[1])!r}")
    lines.append(f"goal {float(spec.goal[0])!r} {float(spec.goal[1])!r}")
    lines.append(f"dt {float(spec.dt)!r}")
    lines.append(f"horizon {spec.horizon}")
    return "\n".join(lines) + "\n"


def load_maze(path_or_name: str, dt: float | None = None, horizon: int | None = None) -> MazeSpec:
    """Load a maze file, or one of the built-ins by name (``easy``, ``u``, ``hard``)."""
    if path_or_name in BUILTIN_MAZES:
        text = resources.files("ramp").joinpath("mazes", f"{path_or_name}.maze").read_text()
        name = path_or_name
    else:
        text = Path(path_or_name).read_text()
        name = Path(path_or_name).stem
    spec = parse_maze(text, name=name)
    if dt is not None or horizon is not None:
        spec = MazeSpec(spec.walls, spec.start, spec.goal, dt if dt is not None else spec.dt,
                        horizon if horizon is not None else spec.horizon, spec.bounds, spec.name)
    return spec


# --- maze dynamics ---------------------------------------------------------


def goal_progress(spec: MazeSpec, s, s_next):
    s = np.asarray(s, dtype=np.float64)
    s_next = np.asarray(s_next, dtype=np.float64)
    return np.linalg.norm(spec.goal - s, axis=-1) - np.linalg.norm(spec.goal - s_next, axis=-1)


def maze_step(spec: MazeSpec, s, a) -> tuple[np.ndarray, float]:
    """One Euler step with collision handling; returns ``(s_next, r_ext)``."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if not spec.is_free(s):
        raise ValueError(f"state {tuple(s)} is not in free space")
    if a.shape != (2,) or np.any(np.abs(a) > 1.0):
        raise ValueError(f"action {tuple(a)} outside the action box [-1, 1]^2")
    nx, ny = kernels.step_one(s[0], s[1], a[0], a[1], spec.dt, spec.walls, spec.bounds)
    s_next = np.array([nx, ny])
    return s_next, float(goal_progress(spec, s, s_next))


def maze_step_batch(spec: MazeSpec, s, a) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`maze_step` without the free-space precondition check."""
    s = np.ascontiguousarray(s, dtype=np.float64)
    a = np.ascontiguousarray(np.clip(a, -1.0, 1.0), dtype=np.float64)
    s_next = kernels.step_batch(s, a, spec.dt, spec.walls, spec.bounds)
    return s_next, goal_progress(spec, s, s_next)


def maze_reset(spec: MazeSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Initial state; the start distribution is a Dirac at ``spec.start``."""
    return spec.start.copy()


def rollout(spec: MazeSpec, policy: Callable[[np.ndarray], np.ndarray], n_episodes: int) -> Transitions:
    """Run ``n_episodes`` full-horizon episodes in lockstep.

    ``policy`` maps a ``(n_episodes, 2)`` state batch to actions.  Rows are
    ordered episode-major (all of episode 0, then episode 1, ...).
    """
    T = spec.horizon
    s = np.repeat(maze_reset(spec)[None, :], n_episodes, axis=0)
    S = np.empty((n_episodes, T, 2))
    A = np.empty((n_episodes, T, 2))
    S2 = np.empty((n_episodes, T, 2))
    R = np.empty((n_episodes, T))
    for t in range(T):
        a = np.asarray(policy(s), dtype=np.float64)
        s2, r = maze_step_batch(spec, s, a)
        S[:, t], A[:, t], S2[:, t], R[:, t] = s, a, s2, r
        s = s2
    done = np.zeros((n_episodes, T))
    done[:, -1] = 1.0
    return Transitions(S.reshape(-1, 2), A.reshape(-1, 2), S2.reshape(-1, 2), R.reshape(-1), done.reshape(-1))


def uniform_policy(rng: np.random.Generator, act_dim: int = 2):
    return lambda s: rng.uniform(-1.0, 1.0, size=(len(s), act_dim))


# --- finite MDPs -----------------------------------------------------------


@dataclass
class TabularMDP:
    P: np.ndarray  # (S, A, S)
    delta0: np.ndarray
    T: int

    def __post_init__(self):
        self.P = np.asarray(self.P, dtype=np.float64)
        self.delta0 = np.asarray(self.delta0, dtype=np.float64)
        if self.P.ndim != 3 or self.P.shape[0] != self.P.shape[2]:
            raise ValueError("P must have shape (S, A, S)")
        if np.any(self.P < 0) or np.max(np.abs(self.P.sum(axis=2) - 1.0)) > 1e-12:
            raise ValueError("each P[s, a, :] must be a probability vector")
        if self.delta0.shape != (self.n_states,) or np.any(self.delta0 < 0) or abs(self.delta0.sum() - 1.0) > 1e-12:
            raise ValueError("delta0 must be a probability vector over states")
        if self.T < 1:
            raise ValueError("horizon T must be >= 1")

    @property
    def n_states(self) -> int:
        return self.P.shape[0]

    @property
    def n_actions(self) -> int:
        return self.P.shape[1]


def check_policy(mdp: TabularMDP, policy) -> np.ndarray:
    policy = np.asarray(policy, dtype=np.float64)
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"policy shape {policy.shape} != {(mdp.n_states, mdp.n_actions)}")
    if np.any(policy < 0) or np.max(np.abs(policy.sum(axis=1) - 1.0)) > 1e-12:
        raise ValueError("policy rows must be probability vectors")
    return policy


def state_transition_matrix(mdp: TabularMDP, policy) -> np.ndarray:
    return np.einsum("sa,sat->st", policy, mdp.P)


def exact_occupancy(mdp: TabularMDP, policy) -> np.ndarray:
    """Average state occupancy over ``t = 1..T`` starting from ``delta0``."""
    policy = check_policy(mdp, policy)
    M = state_transition_matrix(mdp, policy)
    d = mdp.delta0.copy()
    acc = np.zeros_like(d)
    for _ in range(mdp.T):
        acc += d
        d = d @ M
    return acc / mdp.T


def deterministic_policy(actions, n_actions: int) -> np.ndarray:
    actions = np.asarray(actions, dtype=np.int64)
    pol = np.zeros((len(actions), n_actions))
    pol[np.arange(len(actions)), actions] = 1.0
    return pol


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    # rows of probs are distributions; one draw per row
    c = probs.cumsum(axis=1)
    u = rng.random(len(probs))[:, None]
    return np.minimum((u >= c).sum(axis=1), probs.shape[1] - 1)


def tabular_rollout(mdp: TabularMDP, policy, n_episodes: int, rng: np.random.Generator) -> Transitions:
    """Sample episodes; states and actions are stored as float indices in 1-column arrays."""
    policy = check_policy(mdp, policy)
    T = mdp.T
    s = _categorical(rng, np.broadcast_to(mdp.delta0, (n_episodes, mdp.n_states)))
    S = np.empty((n_episodes, T), dtype=np.int64)
    A = np.empty_like(S)
    S2 = np.empty_like(S)
    for t in range(T):
        a = _categorical(rng, policy[s])
        s2 = _categorical(rng, mdp.P[s, a])
        S[:, t], A[:, t], S2[:, t] = s, a, s2
        s = s2
    done = np.zeros((n_episodes, T))
    done[:, -1] = 1.0
    f = lambda x: x.reshape(-1, 1).astype(np.float64)  # noqa: E731
    return Transitions(f(S), f(A), f(S2), np.zeros(n_episodes * T), done.reshape(-1))


def chain_mdp(n: int, T: int, slip: float = 0.0, delta0=None) -> TabularMDP:
    """Chain of ``n`` states; action 0 moves left, 1 moves right (with probability ``1 - slip``).

    A slipped step stays in place.  Moves off either end stay in place.
    """
    P = np.zeros((n, 2, n))
    for s in range(n):
        for a, step in ((0, -1), (1, 1)):
            t = min(max(s + step, 0), n - 1)
            P[s, a, t] += 1.0 - slip
            P[s, a, s] += slip
    if delta0 is None:
        delta0 = np.eye(n)[0]
    return TabularMDP(P, np.asarray(delta0, dtype=np.float64), T)
