"""Experiment configuration: TOML with sections env, buffers, reward, sac, trainer.

Parsing is strict.  Unknown keys, wrong types and out-of-range values are
errors that name the offending ``section.key``.  Optional values that are
unset are simply omitted from the serialized form.
"""

from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .sac import SacConfig


class ConfigError(ValueError):
    pass


@dataclass
class EnvConfig:
    maze: str = "u"
    dt: float | None = None
    horizon: int | None = None


@dataclass
class BufferConfig:
    M: int = 100_000
    beta: float = 7e-3


@dataclass
class RewardConfig:
    variant: str = "W"
    hidden: tuple[int, ...] = (64, 64)
    lr: float = 3e-4
    batch_size: int = 256
    steps_per_epoch: int = 500
    clamp_low: float | None = None
    eps_relax: float = 0.05
    lr_lambda: float = 0.03
    lambda0: float = 30.0
    normalize: bool | None = None  # default: on for W, off for KL

    @property
    def normalize_effective(self) -> bool:
        return self.variant == "W" if self.normalize is None else self.normalize


@dataclass
class TrainerConfig:
    n_epochs: int = 99
    episodes_per_epoch: int = 10
    total_env_steps: int | None = None
    intrinsic_scale: float = 1.0
    extrinsic: bool = False
    seed: int = 0
    eval_every: int = 10
    eval_episodes: int = 5
    states_every: int = 10
    checkpoint_every: int = 0
    coverage_resolution: int = 50
    wall_clock: bool = False


@dataclass
class RampConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    buffers: BufferConfig = field(default_factory=BufferConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    sac: SacConfig = field(default_factory=SacConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)


_SECTIONS = {"env": EnvConfig, "buffers": BufferConfig, "reward": RewardConfig, "sac": SacConfig, "trainer": TrainerConfig}

_RULES: dict[str, Any] = {
    "env.dt": lambda v: v > 0 or "must be > 0",
    "env.horizon": lambda v: v >= 1 or "must be >= 1",
    "buffers.M": lambda v: v >= 1 or "must be >= 1",
    "buffers.beta": lambda v: 0 < v < 1 or "must be in (0, 1)",
    "reward.variant": lambda v: v in ("KL", "W") or "must be 'KL' or 'W'",
    "reward.hidden": lambda v: (len(v) >= 1 and all(h >= 1 for h in v)) or "must be a non-empty list of positive widths",
    "reward.lr": lambda v: v > 0 or "must be > 0",
    "reward.batch_size": lambda v: v >= 1 or "must be >= 1",
    "reward.steps_per_epoch": lambda v: v >= 0 or "must be >= 0",
    "reward.eps_relax": lambda v: v > 0 or "must be > 0",
    "reward.lr_lambda": lambda v: v >= 0 or "must be >= 0",
    "reward.lambda0": lambda v: v >= 0 or "must be >= 0",
    "sac.gamma": lambda v: 0 < v < 1 or "must be in (0, 1)",
    "sac.tau": lambda v: 0 < v <= 1 or "must be in (0, 1]",
    "sac.lambda_A": lambda v: v >= 0 or "must be >= 0",
    "sac.lr_actor": lambda v: v > 0 or "must be > 0",
    "sac.lr_critic": lambda v: v > 0 or "must be > 0",
    "sac.batch_size": lambda v: v >= 1 or "must be >= 1",
    "sac.updates_per_env_step": lambda v: v >= 0 or "must be >= 0",
    "sac.hidden": lambda v: (len(v) >= 1 and all(h >= 1 for h in v)) or "must be a non-empty list of positive widths",
    "trainer.n_epochs": lambda v: v >= 0 or "must be >= 0",
    "trainer.episodes_per_epoch": lambda v: v >= 1 or "must be >= 1",
    "trainer.total_env_steps": lambda v: v >= 1 or "must be >= 1",
    "trainer.intrinsic_scale": lambda v: v >= 0 or "must be >= 0",
    "trainer.seed": lambda v: v >= 0 or "must be >= 0",
    "trainer.eval_every": lambda v: v >= 0 or "must be >= 0",
    "trainer.eval_episodes": lambda v: v >= 1 or "must be >= 1",
    "trainer.states_every": lambda v: v >= 0 or "must be >= 0",
    "trainer.checkpoint_every": lambda v: v >= 0 or "must be >= 0",
    "trainer.coverage_resolution": lambda v: v >= 1 or "must be >= 1",
}


def _kind(tp) -> tuple[str, bool]:
    """Base kind of an annotation string and whether it is optional."""
    s = str(tp).replace(" ", "")
    optional = s.endswith("|None")
    s = s.removesuffix("|None")
    return s, optional


def _coerce(path: str, kind: str, v):
    if kind == "bool":
        if not isinstance(v, bool):
            raise ConfigError(f"{path}: expected a boolean, got {v!r}")
        return v
    if kind == "int":
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{path}: expected an integer, got {v!r}")
        return v
    if kind == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {v!r}")
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(f"{path}: must be finite")
        return v
    if kind == "str":
        if not isinstance(v, str):
            raise ConfigError(f"{path}: expected a string, got {v!r}")
        return v
    if kind == "tuple[int,...]":
        if not isinstance(v, list) or any(isinstance(h, bool) or not isinstance(h, int) for h in v):
            raise ConfigError(f"{path}: expected a list of integers, got {v!r}")
        return tuple(v)
    raise AssertionError(f"unhandled field kind {kind}")


def config_from_dict(data: dict) -> RampConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    for name in data:
        if name not in _SECTIONS:
            raise ConfigError(f"{name}: unknown section")
    sections = {}
    for name, cls in _SECTIONS.items():
        raw = data.get(name, {})
        if not isinstance(raw, dict):
            raise ConfigError(f"{name}: expected a table")
        known = {f.name: f for f in dataclasses.fields(cls)}
        for key in raw:
            if key not in known:
                raise ConfigError(f"{name}.{key}: unknown key")
        values = {}
        for key, f in known.items():
            if key not in raw:
                continue
            path = f"{name}.{key}"
            kind, _ = _kind(f.type)
            v = _coerce(path, kind, raw[key])
            rule = _RULES.get(path)
            if rule is not None:
                verdict = rule(v)
                if verdict is not True:
                    raise ConfigError(f"{path}: {verdict}, got {v!r}")
            values[key] = v
        try:
            sections[name] = cls(**values)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
    cfg = RampConfig(**sections)
    if cfg.reward.clamp_low is not None and cfg.reward.clamp_low > math.log(1.0 / cfg.buffers.beta):
        raise ConfigError("reward.clamp_low: must not exceed log(1/beta)")
    return cfg


def parse_config_text(text: str) -> RampConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed TOML: {exc}") from None
    return config_from_dict(data)


def parse_config(path) -> RampConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"{p}: config file not found")
    return parse_config_text(p.read_text())


def config_to_dict(cfg: RampConfig) -> dict:
    out = {}
    for name in _SECTIONS:
        sec = getattr(cfg, name)
        d = {}
        for f in dataclasses.fields(sec):
            v = getattr(sec, f.name)
            if v is None:
                continue
            d[f.name] = list(v) if isinstance(v, tuple) else v
        out[name] = d
    return out


def serialize(cfg: RampConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))
