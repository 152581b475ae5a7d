"""Run configuration: presets, a key=value file format, and validation.

File format: one ``key = value`` per line, ``#`` starts a comment, blank
lines are ignored.  Keys are exactly the field names of :class:`RunConfig`.
Tuple/list fields take comma-separated values (``value_hidden = 128,128``).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

from .agents import AgentConfig

AGENTS = ("rbf-dqn", "rbf-ddpg")
SWEEP_AXES = ("n_centroids", "beta")


@dataclass
class RunConfig:
    preset: str = "desk"
    env: str = "pendulum"
    agent: str = "rbf-dqn"
    critic_delta: str = "qlearning"
    episodes: int = 200
    seeds: tuple = (0,)
    output: str = "runs/out"
    workers: int = 1
    eval_episodes: int = 10
    # agent
    n_centroids: int = 20
    beta: float = 1.0
    gamma: float = 0.99
    batch_size: int = 64
    target_rate: float = 0.005
    updates_per_episode: int = 200
    learning_rate: float = 3e-4
    rms_decay: float = 0.99
    rms_epsilon: float = 1e-8
    eps_start: float = 0.5
    eps_decay: float = 0.99
    eps_min: float = 0.05
    reward_clip: float = 20.0
    buffer_size: int = 500_000
    value_hidden: tuple = (128, 128)
    centroid_hidden: tuple = (128,)
    hidden_activation: str = "relu"
    actor_hidden: tuple = (128, 128)
    actor_learning_rate: float = 1e-4
    noise_scale: float = 0.1
    # sweep
    sweep_axis: str = "n_centroids"
    sweep_values: tuple = (5.0, 10.0, 20.0)
    # regression
    regression_samples: int = 500
    regression_centroids: int = 20
    regression_beta: float = 1.0
    regression_steps: int = 2000
    regression_learning_rate: float = 0.02
    # theorem checks
    theory_fixtures: int = 50

    def agent_config(self) -> AgentConfig:
        names = {f.name for f in fields(AgentConfig)}
        return AgentConfig(**{k: v for k, v in dataclasses.asdict(self).items() if k in names})

    def validate(self) -> "RunConfig":
        if self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {sorted(PRESETS)}, got {self.preset!r}")
        if self.agent not in AGENTS:
            raise ValueError(f"agent must be one of {AGENTS}, got {self.agent!r}")
        if self.critic_delta not in ("qlearning", "sarsa"):
            raise ValueError(f"critic_delta must be 'qlearning' or 'sarsa', got {self.critic_delta!r}")
        if self.sweep_axis not in SWEEP_AXES:
            raise ValueError(f"sweep_axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
        if self.hidden_activation not in ("relu", "tanh"):
            raise ValueError(f"hidden_activation must be 'relu' or 'tanh', got {self.hidden_activation!r}")
        for name in ("episodes", "workers", "eval_episodes", "regression_samples",
                     "regression_centroids", "regression_steps", "theory_fixtures"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.seeds:
            raise ValueError("seeds must list at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must not repeat")
        if not self.sweep_values or any(v <= 0 for v in self.sweep_values):
            raise ValueError("sweep_values must be positive")
        if self.sweep_axis == "n_centroids" and any(v != int(v) for v in self.sweep_values):
            raise ValueError("sweep_values for n_centroids must be integers")
        if self.regression_beta < 0:
            raise ValueError(f"regression_beta must be nonnegative, got {self.regression_beta}")
        if self.regression_learning_rate <= 0:
            raise ValueError("regression_learning_rate must be positive")
        if self.eps_min > self.eps_start:
            raise ValueError("eps_min must not exceed eps_start")
        if self.batch_size > self.buffer_size:
            raise ValueError("batch_size must not exceed buffer_size")
        self.agent_config().validate()
        return self

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"


PRESETS = {
    "desk": {},
    "paper": {
        "n_centroids": 100,
        "value_hidden": (512, 512, 512),
        "centroid_hidden": (512,),
        "actor_hidden": (512, 512),
        "buffer_size": 500_000,
        "batch_size": 256,
        "gamma": 0.99,
        "target_rate": 0.005,
        "updates_per_episode": 1000,
    },
}

_FIELDS = {f.name: f for f in fields(RunConfig)}


def _format(v) -> str:
    if isinstance(v, tuple):
        return ",".join(_format(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(name: str, raw: str):
    default = _FIELDS[name].default
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            if raw == "":
                return ()
            kind = type(default[0]) if default else int
            return tuple(kind(x.strip()) for x in raw.split(","))
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ValueError(f"cannot parse {name} = {raw!r}") from None
    return raw


def parse_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, raw = (p.strip() for p in line.split("=", 1))
        if key not in _FIELDS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise ValueError(f"override {pair!r} must look like key=value")
        key, raw = pair.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ValueError(f"unknown key {key!r}")
        out[key] = _coerce(key, raw)
    return out


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the preset, then file values, then overrides."""
    merged = dict(file_values or {})
    merged.update(overrides or {})
    preset = merged.get("preset", "desk")
    if preset not in PRESETS:
        raise ValueError(f"preset must be one of {sorted(PRESETS)}, got {preset!r}")
    values = dict(PRESETS[preset])
    values.update(merged)
    return RunConfig(**values).validate()


def parse_config(path: str | Path | None = None, overrides=None) -> RunConfig:
    file_values = parse_text(Path(path).read_text(encoding="utf-8")) if path else {}
    ov = overrides if isinstance(overrides, dict) else parse_overrides(overrides)
    return resolve(file_values, ov)


def provenance(cfg: RunConfig, command: str) -> dict:
    from . import __version__

    return {"command": command, "version": __version__, "seeds": list(cfg.seeds),
            "master_seed": cfg.seeds[0]}


def write_provenance(directory: Path, cfg: RunConfig, command: str):
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    (directory / "provenance.json").write_text(
        json.dumps(provenance(cfg, command), indent=2) + "\n", encoding="utf-8")
