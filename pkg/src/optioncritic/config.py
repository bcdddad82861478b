"""Run configuration files.

Flat ``key = value`` lines grouped under ``[run]``, ``[env]``, ``[agent]``
and ``[actor]`` sections. ``#`` starts a comment. Every key must be known:
a misspelt hyperparameter is a hard error, reported with its line number.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

from .actor import ActorConfig
from .agent import AgentConfig


class ConfigError(ValueError):
    pass


ENVS = ("fourrooms", "pinball", "mdp-file")


@dataclass
class EnvConfig:
    relocation_episode: int = 1000
    slip: float = 1.0 / 3.0
    fourier_order: int = 3
    map_file: str = ""  # four-rooms map, pinball maze or tabular MDP, depending on env


@dataclass
class RunConfig:
    env: str = "fourrooms"
    n_runs: int = 1
    seed: int = 0
    output_dir: str = "out"
    checkpoint_every: int = 0  # episodes between intermediate checkpoints; 0 keeps only the final one
    eval_episodes: int = 100
    env_cfg: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)

    def run_agent_config(self, run: int) -> AgentConfig:
        return dataclasses.replace(self.agent, seed=self.seed + run)


_RUN_KEYS = ("env", "n_runs", "seed", "output_dir", "checkpoint_every", "eval_episodes")


def _section_fields(section: str) -> dict:
    cls = {"run": RunConfig, "env": EnvConfig, "agent": AgentConfig, "actor": ActorConfig}[section]
    names = {f.name: f.type for f in dataclasses.fields(cls)}
    if section == "run":
        names = {k: names[k] for k in _RUN_KEYS}
    if section == "agent":
        names.pop("actor")
        names.pop("seed")  # per-run seeds derive from [run] seed
    return names


def _convert(kind, text: str):
    kind = kind if isinstance(kind, str) else kind.__name__
    if kind == "bool":
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text


def loads(text: str) -> RunConfig:
    values: dict[str, dict] = {"run": {}, "env": {}, "agent": {}, "actor": {}}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or line[1:-1].strip() not in values:
                raise ConfigError(f"line {lineno}: unknown section {line!r}")
            section = line[1:-1].strip()
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if section is None:
            raise ConfigError(f"line {lineno}: key {key!r} appears before any section")
        fields = _section_fields(section)
        if key not in fields:
            raise ConfigError(f"line {lineno}: unknown key {key!r} in [{section}]")
        if key in values[section]:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} in [{section}]")
        try:
            values[section][key] = _convert(fields[key], value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None

    try:
        actor = ActorConfig(**values["actor"])
        agent = AgentConfig(actor=actor, **values["agent"])
        env_cfg = EnvConfig(**values["env"])
        cfg = RunConfig(env_cfg=env_cfg, agent=agent, **values["run"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.env not in ENVS:
        raise ConfigError(f"unknown env {cfg.env!r}; expected one of {', '.join(ENVS)}")
    if cfg.env == "mdp-file" and not cfg.env_cfg.map_file:
        raise ConfigError("env = mdp-file needs [env] map_file")
    if cfg.n_runs < 1:
        raise ConfigError("n_runs must be at least 1")
    if cfg.agent.episodes < 0 or cfg.checkpoint_every < 0 or cfg.eval_episodes < 0:
        raise ConfigError("episode counts must be non-negative")
    return cfg


def load(path) -> RunConfig:
    """Read a config file; a relative ``map_file`` is taken relative to the file's directory."""
    with open(path) as fh:
        cfg = loads(fh.read())
    mf = cfg.env_cfg.map_file
    if mf and not os.path.isabs(mf):
        cfg.env_cfg.map_file = os.path.join(os.path.dirname(os.path.abspath(path)), mf)
    return cfg
