"""Experiment configuration: flat `key value` text files, defaults, validation.

Every field has a default except `task`. The resolved configuration (all
defaults filled in) is what gets hashed and echoed into every output file,
so a record is always traceable to the exact settings that produced it.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .selection import METHOD_TOKENS
from .tasks import TaskKind


class ConfigError(ValueError):
    """Bad configuration file or out-of-range setting."""


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = ""  # navigation | foraging; required
    methods: tuple[str, ...] = METHOD_TOKENS
    runs_per_method: int = 30
    swarm_size: int = 50
    sim_steps: int = 500_000
    t_e_base: int = 2000
    t_e_jitter: int = 500
    t_l: int = 200
    sigma: float = 0.5
    weight_limit: float = 1.0
    food_items: int = 150
    tournament_k: int = 2
    arena_file: str = ""  # empty -> built-in default arena
    master_seed: int = 1
    sensor_range: float = 64.0
    comm_radius: float = 64.0
    v_max: float = 2.0
    theta_max: float = math.pi / 8
    agent_radius: float = 5.0
    food_radius: float = 5.0
    tail_fraction: float = 0.08
    budget_fraction: float = 0.92
    target_fraction: float = 0.8


_INT_KEYS = {"runs_per_method", "swarm_size", "sim_steps", "t_e_base", "t_e_jitter",
             "t_l", "food_items", "tournament_k", "master_seed"}
_FLOAT_KEYS = {"sigma", "weight_limit", "sensor_range", "comm_radius", "v_max", "theta_max",
               "agent_radius", "food_radius", "tail_fraction", "budget_fraction",
               "target_fraction"}
_STR_KEYS = {"task", "arena_file"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS | {"methods"}


def validate_config(cfg: ExperimentConfig) -> None:
    """Raise ConfigError naming the first offending key."""
    def bad(key, why):
        raise ConfigError(f"{key}: {why}")

    if not cfg.task:
        bad("task", "is required (navigation or foraging)")
    try:
        TaskKind.from_token(cfg.task)
    except ValueError as exc:
        bad("task", str(exc))
    if not cfg.methods:
        bad("methods", "at least one selection method is required")
    for m in cfg.methods:
        if m not in METHOD_TOKENS:
            bad("methods", f"unknown method {m!r}; valid: {', '.join(METHOD_TOKENS)}")
    if len(set(cfg.methods)) != len(cfg.methods):
        bad("methods", "duplicate method tokens")
    if cfg.runs_per_method < 1:
        bad("runs_per_method", "must be >= 1")
    if cfg.swarm_size < 1:
        bad("swarm_size", "must be >= 1")
    if cfg.sim_steps < 0:
        bad("sim_steps", "must be >= 0")
    if cfg.t_e_base < 1:
        bad("t_e_base", "must be >= 1")
    if not 0 <= cfg.t_e_jitter < cfg.t_e_base:
        bad("t_e_jitter", "must satisfy 0 <= jitter < t_e_base")
    if cfg.t_l < 1:
        bad("t_l", "must be >= 1")
    if cfg.sigma <= 0:
        bad("sigma", "must be > 0")
    if cfg.weight_limit < 1.0:
        bad("weight_limit", "must be >= 1 so initial genomes fit inside the bound")
    if cfg.food_items < 0:
        bad("food_items", "must be >= 0")
    if cfg.task == TaskKind.FORAGING.value and cfg.food_items < 1:
        bad("food_items", "foraging needs at least one food item")
    if cfg.tournament_k < 1:
        bad("tournament_k", "must be >= 1")
    if cfg.master_seed < 0:
        bad("master_seed", "must be >= 0")
    if cfg.sensor_range <= 0:
        bad("sensor_range", "must be > 0")
    if cfg.comm_radius <= 0:
        bad("comm_radius", "must be > 0")
    if cfg.v_max < 0:
        bad("v_max", "must be >= 0")
    if cfg.theta_max < 0:
        bad("theta_max", "must be >= 0")
    if cfg.agent_radius <= 0:
        bad("agent_radius", "must be > 0")
    if cfg.food_radius <= 0:
        bad("food_radius", "must be > 0")
    for key in ("tail_fraction", "budget_fraction", "target_fraction"):
        v = getattr(cfg, key)
        if not 0 < v <= 1:
            bad(key, "must be in (0, 1]")
    if cfg.arena_file and not Path(cfg.arena_file).is_file():
        bad("arena_file", f"file not found: {cfg.arena_file}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Parse `key value` lines with `#` comments; unknown or repeated keys are errors."""
    cfg = _parse_unvalidated(text, source)
    try:
        validate_config(cfg)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    """Load, default, and validate a config file.

    A relative arena_file is resolved against the config file's directory.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text()
    # resolve arena_file relative to the config before validation checks it
    cfg = _parse_unvalidated(text, str(path))
    if cfg.arena_file:
        arena_path = Path(cfg.arena_file)
        if not arena_path.is_absolute():
            arena_path = path.parent / arena_path
        cfg = replace(cfg, arena_file=str(arena_path))
    try:
        validate_config(cfg)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return cfg


def _parse_unvalidated(text: str, source: str) -> ExperimentConfig:
    seen: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise ConfigError(f"{source}:{lineno}: expected 'key value', got {raw!r}")
        key, value = parts[0], parts[1].strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: key {key!r} given twice")
        try:
            if key in _INT_KEYS:
                seen[key] = int(value)
            elif key in _FLOAT_KEYS:
                seen[key] = float(value)
            elif key == "methods":
                seen[key] = tuple(tok.strip() for tok in value.split(",") if tok.strip())
            else:
                seen[key] = value
        except ValueError:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {value!r}") from None
    return ExperimentConfig(**seen)


def config_text(cfg: ExperimentConfig) -> str:
    """Canonical resolved-config text; floats use repr so reload is exact.

    Empty string fields (an unset arena_file) are omitted, since `key` with
    no value does not parse and the empty string is their default anyway.
    """
    lines = []
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if f.name == "methods":
            lines.append(f"methods {','.join(v)}")
        elif v == "":
            continue
        else:
            lines.append(f"{f.name} {v!r}" if isinstance(v, float) else f"{f.name} {v}")
    return "\n".join(lines) + "\n"


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(config_text(cfg))


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable digest of the resolved configuration."""
    return hashlib.sha256(config_text(cfg).encode()).hexdigest()[:12]


def config_dict(cfg: ExperimentConfig) -> dict:
    return {f.name: (list(getattr(cfg, f.name)) if f.name == "methods" else getattr(cfg, f.name))
            for f in fields(cfg)}


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    if "methods" in d:
        d["methods"] = tuple(d["methods"])
    return ExperimentConfig(**d)


def derive_seed(master_seed: int, method: str, run_index: int) -> int:
    """Stable per-cell seed: adding a method never reshuffles other methods' seeds."""
    digest = hashlib.sha256(f"{master_seed}|{method}|{run_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")
