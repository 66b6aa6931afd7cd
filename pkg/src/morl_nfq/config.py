"""Flat ``section.key = value`` experiment configuration.

Blank lines and ``#`` comments are ignored. Every key must be known; a
typo in a hyperparameter is an error rather than a silently ignored line.
Tuple-valued keys use ``,`` between numbers and ``;`` between pairs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .deepdraw import SurrogateParams
from .morl import OFF_POLICY, ON_POLICY, SCALARIZERS, TaskConfig, WeightVector
from .neural import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    surrogate: SurrogateParams = field(default_factory=SurrogateParams)
    task: TaskConfig = field(default_factory=TaskConfig)
    # desk-scale training budget; see README for the runtime trade-off
    train: TrainConfig = field(default_factory=lambda: TrainConfig(max_iterations=60, dtype="float32"))
    scalarization: str = "harmonic"
    sequence_length: int = 4
    seeds: int = 20
    base_seed: int = 0
    baseline: bool = True
    # explicit per-task weights; empty -> drawn per the protocol
    weights: tuple = ()
    out: str = "runs"
    workers: int = 1

    def __post_init__(self):
        if self.scalarization not in SCALARIZERS:
            raise ConfigError(f"unknown scalarization {self.scalarization!r}")
        if self.sequence_length < 1 or self.seeds < 1 or self.workers < 1:
            raise ConfigError("sequence_length, seeds and workers must be >= 1")
        if self.weights and len(self.weights) != self.sequence_length:
            raise ConfigError("experiment.weights must list one pair per task in the sequence")

    @property
    def update_rule(self) -> str:
        return self.task.update_rule

    def task_weights(self) -> list[WeightVector | None]:
        if not self.weights:
            return [None] * self.sequence_length
        return [WeightVector(float(a), float(b)) for a, b in self.weights]


_SECTIONS = {"surrogate": SurrogateParams, "task": TaskConfig, "train": TrainConfig}
_SKIP = {("surrogate", "reward_calibration"), ("task", "weights")}
_EXPERIMENT_KEYS = [f.name for f in fields(ExperimentConfig) if f.name not in _SECTIONS]


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        parts = []
        for item in value:
            parts.append(",".join(_format(v) for v in item) if isinstance(item, tuple) else _format(item))
        return ";".join(parts)
    return str(value)


def _parse(raw: str, like, key: str):
    try:
        if isinstance(like, bool):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        if isinstance(like, int):
            return int(raw)
        if isinstance(like, float):
            return float(raw)
        if isinstance(like, tuple):
            if not raw:
                return ()
            items = [tuple(float(v) for v in part.split(",")) for part in raw.split(";")]
            nested = bool(like) and isinstance(like[0], tuple)
            return tuple(items) if nested else tuple(v for item in items for v in item)
        return raw
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from exc


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    base = ExperimentConfig()
    sections = {name: {} for name in _SECTIONS}
    top = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        section, _, name = key.partition(".")
        if section in _SECTIONS and name:
            current = getattr(base, section)
            if (section, name) in _SKIP or name not in {f.name for f in fields(current)}:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            value = _parse(raw, getattr(current, name), key)
            if section == "task" and name == "update_rule":
                value = {"off": OFF_POLICY, "on": ON_POLICY}.get(value, value)
            sections[section][name] = value
        elif section == "experiment" and name in _EXPERIMENT_KEYS:
            like = getattr(base, name)
            if name == "weights":
                like = ((0.0, 0.0),)
            top[name] = _parse(raw, like, key)
        else:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
    try:
        built = {name: replace(getattr(base, name), **vals) for name, vals in sections.items()}
        return replace(base, **built, **top)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    return parse_config(text, str(path))


def dump_config(cfg: ExperimentConfig) -> str:
    """Render every key, so the output alone reproduces ``cfg``."""
    lines = []
    for section in _SECTIONS:
        obj = getattr(cfg, section)
        for f in fields(obj):
            if (section, f.name) in _SKIP:
                continue
            lines.append(f"{section}.{f.name} = {_format(getattr(obj, f.name))}")
    for name in _EXPERIMENT_KEYS:
        lines.append(f"experiment.{name} = {_format(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def with_overrides(cfg: ExperimentConfig, *, seeds=None, update=None, out=None, seed=None,
                   workers=None) -> ExperimentConfig:
    top = {}
    if seeds is not None:
        top["seeds"] = seeds
    if out is not None:
        top["out"] = str(out)
    if seed is not None:
        top["base_seed"] = seed
    if workers is not None:
        top["workers"] = workers
    task = cfg.task
    if update is not None:
        task = replace(task, update_rule={"off": OFF_POLICY, "on": ON_POLICY}.get(update, update))
    return replace(cfg, task=task, **top)
