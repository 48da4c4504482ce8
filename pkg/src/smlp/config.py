"""``key = value`` run configuration covering every tunable default.

Keys are dotted: ``train.epochs``, ``optim.method``, ``features.trend_window``,
``synthetic.ramp_days`` and so on map onto the matching dataclass field.
A few shorthands are accepted as well: ``counts.<class>``, ``noise.sigma``,
``seed``, ``model.units``, ``baseline.mlp_units``, ``split.*`` and
``compare.*``.  Unit shapes are written ``28,64,64; 64,64,64; 64,32,6``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .datamodel import EventClass
from .features import FeatureConfig
from .harness import DEFAULT_FRACTIONS, SINGLE_MLP_UNITS, TrainConfig
from .network import DEFAULT_UNITS
from .optim import Method, OptimizerError, OptimizerSpec
from .synthetic import SyntheticSpec


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    synthetic: SyntheticSpec = field(default_factory=SyntheticSpec)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    optim: OptimizerSpec = field(default_factory=OptimizerSpec)
    units: tuple = DEFAULT_UNITS
    mlp_units: tuple = SINGLE_MLP_UNITS
    split_seed: int = 7
    stratified: bool = True
    fractions: tuple[float, ...] = DEFAULT_FRACTIONS
    compare_epochs: int = 200
    compare_methods: tuple[Method, ...] = tuple(Method)


def parse_units(text: str) -> tuple[tuple[int, ...], ...]:
    units = []
    for chunk in text.split(";"):
        if chunk.strip():
            units.append(tuple(int(d) for d in chunk.replace(",", " ").split()))
    if not units:
        raise ValueError("no unit shapes given")
    return tuple(units)


def format_units(units) -> str:
    return "; ".join(",".join(str(d) for d in u) for u in units)


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _coerce(value: str, current: Any):
    if isinstance(current, bool):
        return _parse_bool(value)
    if isinstance(current, Method):
        return Method(value.strip().lower())
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    if isinstance(current, tuple):
        return tuple(type(current[0])(v) for v in value.replace(",", " ").split())
    return value.strip()


_SECTIONS = {"synthetic": "synthetic", "features": "features", "train": "train", "optim": "optim"}


def _set_field(cfg: RunConfig, section: str, name: str, raw: str) -> None:
    obj = getattr(cfg, section)
    names = {f.name for f in dataclasses.fields(obj)}
    if name not in names:
        raise ConfigError(f"unknown key {section}.{name}")
    value = _coerce(raw, getattr(obj, name))
    if dataclasses.is_dataclass(obj) and getattr(type(obj), "__dataclass_params__").frozen:
        setattr(cfg, section, dataclasses.replace(obj, **{name: value}))
    else:
        setattr(obj, name, value)


def apply(cfg: RunConfig, key: str, raw: str) -> None:
    """Set one dotted ``key`` from its string value; raises ConfigError."""
    key = key.strip()
    head, _, rest = key.partition(".")
    try:
        if key == "seed":
            seed = int(raw)
            cfg.synthetic = dataclasses.replace(cfg.synthetic, seed=seed)
            cfg.split_seed = seed
            cfg.train.seed = seed
        elif head == "counts" and rest:
            counts = list(cfg.synthetic.counts)
            counts[EventClass.from_name(rest)] = int(raw)
            cfg.synthetic = dataclasses.replace(cfg.synthetic, counts=tuple(counts))
        elif key == "noise.sigma":
            cfg.synthetic = dataclasses.replace(cfg.synthetic, sigma=float(raw))
        elif key == "model.units":
            cfg.units = parse_units(raw)
        elif key == "baseline.mlp_units":
            cfg.mlp_units = parse_units(raw)
        elif key == "split.seed":
            cfg.split_seed = int(raw)
        elif key == "split.stratified":
            cfg.stratified = _parse_bool(raw)
        elif key == "compare.fractions":
            cfg.fractions = tuple(float(v) for v in raw.replace(",", " ").split())
        elif key == "compare.epochs":
            cfg.compare_epochs = int(raw)
        elif key == "compare.methods":
            cfg.compare_methods = tuple(Method(v.strip().lower()) for v in raw.replace(",", " ").split())
        elif head in _SECTIONS and rest:
            _set_field(cfg, _SECTIONS[head], rest, raw)
        else:
            raise ConfigError(f"unknown key {key}")
    except ConfigError:
        raise
    except (ValueError, KeyError, IndexError, OptimizerError) as exc:
        raise ConfigError(f"{key}: {exc}") from None
    _validate(cfg, key)


def _validate(cfg: RunConfig, key: str) -> None:
    t = cfg.train
    if t.epochs < 0 or t.batch_size < 1 or t.inner_iterations < 1:
        raise ConfigError(f"{key}: train.epochs >= 0, batch_size >= 1 and inner_iterations >= 1 required")
    if cfg.compare_epochs < 0:
        raise ConfigError(f"{key}: compare.epochs must be non-negative")
    if not cfg.fractions or any(not 0 < f <= 0.7 + 1e-9 for f in cfg.fractions):
        raise ConfigError(f"{key}: training fractions must lie in (0, 0.7]")


def load_config(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{lineno}: expected key = value")
            try:
                apply(cfg, key, value.strip())
            except ConfigError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from None
    for key, value in (overrides or {}).items():
        apply(cfg, key, value)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """Render ``cfg`` back into the file format; load(dump(c)) == c."""
    lines = []
    for section in ("synthetic", "features", "train", "optim"):
        obj = getattr(cfg, section)
        for f in dataclasses.fields(obj):
            value = getattr(obj, f.name)
            if f.name == "counts":
                for cls, n in zip(EventClass, value):
                    lines.append(f"counts.{cls.label.lower()} = {n}")
                continue
            if isinstance(value, Method):
                value = value.value
            elif isinstance(value, tuple):
                value = " ".join(map(str, value))
            lines.append(f"{section}.{f.name} = {value}")
    lines += [
        f"model.units = {format_units(cfg.units)}",
        f"baseline.mlp_units = {format_units(cfg.mlp_units)}",
        f"split.seed = {cfg.split_seed}",
        f"split.stratified = {cfg.stratified}",
        f"compare.fractions = {' '.join(map(repr, cfg.fractions))}",
        f"compare.epochs = {cfg.compare_epochs}",
        f"compare.methods = {' '.join(m.value for m in cfg.compare_methods)}",
    ]
    return "\n".join(lines) + "\n"
