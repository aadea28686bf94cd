"""Run configuration: INI sections data, model, training, search and arima."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from .baselines import ArimaOrder
from .errors import ConfigError
from .models import NetworkSpec
from .training import SearchSpace, TrainConfig


@dataclass(frozen=True)
class DataConfig:
    lookback: int = 30
    train_frac: float = 0.7
    val_frac: float = 0.15
    min_likes: int = 10

    def __post_init__(self):
        if self.lookback < 1:
            raise ConfigError("lookback must be >= 1")
        if self.min_likes < 0:
            raise ConfigError("min_likes must be >= 0")


@dataclass(frozen=True)
class ModelConfig:
    cell: str = "gru"
    layers: int = 1
    bidirectional: bool = False
    units: int = 50
    dropout_rate: float = 0.2

    def spec(self, input_dim):
        return NetworkSpec(self.cell, self.layers, self.bidirectional, self.units,
                           self.dropout_rate, input_dim)


@dataclass(frozen=True)
class SearchConfig:
    trials: int = 20
    units: tuple = (32, 50, 64, 96, 128)
    dropout_min: float = 0.0
    dropout_max: float = 0.5
    lr_min: float = 1e-4
    lr_max: float = 1e-2
    n_jobs: int = 1

    def space(self):
        return SearchSpace(tuple(self.units), (self.dropout_min, self.dropout_max),
                           (self.lr_min, self.lr_max))


@dataclass(frozen=True)
class ArimaConfig:
    order: str = "5,1,0"
    refit_every: int = 10
    exog: bool = False

    @property
    def arima_order(self):
        return ArimaOrder.parse(self.order)


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    arima: ArimaConfig = field(default_factory=ArimaConfig)

    def to_dict(self):
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    @classmethod
    def from_dict(cls, d):
        parts = {}
        for name, kind in SECTIONS.items():
            values = dict(d.get(name, {}))
            if "units" in values and isinstance(values["units"], list):
                values["units"] = tuple(values["units"])
            parts[name] = kind(**values)
        return cls(**parts)

    def digest(self):
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def with_seed(self, seed):
        return replace(self, training=replace(self.training, seed=seed))

    def with_overrides(self, section, **values):
        return replace(self, **{section: replace(getattr(self, section), **values)})


SECTIONS = {"data": DataConfig, "model": ModelConfig, "training": TrainConfig,
            "search": SearchConfig, "arima": ArimaConfig}


def _coerce(text, default, key):
    try:
        if isinstance(default, bool):
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(t) for t in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r}") from None
    return text.strip()


def load_config(path=None) -> RunConfig:
    """Read an INI file; missing keys keep their defaults, unknown ones fail."""
    cfg = RunConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        current = getattr(cfg, section)
        known = {f.name: getattr(current, f.name) for f in fields(current)}
        updates = {}
        for key, text in parser.items(section):
            if key not in known:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            updates[key] = _coerce(text, known[key], f"[{section}] {key}")
        try:
            cfg = cfg.with_overrides(section, **updates)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return cfg


def dump_config(cfg: RunConfig) -> str:
    out = []
    for name, values in cfg.to_dict().items():
        out.append(f"[{name}]")
        for k, v in values.items():
            if isinstance(v, (tuple, list)):
                v = ", ".join(str(x) for x in v)
            out.append(f"{k} = {v}")
        out.append("")
    return "\n".join(out)
