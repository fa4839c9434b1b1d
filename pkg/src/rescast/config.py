"""Run configuration: a flat key/value file with dotted section keys.

Example::

    # reservoir block, keys as in the reference setup
    reservoir.units = 20
    reservoir.leak_rate = 0.75
    reservoir.rho = 1.025
    split.train_fraction = 0.75
    data.fixture = "wti"

The file is TOML, so ``[reservoir]`` tables work too. ``reservoir.rho``
is accepted as an alias for ``reservoir.spectral_radius``.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError
from .esn import ReservoirConfig
from .lstm import LstmConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ALIASES = {"reservoir.rho": "reservoir.spectral_radius"}


@dataclass
class DataConfig:
    path: str | None = None
    fixture: str | None = None
    symbol: str | None = None
    start: str = "2010-01-01"
    end: str = "2023-05-31"
    endpoint: str | None = None
    outlier_policy: str = "none"
    zscore_k: float = 3.0


@dataclass
class SplitConfig:
    train_fraction: float = 0.75
    lag: int = 1
    normalization: str = "full"


@dataclass
class EvaluateConfig:
    mape_epsilon: float = 1e-8
    scale: str = "raw"


@dataclass
class PredictConfig:
    mode: str = "one-step"
    horizon: int = 10


@dataclass
class OutputConfig:
    dir: str = "out"
    png: bool = False


SECTIONS = {
    "data": DataConfig,
    "split": SplitConfig,
    "reservoir": ReservoirConfig,
    "lstm": LstmConfig,
    "evaluate": EvaluateConfig,
    "predict": PredictConfig,
    "output": OutputConfig,
}


@dataclass
class RunConfig:
    data: DataConfig = field(default_factory=DataConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    reservoir: ReservoirConfig = field(default_factory=ReservoirConfig)
    lstm: LstmConfig = field(default_factory=LstmConfig)
    evaluate: EvaluateConfig = field(default_factory=EvaluateConfig)
    predict: PredictConfig = field(default_factory=PredictConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self):
        return asdict(self)

    def fingerprint(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def set(self, dotted, value):
        dotted = ALIASES.get(dotted, dotted)
        section, _, key = dotted.partition(".")
        if section not in SECTIONS or not key:
            raise ConfigError(f"unknown config key {dotted!r}")
        target = getattr(self, section)
        types = {f.name: f.type for f in fields(target)}
        if key not in types:
            raise ConfigError(f"unknown config key {dotted!r}")
        setattr(target, key, _coerce(dotted, value, types[key]))

    def validate(self):
        d = self.data
        sources = [s for s in (d.path, d.fixture, d.symbol) if s]
        if len(sources) > 1:
            raise ConfigError("data: exactly one of data.path, data.fixture, data.symbol may be set")
        if not sources:
            d.fixture = "wti"
        if d.outlier_policy not in ("none", "zscore"):
            raise ConfigError("data.outlier_policy must be 'none' or 'zscore'")
        s = self.split
        if not 0.0 < s.train_fraction < 1.0:
            raise ConfigError("split.train_fraction must lie in (0, 1)")
        if not (isinstance(s.lag, int) and s.lag >= 1):
            raise ConfigError("split.lag must be a positive integer")
        if s.normalization not in ("full", "train-only"):
            raise ConfigError("split.normalization must be 'full' or 'train-only'")
        if self.evaluate.scale not in ("raw", "normalized"):
            raise ConfigError("evaluate.scale must be 'raw' or 'normalized'")
        if not self.evaluate.mape_epsilon >= 0:
            raise ConfigError("evaluate.mape_epsilon must be non-negative")
        if self.predict.mode not in ("one-step", "free-running"):
            raise ConfigError("predict.mode must be 'one-step' or 'free-running'")
        if self.predict.mode == "free-running" and s.lag != 1:
            raise ConfigError("free-running prediction requires split.lag = 1")
        if not (isinstance(self.predict.horizon, int) and self.predict.horizon > 0):
            raise ConfigError("predict.horizon must be a positive integer")
        self.reservoir.validate()
        self.lstm.validate()
        return self


def _coerce(key, value, annotation):
    ann = str(annotation)
    try:
        if ann == "bool":
            if isinstance(value, str):
                if value.lower() not in ("true", "false"):
                    raise ValueError(value)
                return value.lower() == "true"
            return bool(value)
        if ann == "int":
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            if isinstance(value, bool):
                raise ValueError(value)
            return int(value)
        if ann == "float":
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        return None if value is None else str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot interpret {value!r} as {ann}") from None


def _flatten(doc, prefix=""):
    for key, value in doc.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, name + ".")
        else:
            yield name, value


def parse_config(text) -> RunConfig:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    config = RunConfig()
    for key, value in _flatten(doc):
        config.set(key, value)
    return config


def load_config(path=None, overrides=()) -> RunConfig:
    """Read ``path`` (if given), apply ``(key, value)`` overrides, validate."""
    if path is None:
        config = RunConfig()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                config = parse_config(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    for key, value in overrides:
        config.set(key, parse_value(value))
    return config.validate()


def parse_value(text):
    """Interpret a command-line value with TOML rules, else as a bare string."""
    if not isinstance(text, str):
        return text
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text
