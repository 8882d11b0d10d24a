"""Declarative run configuration with strict key checking and dotted overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .decoder import DecoderConfig
from .frontend import FrontendConfig
from .neural import TrainConfig
from .synth import SynthConfig


class ConfigError(ValueError):
    pass


@dataclass
class TrainSection:
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 16
    grad_clip: Optional[float] = 5.0

    def to_train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.epochs, self.batch_size, seed, self.grad_clip)


@dataclass
class AcousticSection:
    hidden_dims: list = field(default_factory=lambda: [64, 64])
    train: TrainSection = field(default_factory=lambda: TrainSection(learning_rate=0.5, epochs=6, batch_size=16))


@dataclass
class CharSection:
    embedding_table: Optional[str] = None
    embedding_dim: int = 200
    hidden_dims: list = field(default_factory=lambda: [32])
    train: TrainSection = field(default_factory=lambda: TrainSection(learning_rate=0.5, epochs=8, batch_size=16))


@dataclass
class FusionSection:
    hidden_dims: list = field(default_factory=lambda: [64, 64])
    train: TrainSection = field(default_factory=lambda: TrainSection(learning_rate=0.05, epochs=60, batch_size=32))


@dataclass
class SynthSection:
    n_directed: int = 1250
    n_nondirected: int = 1250
    acoustic_separation: float = 1.0
    style_confusion: float = 0.05
    directed_grammar: Optional[str] = None
    nondirected_grammar: Optional[str] = None


@dataclass
class RunConfig:
    seed: int = 20190401
    out: str = "runs/default"
    mask: str = "all"
    train_fraction: float = 0.8
    synth: SynthSection = field(default_factory=SynthSection)
    frontend: dict = field(default_factory=lambda: asdict(FrontendConfig()))
    decoder: dict = field(default_factory=lambda: asdict(DecoderConfig()))
    acoustic: AcousticSection = field(default_factory=AcousticSection)
    char: CharSection = field(default_factory=CharSection)
    fusion: FusionSection = field(default_factory=FusionSection)

    def validate(self) -> "RunConfig":
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        try:
            self.frontend_config()
            self.decoder_config()
            self.synth_config()
            for section in (self.acoustic, self.char, self.fusion):
                section.train.to_train_config(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    # derived component configs
    def frontend_config(self) -> FrontendConfig:
        return FrontendConfig(**self.frontend)

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(**self.decoder)

    def synth_config(self) -> SynthConfig:
        return SynthConfig(seed=self.seed, decoder=self.decoder_config(), **asdict(self.synth))

    def to_json(self) -> dict:
        return asdict(self)

    # paths
    @property
    def root(self) -> Path:
        return Path(self.out)

    @property
    def corpus_dir(self) -> Path:
        return self.root / "corpus"

    @property
    def manifest(self) -> Path:
        return self.corpus_dir / "corpus.jsonl"

    @property
    def features_path(self) -> Path:
        return self.root / "features.jsonl"

    def model_path(self, name: str) -> Path:
        return self.root / "models" / f"{name}.json"

    def scores_path(self, mask: str) -> Path:
        return self.root / "scores" / f"{mask}.jsonl"

    @property
    def eval_dir(self) -> Path:
        return self.root / "eval"


def _build(defaults, data: dict, where: str):
    """Overlay ``data`` on the dataclass instance ``defaults``, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be an object")
    known = {f.name for f in fields(defaults)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        current = getattr(defaults, name)
        path = f"{where}.{name}" if where else name
        if hasattr(current, "__dataclass_fields__"):
            kwargs[name] = _build(current, value, path)
        elif isinstance(current, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{path} must be an object")
            extra = sorted(set(value) - set(current))
            if extra:
                raise ConfigError(f"unknown key(s) in {path}: {', '.join(extra)}")
            kwargs[name] = {**current, **value}
        else:
            kwargs[name] = value
    return replace(defaults, **kwargs)


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig(), data, "").validate()


def apply_override(data: dict, dotted: str, value) -> dict:
    data = copy.deepcopy(data)
    keys = dotted.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted}: {k} is not a section")
    node[keys[-1]] = value
    return data


def parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def load_config(path=None, overrides=()) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    for dotted, value in overrides:
        data = apply_override(data, dotted, value)
    return config_from_dict(data)


def write_snapshot(config: RunConfig, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_json(), fh, sort_keys=True, indent=2)
        fh.write("\n")
