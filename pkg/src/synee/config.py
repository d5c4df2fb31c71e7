"""Run configuration: one declarative YAML file plus command-line overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .annotate import (
    Annotator,
    CommandAnnotator,
    FixtureAnnotator,
    HttpAnnotator,
    ToyAnnotator,
)
from .errors import ConfigError
from .model import EventTagger


@dataclass
class AnnotatorConfig:
    backend: str = "toy"
    endpoint: str | None = None
    command: list[str] | None = None
    fixture_path: str | None = None
    version: str | None = None
    workers: int = 1


@dataclass
class ModelConfig:
    encoder_dim: int = 64
    encoder_layers: int = 2
    encoder_heads: int = 4
    encoder_ffn: int = 128
    pos_dim: int = 32
    dp_dim: int = 32
    gcn_layers: int = 2
    gcn_hidden: int = 64
    gcn_out: int = 64
    recurrent_hidden: int = 64
    fusion_hidden: list[int] = field(default_factory=lambda: [128])
    dropout: float = 0.1


@dataclass
class TrainingConfig:
    epochs: int = 20
    batch_size: int = 16
    lr: float = 1e-2
    encoder_lr: float | None = None
    patience: int | None = None
    max_grad_norm: float = 5.0


@dataclass
class RunConfig:
    """Everything a command needs; all randomness flows from ``seed``."""

    train_file: str = "data/duee_train.json"
    dev_file: str = "data/duee_dev.json"
    schema_file: str = "data/duee_event_schema.json"
    work_dir: str = "work"
    encoder: str = "tiny"
    variant: str = "pos_dp_gcn"
    subtask: str = "trigger"
    seed: int = 13
    max_tokens: int = 256
    latin_chunk: int = 4
    annotator: AnnotatorConfig = field(default_factory=AnnotatorConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    @property
    def cache_dir(self) -> Path:
        return Path(self.work_dir) / "cache"

    @property
    def preprocessed_dir(self) -> Path:
        return Path(self.work_dir) / "preprocessed"

    @property
    def checkpoint_dir(self) -> Path:
        return Path(self.work_dir) / "checkpoints"

    @property
    def report_dir(self) -> Path:
        return Path(self.work_dir) / "reports"

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        def build(dc_type, data, where):
            names = {f.name for f in dataclasses.fields(dc_type)}
            unknown = set(data) - names
            if unknown:
                raise ConfigError(f"unknown {where} config keys: {sorted(unknown)}")
            return dc_type(**data)

        raw = dict(raw)
        nested = {
            "annotator": build(AnnotatorConfig, raw.pop("annotator", {}), "annotator"),
            "model": build(ModelConfig, raw.pop("model", {}), "model"),
            "training": build(TrainingConfig, raw.pop("training", {}), "training"),
        }
        config = build(cls, raw, "top-level")
        config.annotator, config.model, config.training = (
            nested["annotator"], nested["model"], nested["training"],
        )
        return config

    def apply_overrides(self, **overrides) -> "RunConfig":
        """Return a copy with non-None override values applied (flags win)."""
        config = dataclasses.replace(self)
        for key, value in overrides.items():
            if value is None:
                continue
            if not hasattr(config, key):
                raise ConfigError(f"unknown config override {key!r}")
            setattr(config, key, value)
        return config

    def make_annotator(self) -> Annotator:
        backend = self.annotator.backend
        if backend == "toy":
            return ToyAnnotator()
        if backend == "fixture":
            if not self.annotator.fixture_path:
                raise ConfigError("fixture annotator needs annotator.fixture_path")
            return FixtureAnnotator(
                self.annotator.fixture_path, version=self.annotator.version or "fixture-1"
            )
        if backend == "http":
            if not self.annotator.endpoint or not self.annotator.version:
                raise ConfigError("http annotator needs annotator.endpoint and annotator.version")
            return HttpAnnotator(self.annotator.endpoint, version=self.annotator.version)
        if backend == "command":
            if not self.annotator.command or not self.annotator.version:
                raise ConfigError("command annotator needs annotator.command and annotator.version")
            return CommandAnnotator(self.annotator.command, version=self.annotator.version)
        raise ConfigError(f"unknown annotator backend {backend!r}")

    def make_tagger(self) -> EventTagger:
        return EventTagger(
            subtask=self.subtask,
            variant=self.variant,
            encoder_dim=self.model.encoder_dim,
            encoder_layers=self.model.encoder_layers,
            encoder_heads=self.model.encoder_heads,
            encoder_ffn=self.model.encoder_ffn,
            pos_dim=self.model.pos_dim,
            dp_dim=self.model.dp_dim,
            gcn_layers=self.model.gcn_layers,
            gcn_hidden=self.model.gcn_hidden,
            gcn_out=self.model.gcn_out,
            recurrent_hidden=self.model.recurrent_hidden,
            fusion_hidden=tuple(self.model.fusion_hidden),
            dropout=self.model.dropout,
            lr=self.training.lr,
            encoder_lr=self.training.encoder_lr,
            epochs=self.training.epochs,
            batch_size=self.training.batch_size,
            patience=self.training.patience,
            max_grad_norm=self.training.max_grad_norm,
            seed=self.seed,
        )
