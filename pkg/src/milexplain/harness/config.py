"""Experiment configuration: a YAML file mapped onto nested dataclasses.

Unknown keys are rejected so typos do not silently fall back to defaults.
``resolved()`` gives the fully-defaulted dict that every report embeds.
"""
from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields

import yaml

from ..explainers.anchors import AnchorConfig
from ..explainers.lime import LimeConfig

METHODS = ("attention", "attention+r1", "attention+r2r3", "attention+mil",
           "lime", "anchors", "lstm-crf")


class ConfigError(ValueError):
    pass


@dataclass
class CorpusSection:
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    embeddings: str | None = None
    synthetic: bool = False  # generate instead of reading files
    synth_seed: int = 0
    n_train: int = 2000
    n_dev: int = 300
    n_test: int = 500


@dataclass
class ModelSection:
    hidden: int = 32
    attend_dim: int = 32
    cls_hidden: tuple = (32, 32)
    attention_eps: float = 0.01


@dataclass
class TrainSection:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 0.05
    warmup_epochs: int = 8
    accuracy_margin: float = 0.02
    tag_weight: float = 1.0


@dataclass
class RegularizerSection:
    alpha: float = 0.1
    beta: float = 1.0
    gamma: float = 1.0
    tau: float = 0.5


@dataclass
class ExperimentConfig:
    seed: int = 0
    out_dir: str = "report"
    methods: tuple = ("attention", "attention+mil", "lime", "anchors", "lstm-crf")
    # method -> checkpoint path; methods without one are trained
    checkpoints: dict = field(default_factory=dict)
    limit: int | None = None  # explain only the first N test instances
    explain_limit: dict = field(default_factory=dict)  # per-method override
    workers: int = 1
    average: str = "micro"
    corpus: CorpusSection = field(default_factory=CorpusSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    regularizers: RegularizerSection = field(default_factory=RegularizerSection)
    lime: LimeConfig = field(default_factory=LimeConfig)
    anchors: AnchorConfig = field(default_factory=AnchorConfig)

    def resolved(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["model"]["cls_hidden"] = list(self.model.cls_hidden)
        return d


_SECTIONS = {
    "corpus": CorpusSection, "model": ModelSection, "train": TrainSection,
    "regularizers": RegularizerSection, "lime": LimeConfig, "anchors": AnchorConfig,
}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name for f in fields(cls)}
    extra = sorted(set(data) - known)
    if extra:
        raise ConfigError(f"{where}: unknown keys {extra}")
    return cls(**data)


def config_from_dict(data):
    data = dict(data or {})
    sections = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            sections[name] = _build(cls, data.pop(name), name)
    cfg = _build(ExperimentConfig, data, "config")
    for name, value in sections.items():
        setattr(cfg, name, value)
    cfg.methods = tuple(cfg.methods)
    cfg.model.cls_hidden = tuple(cfg.model.cls_hidden)
    bad = [m for m in cfg.methods if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown methods {bad}; choose from {list(METHODS)}")
    if not cfg.methods:
        raise ConfigError("no methods selected")
    return cfg


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    cfg = config_from_dict(data)
    # relative paths are taken relative to the config file
    base = os.path.dirname(os.path.abspath(path))

    def rel(p):
        return p if p is None or os.path.isabs(p) else os.path.join(base, p)

    c = cfg.corpus
    c.train, c.dev, c.test, c.embeddings = map(rel, (c.train, c.dev, c.test, c.embeddings))
    cfg.checkpoints = {k: rel(v) for k, v in cfg.checkpoints.items()}
    cfg.out_dir = rel(cfg.out_dir)
    return cfg


def dump_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(cfg.resolved(), fh, sort_keys=False)
