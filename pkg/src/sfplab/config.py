"""Flat run configuration shared by every CLI subcommand."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .model import ModelConfig
from .template import DEFAULT_SUFFIX
from .trainer import TrainConfig

ARTIFACT_VERSION = "0.1.0"


@dataclass
class RunConfig:
    # model
    d: int = 64
    heads: int = 4
    layers: int = 2
    max_seq_len: int = 64
    dropout_rate: float = 0.1
    # training
    mode: str = "sfp"
    tau: float = 0.05
    batch_size: int = 64
    epochs: int = 2
    pretrain_epochs: int = 3
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    symmetric: bool = False
    # prompts
    prefix_kind: str = "sth"
    suffix_text: str = DEFAULT_SUFFIX
    baseline_kinds: tuple = ("eol", "sum")
    prompt_style: str = "two-stage"
    # data
    n_sentences: int = 2000
    n_pairs: int = 400
    min_freq: int = 1
    positive_threshold: float = 4.0
    bench_against: str = "two-pass-dropout"
    bench_sentences: int = 512
    # paths
    corpus: str = "corpus.txt"
    eval_file: str = "sts.tsv"
    checkpoint: str = ""
    out: str = ""
    log: str = ""
    input: str = ""

    def __post_init__(self):
        self.baseline_kinds = tuple(self.baseline_kinds)
        for f in fields(self):
            value = getattr(self, f.name)
            if f.type in ("int", "float") and isinstance(value, bool):
                raise ConfigError(f"{f.name}: expected a number, got {value!r}")
            if f.type == "int" and not isinstance(value, int):
                raise ConfigError(f"{f.name}: expected an integer, got {value!r}")
            if f.type == "float":
                if not isinstance(value, (int, float)):
                    raise ConfigError(f"{f.name}: expected a number, got {value!r}")
                setattr(self, f.name, float(value))
            if f.type == "bool" and not isinstance(value, bool):
                raise ConfigError(f"{f.name}: expected true/false, got {value!r}")
            if f.type == "str" and not isinstance(value, str):
                raise ConfigError(f"{f.name}: expected a string, got {value!r}")
        if self.prompt_style not in ("two-stage", "single"):
            raise ConfigError(f"prompt_style: expected two-stage or single, got {self.prompt_style!r}")

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config key {unknown[0]!r}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path: str | None, overrides: list[str] = ()) -> "RunConfig":
        data: dict = {}
        if path:
            text = Path(path).read_text(encoding="utf-8")
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: config must be a flat JSON object")
        for item in overrides:
            key, sep, raw = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not key=value")
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            data[key.strip()] = value
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["baseline_kinds"] = list(self.baseline_kinds)
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def stamp(self) -> dict:
        return {"config_hash": self.config_hash(), "seed": self.seed, "artifact_version": ARTIFACT_VERSION}

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, d=self.d, heads=self.heads, layers=self.layers,
                           max_seq_len=self.max_seq_len, dropout_rate=self.dropout_rate)

    def train_config(self, mode: str | None = None) -> TrainConfig:
        return TrainConfig(mode=mode or self.mode, tau=self.tau, batch_size=self.batch_size, epochs=self.epochs,
                           lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps, seed=self.seed,
                           prefix_kind=self.prefix_kind, suffix_text=self.suffix_text,
                           baseline_kinds=self.baseline_kinds, symmetric=self.symmetric)
