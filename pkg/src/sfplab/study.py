"""Pretrain-then-tune protocol on the synthetic corpus, shared by scripts and tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import datagen
from .metrics import DiagnosticsReport, diagnose
from .model import ModelConfig, init_params
from .tokenizer import build_vocab
from .trainer import MODES, TrainConfig, Trainer


@dataclass
class SeedRun:
    seed: int
    pretrain_losses: list[float]
    mode_losses: dict[str, list[float]]
    before: DiagnosticsReport
    after: DiagnosticsReport
    params_before: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    params_after: dict[str, np.ndarray] = field(repr=False, default_factory=dict)


def run_seed(seed: int, pretrain_epochs: int = 3, epochs: int = 2, modes=MODES, count: int = 2000,
             n_pairs: int = 400, model_overrides: dict | None = None, **train_overrides) -> SeedRun:
    """Pretrain an LM, then tune a copy in every mode; diagnostics compare pretrain vs sfp-tuned."""
    spec = datagen.SynthSpec(count=count, n_pairs=n_pairs, seed=seed)
    corpus = datagen.gen_corpus(spec).splitlines()
    pairs = datagen.gen_sts_pairs(spec)
    vocab = build_vocab(corpus)
    cfg = ModelConfig(vocab_size=len(vocab), **(model_overrides or {}))

    pre = Trainer(init_params(cfg, seed), cfg, vocab, TrainConfig(seed=seed, **train_overrides))
    pretrain_losses = [pre.pretrain_epoch(corpus, e) for e in range(pretrain_epochs)]
    before = diagnose(pre.params, cfg, vocab, pairs)

    mode_losses, tuned = {}, {}
    for mode in modes:
        tr = Trainer(pre.params, cfg, vocab, TrainConfig(mode=mode, seed=seed, **train_overrides))
        mode_losses[mode] = [tr.contrastive_epoch(corpus, e) for e in range(epochs)]
        tuned[mode] = tr.params
    after = diagnose(tuned["sfp"], cfg, vocab, pairs) if "sfp" in tuned else DiagnosticsReport()
    return SeedRun(seed, pretrain_losses, mode_losses, before, after, pre.params, tuned.get("sfp", {}))
