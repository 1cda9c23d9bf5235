"""Training cost accounting: sequences, tokens, multiply-accumulates, activations.

All counts are closed-form in the sentence lengths and the model shape, so
they are reproducible bit for bit; wall-clock time is measured and reported
but carries no guarantees.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import UsageError
from .model import ModelConfig, param_shapes
from .template import render_single, render_two_stage
from .tokenizer import Vocab, tokenize
from .trainer import TrainConfig, Trainer, epoch_batches

BYTES_PER_FLOAT = 8
# params + grads + two Adam moments
PARAM_COPIES = 4


@dataclass
class CostLedger:
    mode: str
    forward_sequences: int = 0
    forwarded_tokens: int = 0
    estimated_macs: int = 0
    activation_floats: int = 0
    param_bytes: int = 0
    wall_clock_ms: float = 0.0

    def counts(self) -> dict:
        d = asdict(self)
        d.pop("wall_clock_ms")
        return d


@dataclass(frozen=True)
class Overheads:
    """Template token counts measured by tokenising the templates with an empty slot."""

    prefix: int     # single-stage prefix template incl. BOS
    suffix: int     # suffix words (joining comma excluded)
    template_a: int
    template_b: int


def overheads(vocab: Vocab, tcfg: TrainConfig) -> Overheads:
    return Overheads(
        prefix=len(render_single(vocab, tcfg.prefix_kind, "").ids),
        suffix=len(tokenize(tcfg.suffix_text)),
        template_a=len(render_single(vocab, tcfg.baseline_kinds[0], "").ids),
        template_b=len(render_single(vocab, tcfg.baseline_kinds[1], "").ids),
    )


def token_formula(mode: str, lengths: Sequence[int], ov: Overheads) -> int:
    """Closed-form forwarded tokens for sentences of the given token lengths."""
    total = 0
    for n in lengths:
        if mode == "sfp":
            total += n + ov.prefix + 1 + ov.suffix
        elif mode == "two-pass-dual":
            total += (n + ov.template_a) + (n + ov.template_b)
        elif mode == "two-pass-dropout":
            total += 2 * (n + ov.prefix)
        else:
            raise UsageError(f"unknown mode {mode!r}")
    return total


def rendered_lengths(mode: str, sentences: Sequence[str], vocab: Vocab, tcfg: TrainConfig) -> list[int]:
    """Lengths of every sequence the given mode forwards, by actual rendering."""
    out = []
    for s in sentences:
        if mode == "sfp":
            out.append(len(render_two_stage(vocab, tcfg.prefix_kind, tcfg.suffix_text, s)))
        elif mode == "two-pass-dual":
            out.extend(len(render_single(vocab, k, s).ids) for k in tcfg.baseline_kinds)
        elif mode == "two-pass-dropout":
            n = len(render_single(vocab, tcfg.prefix_kind, s).ids)
            out.extend((n, n))
        else:
            raise UsageError(f"unknown mode {mode!r}")
    return out


def count_tokens(mode: str, sentences: Sequence[str], vocab: Vocab, tcfg: TrainConfig) -> int:
    return sum(rendered_lengths(mode, sentences, vocab, tcfg))


def sequence_macs(cfg: ModelConfig, n: int) -> int:
    """Multiply-accumulates of one causal forward over ``n`` tokens.

    Per layer: Q/K/V/output projections 4nd^2, MLP 8nd^2, and causal
    score + weighted-sum products n(n+1)/2 * d each.
    """
    d = cfg.d
    return cfg.layers * (12 * n * d * d + n * (n + 1) * d)


def sequence_activations(cfg: ModelConfig, n: int) -> int:
    """Floats kept for the backward pass of one sequence of ``n`` tokens."""
    d, h = cfg.d, cfg.heads
    per_layer = 14 * n * d + 2 * h * n * n
    return 2 * n * d + cfg.layers * per_layer


def param_count(cfg: ModelConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(cfg).values())


def ledger_for(mode: str, sentences: Sequence[str], cfg: ModelConfig, vocab: Vocab, tcfg: TrainConfig,
               epoch: int = 0) -> CostLedger:
    """Counts for one contrastive epoch without running the model."""
    ledger = CostLedger(mode=mode, param_bytes=PARAM_COPIES * BYTES_PER_FLOAT * param_count(cfg))
    for idx in epoch_batches(len(sentences), tcfg.batch_size, tcfg.seed, epoch):
        lengths = rendered_lengths(mode, [sentences[i] for i in idx], vocab, tcfg)
        ledger.forward_sequences += len(lengths)
        ledger.forwarded_tokens += sum(lengths)
        ledger.estimated_macs += sum(sequence_macs(cfg, n) for n in lengths)
        ledger.activation_floats = max(ledger.activation_floats,
                                       sum(sequence_activations(cfg, n) for n in lengths))
    return ledger


def run_epoch(params, cfg: ModelConfig, vocab: Vocab, tcfg: TrainConfig, sentences: Sequence[str]) -> CostLedger:
    """Train one contrastive epoch and return its ledger with measured wall clock."""
    ledger = ledger_for(tcfg.mode, sentences, cfg, vocab, tcfg)
    trainer = Trainer(params, cfg, vocab, tcfg)
    start = time.perf_counter()
    trainer.contrastive_epoch(sentences, epoch=0)
    ledger.wall_clock_ms = (time.perf_counter() - start) * 1000.0
    if (trainer.forward_passes, trainer.tokens) != (ledger.forward_sequences, ledger.forwarded_tokens):
        raise AssertionError("trainer counters disagree with closed-form accounting")
    return ledger


def _ratio(a, b) -> float:
    return float(a) / float(b) if b else float("nan")


def compare(params, vocab: Vocab, model_a: ModelConfig, train_a: TrainConfig, model_b: ModelConfig,
            train_b: TrainConfig, sentences: Sequence[str], run: bool = True) -> dict:
    """Side-by-side ledgers for two training setups on the same sentences and seed.

    With ``run=False`` only the deterministic counts are produced.
    """
    if param_shapes(model_a) != param_shapes(model_b):
        raise UsageError("compare needs both setups to share the model shape")
    if train_a.seed != train_b.seed:
        raise UsageError("compare needs both setups to use the same seed")
    if run:
        la = run_epoch(params, model_a, vocab, train_a, sentences)
        lb = run_epoch(params, model_b, vocab, train_b, sentences)
    else:
        la = ledger_for(train_a.mode, sentences, model_a, vocab, train_a)
        lb = ledger_for(train_b.mode, sentences, model_b, vocab, train_b)
    return {
        "a": asdict(la),
        "b": asdict(lb),
        "ratios": {
            "forward_sequences": _ratio(la.forward_sequences, lb.forward_sequences),
            "forwarded_tokens": _ratio(la.forwarded_tokens, lb.forwarded_tokens),
            "estimated_macs": _ratio(la.estimated_macs, lb.estimated_macs),
            "activation_floats": _ratio(la.activation_floats, lb.activation_floats),
            "wall_clock_ms": _ratio(la.wall_clock_ms, lb.wall_clock_ms),
        },
    }
