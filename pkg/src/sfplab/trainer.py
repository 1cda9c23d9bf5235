"""Contrastive and language-model training.

Three contrastive modes share one InfoNCE objective and differ only in how
the (anchor, positive) pair is produced:

* ``sfp``               one forward pass over a two-stage prompt; anchor is the
                        hidden state at the final token, positive the one at
                        the end of the prefix stage.
* ``two-pass-dual``     two passes, each over a different single-stage template.
* ``two-pass-dropout``  two passes over the same template with independent
                        dropout masks.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import IO, Sequence

import numpy as np

from . import tape as T
from .errors import ConfigError, DegenerateError, ShapeError, UsageError
from .model import ModelConfig, forward_tape, on_tape, check_params
from .template import DEFAULT_SUFFIX, TemplateKind, render_single, render_two_stage
from .tokenizer import Vocab, encode

log = logging.getLogger(__name__)

MODES = ("sfp", "two-pass-dual", "two-pass-dropout")


@dataclass
class TrainConfig:
    mode: str = "sfp"
    tau: float = 0.05
    batch_size: int = 64
    epochs: int = 1
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    prefix_kind: str = "sth"
    suffix_text: str = DEFAULT_SUFFIX
    baseline_kinds: tuple[str, str] = ("eol", "sum")
    symmetric: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.tau > 0:
            raise ConfigError(f"temperature must be positive, got {self.tau}")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be at least 2 for in-batch negatives")
        TemplateKind.parse(self.prefix_kind)
        self.baseline_kinds = tuple(self.baseline_kinds)
        if len(self.baseline_kinds) != 2:
            raise ConfigError("baseline_kinds needs exactly two template names")
        for k in self.baseline_kinds:
            TemplateKind.parse(k)


@dataclass
class EmbeddingBatch:
    anchors: np.ndarray
    positives: np.ndarray
    forward_pass_count: int
    forwarded_token_count: int
    anchor_source: str = ""
    positive_source: str = ""


@dataclass
class StepResult:
    loss: float
    grads: dict[str, np.ndarray]
    batch: EmbeddingBatch | None = None
    warning: str | None = None


# ---------------------------------------------------------------- InfoNCE

def infonce_tape(anchors: T.Var, positives: T.Var, tau: float, symmetric: bool = False) -> T.Var:
    """Mean over i of ``-log softmax_j(cos(a_i, p_j) / tau)[i]``."""
    if anchors.shape != positives.shape or anchors.value.ndim != 2:
        raise ShapeError(f"anchors {anchors.shape} and positives {positives.shape} must be equal 2-d shapes")
    if not tau > 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    n = anchors.shape[0]
    a = T.l2_normalize(anchors)
    p = T.l2_normalize(positives)
    sims = T.scale(a @ T.transpose(p, (1, 0)), 1.0 / tau)
    labels = np.arange(n)
    if not symmetric:
        return T.cross_entropy(sims, labels, np.full(n, 1.0 / n))
    back = T.cross_entropy(T.transpose(sims, (1, 0)), labels, np.full(n, 0.5 / n))
    return T.cross_entropy(sims, labels, np.full(n, 0.5 / n)) + back


def infonce(anchors, positives, tau: float, symmetric: bool = False) -> float:
    tape = T.GradTape()
    a = tape.constant(np.asarray(anchors, dtype=np.float64))
    p = tape.constant(np.asarray(positives, dtype=np.float64))
    value = float(infonce_tape(a, p, tau, symmetric).value)
    tape.clear()
    return value


# ---------------------------------------------------------------- steps

def _finish(tape, loss, anchors, positives, passes, tokens, src_a, src_p, warning=None) -> StepResult:
    grads = T.backprop(tape, loss)
    batch = EmbeddingBatch(anchors.value.copy(), positives.value.copy(), passes, tokens, src_a, src_p)
    value = float(loss.value)
    tape.clear()
    return StepResult(value, grads, batch, warning)


def sfp_step(params, cfg: ModelConfig, vocab: Vocab, sentences: Sequence[str], tcfg: TrainConfig) -> StepResult:
    """Single forward pass per sentence; anchor = last token, positive = end of prefix."""
    if tcfg.mode != "sfp":
        raise UsageError(f"sfp_step called with mode {tcfg.mode!r}")
    prompts = [render_two_stage(vocab, tcfg.prefix_kind, tcfg.suffix_text, s) for s in sentences]
    tape = T.GradTape()
    pv = on_tape(tape, params)
    hid = forward_tape(pv, cfg, [p.ids for p in prompts])
    rows = np.arange(len(prompts))
    anchors = T.gather(hid, rows, [p.rep2_pos for p in prompts])
    positives = T.gather(hid, rows, [p.rep1_pos for p in prompts])
    loss = infonce_tape(anchors, positives, tcfg.tau, tcfg.symmetric)
    tokens = sum(len(p) for p in prompts)
    return _finish(tape, loss, anchors, positives, len(prompts), tokens, "pass0:rep2", "pass0:rep1")


def twopass_step(params, cfg: ModelConfig, vocab: Vocab, sentences: Sequence[str], tcfg: TrainConfig,
                 step_seed: int = 0) -> StepResult:
    """Two forward passes per sentence (template pair, or one template under two dropout masks)."""
    if tcfg.mode == "two-pass-dual":
        kind_a, kind_b = tcfg.baseline_kinds
        seeds = (None, None)
    elif tcfg.mode == "two-pass-dropout":
        kind_a = kind_b = tcfg.prefix_kind
        seeds = ([tcfg.seed, step_seed, 1], [tcfg.seed, step_seed, 2])
    else:
        raise UsageError(f"twopass_step called with mode {tcfg.mode!r}")
    warning = None
    if tcfg.mode == "two-pass-dropout" and cfg.dropout_rate == 0.0:
        warning = "dropout_rate is 0: positives are identical to anchors"
        log.warning(warning)
    first = [render_single(vocab, kind_a, s) for s in sentences]
    second = [render_single(vocab, kind_b, s) for s in sentences]
    tape = T.GradTape()
    pv = on_tape(tape, params)
    rows = np.arange(len(sentences))
    hid_a = forward_tape(pv, cfg, [r.ids for r in first], seeds[0])
    hid_b = forward_tape(pv, cfg, [r.ids for r in second], seeds[1])
    anchors = T.gather(hid_a, rows, [r.rep_pos for r in first])
    positives = T.gather(hid_b, rows, [r.rep_pos for r in second])
    loss = infonce_tape(anchors, positives, tcfg.tau, tcfg.symmetric)
    tokens = sum(len(r.ids) for r in first) + sum(len(r.ids) for r in second)
    return _finish(tape, loss, anchors, positives, 2 * len(sentences), tokens,
                   f"pass0:{TemplateKind.parse(kind_a).value}", f"pass1:{TemplateKind.parse(kind_b).value}",
                   warning)


def lm_batch(vocab: Vocab, cfg: ModelConfig, sentences: Sequence[str]) -> list[list[int]]:
    seqs = []
    for s in sentences:
        ids = encode(vocab, s)[: cfg.max_seq_len]
        if len(ids) >= 2:
            seqs.append(ids)
    return seqs


def lm_loss_tape(pv, cfg: ModelConfig, seqs: Sequence[Sequence[int]]) -> T.Var:
    """Mean over sequences of the per-sequence mean next-token cross-entropy."""
    if not seqs:
        raise DegenerateError("no sequence with at least one prediction target")
    hid = forward_tape(pv, cfg, seqs)
    bi, pi, targets, weights = [], [], [], []
    for i, s in enumerate(seqs):
        n = len(s) - 1
        bi.extend([i] * n)
        pi.extend(range(n))
        targets.extend(s[1:])
        weights.extend([1.0 / (n * len(seqs))] * n)
    logits = T.gather(hid, bi, pi) @ pv["w_out"]
    return T.cross_entropy(logits, targets, weights)


def pretrain_step(params, cfg: ModelConfig, vocab: Vocab, sentences: Sequence[str]) -> StepResult:
    """Next-token prediction: targets are the inputs shifted left by one."""
    if not sentences:
        raise UsageError("pretrain_step needs a non-empty batch")
    seqs = lm_batch(vocab, cfg, sentences)
    tape = T.GradTape()
    loss = lm_loss_tape(on_tape(tape, params), cfg, seqs)
    grads = T.backprop(tape, loss)
    value = float(loss.value)
    tape.clear()
    return StepResult(value, grads)


# ---------------------------------------------------------------- Adam

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0


def adam_update(params, grads, state: AdamState, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                eps: float = 1e-8) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam step. Returns new params and state; inputs are left untouched."""
    if set(grads) != set(params):
        raise UsageError(f"gradient names differ from params: {sorted(set(grads) ^ set(params))}")
    t = state.step + 1
    new_params, m_out, v_out = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        if g.shape != p.shape or m.shape != p.shape or v.shape != p.shape:
            raise UsageError(f"{name}: shape mismatch between param {p.shape}, grad {g.shape}, state {m.shape}")
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        new_params[name] = p - lr * m_hat / (np.sqrt(v_hat) + eps)
        m_out[name], v_out[name] = m, v
    return new_params, AdamState(m_out, v_out, t)


# ---------------------------------------------------------------- loops

def epoch_batches(n: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    """Shuffled index batches for one epoch; a trailing batch smaller than 2 is dropped."""
    order = np.random.default_rng([seed, epoch]).permutation(n)
    batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
    if batches and len(batches[-1]) < 2:
        batches.pop()
    return batches


class Trainer:
    """Owns parameters, optimizer state and pass/token counters for one run."""

    def __init__(self, params, cfg: ModelConfig, vocab: Vocab, tcfg: TrainConfig, log_file: IO[str] | None = None):
        check_params(params, cfg)
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self.cfg = cfg
        self.vocab = vocab
        self.tcfg = tcfg
        self.state = AdamState()
        self.step = 0
        self.forward_passes = 0
        self.tokens = 0
        self.log_file = log_file

    def _apply(self, res: StepResult, kind: str, passes: int, tokens: int):
        self.params, self.state = adam_update(self.params, res.grads, self.state, self.tcfg.lr,
                                              self.tcfg.beta1, self.tcfg.beta2, self.tcfg.eps)
        self.step += 1
        self.forward_passes += passes
        self.tokens += tokens
        if self.log_file is not None:
            rec = {"step": self.step, "mode": kind, "loss": res.loss, "forward_passes_cum": self.forward_passes,
                   "tokens_cum": self.tokens, "seed": self.tcfg.seed}
            self.log_file.write(json.dumps(rec) + "\n")

    def contrastive_step(self, sentences: Sequence[str]) -> StepResult:
        if self.tcfg.mode == "sfp":
            res = sfp_step(self.params, self.cfg, self.vocab, sentences, self.tcfg)
        else:
            res = twopass_step(self.params, self.cfg, self.vocab, sentences, self.tcfg, step_seed=self.step)
        self._apply(res, self.tcfg.mode, res.batch.forward_pass_count, res.batch.forwarded_token_count)
        return res

    def contrastive_epoch(self, sentences: Sequence[str], epoch: int) -> float:
        losses = []
        for idx in epoch_batches(len(sentences), self.tcfg.batch_size, self.tcfg.seed, epoch):
            losses.append(self.contrastive_step([sentences[i] for i in idx]).loss)
        return float(np.mean(losses)) if losses else float("nan")

    def pretrain_epoch(self, sentences: Sequence[str], epoch: int) -> float:
        losses = []
        for idx in epoch_batches(len(sentences), self.tcfg.batch_size, self.tcfg.seed, epoch):
            batch = [sentences[i] for i in idx]
            seqs = lm_batch(self.vocab, self.cfg, batch)
            if not seqs:
                continue
            res = pretrain_step(self.params, self.cfg, self.vocab, batch)
            self._apply(res, "pretrain", len(seqs), sum(len(s) for s in seqs))
            losses.append(res.loss)
        return float(np.mean(losses)) if losses else float("nan")


def config_dict(tcfg: TrainConfig) -> dict:
    d = asdict(tcfg)
    d["baseline_kinds"] = list(tcfg.baseline_kinds)
    return d
