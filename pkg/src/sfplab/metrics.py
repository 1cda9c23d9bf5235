"""Embedding-space evaluation: STS Spearman, alignment/uniformity and the two
ratio metrics, token-wise similarity, and singular-value anisotropy measures.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numkernel as nk
from .errors import DegenerateError, InputError
from .model import ModelConfig, forward_many
from .template import DEFAULT_SUFFIX, render_single, render_two_stage
from .tokenizer import Vocab, encode

MAX_NEGATIVE_PAIRS = 100_000
KAPPA_RTOL = 1e-12


# ---------------------------------------------------------------- basics

def cosine(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateError("cosine of a zero vector is undefined")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def average_ranks(x) -> np.ndarray:
    """1-based ranks; tied values share the mean of their positions."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(pred, gold) -> float:
    """Spearman's rho: Pearson correlation of average-tie ranks.

    Ranks are doubled and centred so every intermediate is an integer held
    exactly in float64; the only rounding is the final sqrt and division.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape or pred.ndim != 1:
        raise InputError(f"spearman needs equal-length 1-d lists, got {pred.shape} and {gold.shape}")
    n = len(pred)
    if n < 2:
        raise InputError("spearman needs at least two items")
    a = 2.0 * average_ranks(pred) - (n + 1)
    b = 2.0 * average_ranks(gold) - (n + 1)
    saa, sbb = float(a @ a), float(b @ b)
    if saa == 0.0 or sbb == 0.0:
        raise DegenerateError("spearman is undefined for a constant list")
    if saa == sbb:
        return float(a @ b) / saa
    return float(a @ b) / math.sqrt(saa * sbb)


def _unit_rows(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InputError(f"expected a 2-d embedding matrix, got shape {x.shape}")
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DegenerateError("zero-norm embedding cannot be normalised")
    return x / norms


def _pair_sqdist(left, right) -> np.ndarray:
    diff = _unit_rows(left) - _unit_rows(right)
    return np.sum(diff * diff, axis=1)


def _split_pairs(pairs):
    if isinstance(pairs, tuple) and len(pairs) == 2:
        left, right = pairs
    else:
        arr = np.asarray(pairs, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] != 2:
            raise InputError("pairs must be (left, right) matrices or an array of shape (n, 2, d)")
        left, right = arr[:, 0], arr[:, 1]
    left = np.asarray(left, dtype=np.float64)
    right = np.asarray(right, dtype=np.float64)
    if left.shape != right.shape or left.ndim != 2 or left.shape[0] == 0:
        raise InputError("need at least one positive pair of equal-shape embeddings")
    return left, right


def negative_pairs(n: int, cap: int = MAX_NEGATIVE_PAIRS, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Indices of unordered distinct pairs i<j; a deterministic sample when there are more than ``cap``."""
    if n < 2:
        raise InputError("need at least two embeddings for the negative pool")
    i, j = np.triu_indices(n, k=1)
    if len(i) > cap:
        keep = np.sort(np.random.default_rng(seed).choice(len(i), size=cap, replace=False))
        i, j = i[keep], j[keep]
    return i, j


def _negative_sqdist(embeddings, cap=MAX_NEGATIVE_PAIRS) -> np.ndarray:
    x = _unit_rows(embeddings)
    i, j = negative_pairs(x.shape[0], cap)
    diff = x[i] - x[j]
    return np.sum(diff * diff, axis=1)


def _log_mean_exp(v: np.ndarray) -> float:
    m = float(np.max(v))
    return m + math.log(float(np.mean(np.exp(v - m))))


# ---------------------------------------------------------------- alignment / uniformity

def alignment(pairs) -> float:
    """Mean squared distance between L2-normalised positive-pair embeddings."""
    left, right = _split_pairs(pairs)
    return float(np.mean(_pair_sqdist(left, right)))


def uniformity(embeddings, cap: int = MAX_NEGATIVE_PAIRS) -> float:
    """``log mean exp(-2 * ||x - y||^2)`` over unordered distinct pairs of normalised embeddings."""
    return _log_mean_exp(-2.0 * _negative_sqdist(embeddings, cap))


def ratio1(pairs, embeddings, cap: int = MAX_NEGATIVE_PAIRS) -> float:
    """Mean positive squared distance over mean negative squared distance."""
    left, right = _split_pairs(pairs)
    num = float(np.mean(_pair_sqdist(left, right)))
    den = float(np.mean(_negative_sqdist(embeddings, cap)))
    if den == 0.0:
        raise DegenerateError("ratio1: all embeddings coincide (zero negative distance)")
    return num / den


def ratio2(pairs, embeddings, cap: int = MAX_NEGATIVE_PAIRS) -> float:
    """``log mean exp(2 d+^2) / log mean exp(2 d-^2)``, positive pairs over negative pairs.

    Note the exponent is +2 in both logs, unlike uniformity's -2.
    """
    left, right = _split_pairs(pairs)
    num = _log_mean_exp(2.0 * _pair_sqdist(left, right))
    den = _log_mean_exp(2.0 * _negative_sqdist(embeddings, cap))
    if den == 0.0:
        raise DegenerateError("ratio2: all embeddings coincide (denominator log is zero)")
    return num / den


# ---------------------------------------------------------------- token matrix diagnostics

def token_similarity(x) -> float:
    """Mean cosine over ordered pairs i != j of the rows of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InputError("token_similarity needs at least two rows")
    u = _unit_rows(x)
    g = u @ u.T
    n = x.shape[0]
    return float((g.sum() - np.trace(g)) / (n * (n - 1)))


def condition_number(x) -> float:
    """``sigma_max / sigma_min``; ``inf`` when ``sigma_min < 1e-12 * sigma_max``."""
    sv = nk.singular_values(x)
    if sv[0] == 0.0:
        raise DegenerateError("condition number of the zero matrix is undefined")
    if sv[-1] < KAPPA_RTOL * sv[0]:
        return math.inf
    return float(sv[0] / sv[-1])


def entropy_from_singular_values(sv) -> float:
    sv = np.asarray(sv, dtype=np.float64)
    energy = sv * sv
    total = energy.sum()
    if total == 0.0:
        raise InputError("singular-value entropy needs a non-zero matrix")
    p = energy[energy > 0] / total
    return float(max(0.0, -np.sum(p * np.log(p))))


def sv_entropy(x) -> float:
    """Shannon entropy (nats) of ``sigma_i^2 / sum sigma_j^2``."""
    return entropy_from_singular_values(nk.singular_values(x))


# ---------------------------------------------------------------- eval files

@dataclass(frozen=True)
class PromptConfig:
    """How a sentence becomes an embedding: ``two-stage`` uses the final rep token,
    ``single`` the rep token of one template."""

    style: str = "two-stage"
    prefix_kind: str = "sth"
    suffix_text: str = DEFAULT_SUFFIX

    def render(self, vocab: Vocab, text: str) -> tuple[tuple[int, ...], int]:
        if self.style == "two-stage":
            p = render_two_stage(vocab, self.prefix_kind, self.suffix_text, text)
            return p.ids, p.rep2_pos
        if self.style == "single":
            r = render_single(vocab, self.prefix_kind, text)
            return r.ids, r.rep_pos
        raise InputError(f"unknown prompt style {self.style!r}")


def read_eval_file(path) -> list[tuple[str, str, float]]:
    """Parse ``sentence1<TAB>sentence2<TAB>score`` lines (score in [0, 5])."""
    out = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise InputError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
        try:
            score = float(parts[2])
        except ValueError:
            raise InputError(f"{path}:{lineno}: score {parts[2]!r} is not a number") from None
        if not (math.isfinite(score) and 0.0 <= score <= 5.0):
            raise InputError(f"{path}:{lineno}: score {score} outside [0, 5]")
        out.append((parts[0], parts[1], score))
    if not out:
        raise InputError(f"{path}: no evaluation pairs")
    return out


def embed_sentences(params, cfg: ModelConfig, vocab: Vocab, sentences: Sequence[str],
                    prompt: PromptConfig = PromptConfig()) -> np.ndarray:
    rendered = [prompt.render(vocab, s) for s in sentences]
    hidden = forward_many(params, cfg, [ids for ids, _ in rendered])
    return np.stack([h[pos] for h, (_, pos) in zip(hidden, rendered)])


def _unique(pairs) -> tuple[list[str], dict[str, int]]:
    order: dict[str, int] = {}
    for a, b, _ in pairs:
        for s in (a, b):
            if s not in order:
                order[s] = len(order)
    return list(order), order


@dataclass
class StsResult:
    spearman: float
    cosines: list[float]
    gold: list[float]


def evaluate_sts(params, cfg: ModelConfig, vocab: Vocab, pairs, prompt: PromptConfig = PromptConfig()) -> StsResult:
    """Cosine per pair from prompt embeddings, then Spearman against gold."""
    if isinstance(pairs, (str, Path)):
        pairs = read_eval_file(pairs)
    sentences, index = _unique(pairs)
    emb = embed_sentences(params, cfg, vocab, sentences, prompt)
    cos = [cosine(emb[index[a]], emb[index[b]]) for a, b, _ in pairs]
    gold = [g for _, _, g in pairs]
    return StsResult(spearman(cos, gold), cos, gold)


# ---------------------------------------------------------------- full report

@dataclass
class DiagnosticsReport:
    spearman: float | None = None
    alignment: float | None = None
    uniformity: float | None = None
    ratio1: float | None = None
    ratio2: float | None = None
    tok_sim: float | None = None
    kappa: float | None = None
    sv_entropy: float | None = None
    n_positive_pairs: int = 0
    n_negative_pairs: int = 0
    kappa_infinite: int = 0
    notes: list[str] | None = None

    def to_json_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = str(v)
        return d


def token_diagnostics(hidden_list: Sequence[np.ndarray]) -> tuple[float, float, float, int]:
    """Average TokSim, finite kappa and entropy over per-sentence token matrices.

    Returns ``(tok_sim, kappa, entropy, n_infinite_kappa)``.
    """
    sims, kappas, ents, n_inf = [], [], [], 0
    for x in hidden_list:
        if x.shape[0] < 2:
            continue
        sims.append(token_similarity(x))
        sv = nk.singular_values(x)
        ents.append(entropy_from_singular_values(sv))
        if sv[-1] < KAPPA_RTOL * sv[0]:
            n_inf += 1
        else:
            kappas.append(sv[0] / sv[-1])
    if not sims:
        raise InputError("no sentence has at least two tokens")
    kappa = float(np.mean(kappas)) if kappas else math.inf
    return float(np.mean(sims)), kappa, float(np.mean(ents)), n_inf


def diagnose(params, cfg: ModelConfig, vocab: Vocab, pairs, prompt: PromptConfig = PromptConfig(),
             positive_threshold: float = 4.0) -> DiagnosticsReport:
    """Every metric for one checkpoint on one eval set.

    Sentence embeddings come from ``prompt``; token matrices for TokSim /
    kappa / entropy are the final hidden states of the bare sentence with the
    BOS row dropped.
    """
    if isinstance(pairs, (str, Path)):
        pairs = read_eval_file(pairs)
    report = DiagnosticsReport(notes=[])
    sentences, index = _unique(pairs)
    emb = embed_sentences(params, cfg, vocab, sentences, prompt)
    cos = [cosine(emb[index[a]], emb[index[b]]) for a, b, _ in pairs]
    try:
        report.spearman = spearman(cos, [g for _, _, g in pairs])
    except DegenerateError as exc:
        report.notes.append(f"spearman: {exc}")
    pos = [(index[a], index[b]) for a, b, g in pairs if g >= positive_threshold]
    report.n_positive_pairs = len(pos)
    report.n_negative_pairs = len(negative_pairs(len(sentences))[0]) if len(sentences) >= 2 else 0
    try:
        report.uniformity = uniformity(emb)
    except (DegenerateError, InputError) as exc:
        report.notes.append(f"uniformity: {exc}")
    if pos:
        left = emb[[i for i, _ in pos]]
        right = emb[[j for _, j in pos]]
        report.alignment = alignment((left, right))
        for name, fn in (("ratio1", ratio1), ("ratio2", ratio2)):
            try:
                setattr(report, name, fn((left, right), emb))
            except (DegenerateError, InputError) as exc:
                report.notes.append(f"{name}: {exc}")
    else:
        report.notes.append(f"no pair with gold >= {positive_threshold}")
    bare = [encode(vocab, s)[: cfg.max_seq_len] for s in sentences]
    hidden = forward_many(params, cfg, bare)
    try:
        tok_sim, kappa, ent, n_inf = token_diagnostics([h[1:] for h in hidden])
        report.tok_sim, report.kappa, report.sv_entropy, report.kappa_infinite = tok_sim, kappa, ent, n_inf
    except InputError as exc:
        report.notes.append(f"token diagnostics: {exc}")
    return report
