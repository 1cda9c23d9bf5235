"""Word-level tokenizer with a corpus-built vocabulary."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError

PAD, UNK, BOS = 0, 1, 2
RESERVED = ("<pad>", "<unk>", "<bos>")

_TOKEN_RE = re.compile(r"[^\W_]+(?:'[^\W_]+)*|\S", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Case-fold and split into words; every punctuation mark is its own token."""
    return _TOKEN_RE.findall(text.casefold())


@dataclass(frozen=True)
class Vocab:
    itos: tuple[str, ...]
    stoi: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if tuple(self.itos[:3]) != RESERVED:
            raise InputError(f"vocab must start with reserved tokens {RESERVED}")
        stoi = {t: i for i, t in enumerate(self.itos)}
        if len(stoi) != len(self.itos):
            raise InputError("vocab contains duplicate tokens")
        object.__setattr__(self, "stoi", stoi)

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK) for t in tokens]


def builtin_tokens() -> list[str]:
    """Tokens of every built-in template and the default suffix."""
    from .template import builtin_template_texts

    out: list[str] = []
    for text in builtin_template_texts():
        out.extend(tokenize(text))
    return out


def build_vocab(corpus: str | Sequence[str], min_freq: int = 1, extra_tokens: Iterable[str] = ()) -> Vocab:
    """Build a vocabulary from line-separated text.

    Keeps corpus tokens seen at least ``min_freq`` times plus every template
    token. Order after the reserved ids: frequency descending, then
    lexicographic.
    """
    lines = corpus.splitlines() if isinstance(corpus, str) else list(corpus)
    if not any(line.strip() for line in lines):
        raise InputError("cannot build a vocabulary from an empty corpus")
    counts: Counter[str] = Counter()
    for line in lines:
        counts.update(tokenize(line))
    keep = {t for t, c in counts.items() if c >= min_freq}
    forced = set(builtin_tokens())
    for extra in extra_tokens:
        forced.update(tokenize(extra))
    keep |= forced
    keep -= set(RESERVED)
    ordered = sorted(keep, key=lambda t: (-counts.get(t, 0), t))
    return Vocab(RESERVED + tuple(ordered))


def encode(vocab: Vocab, text: str) -> list[int]:
    return [BOS] + vocab.ids(tokenize(text))


def decode(vocab: Vocab, ids: Sequence[int]) -> str:
    n = len(vocab)
    toks = []
    for k, i in enumerate(ids):
        i = int(i)
        if not 0 <= i < n:
            raise InputError(f"token id {i} outside vocabulary of size {n}")
        if k == 0 and i == BOS:
            continue
        toks.append(vocab.itos[i])
    return " ".join(toks)
