"""Prompt rendering for single-stage and two-stage (prefix + suffix) templates."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigError, UsageError
from .tokenizer import BOS, Vocab, tokenize

TEXT_SLOT = "[Text]"
DEFAULT_SUFFIX = "it can be summarized as"
JOINER = ","


class TemplateKind(str, enum.Enum):
    EOL = "eol"
    SUM = "sum"
    STH = "sth"

    @property
    def text(self) -> str:
        return _TEMPLATES[self]

    @classmethod
    def parse(cls, name) -> "TemplateKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ConfigError(f"unknown template {name!r}; expected eol, sum or sth") from None


_TEMPLATES = {
    TemplateKind.EOL: 'This sentence : " [Text] " means in one word : "',
    TemplateKind.SUM: 'This sentence : " [Text] " can be summarized as',
    TemplateKind.STH: 'This sentence : " [Text] " means something',
}


def builtin_template_texts() -> list[str]:
    return [t.replace(TEXT_SLOT, "") for t in _TEMPLATES.values()] + [DEFAULT_SUFFIX, JOINER]


@dataclass(frozen=True)
class Rendered:
    ids: tuple[int, ...]
    rep_pos: int


@dataclass(frozen=True)
class TwoStagePrompt:
    ids: tuple[int, ...]
    rep1_pos: int
    rep2_pos: int
    prefix_len: int

    def __len__(self):
        return len(self.ids)


def _split(kind: TemplateKind) -> tuple[list[str], list[str]]:
    head, tail = kind.text.split(TEXT_SLOT)
    return tokenize(head), tokenize(tail)


def render_single(vocab: Vocab, kind, text: str) -> Rendered:
    """BOS + template with ``text`` in its slot; the last token is the rep token."""
    kind = TemplateKind.parse(kind)
    head, tail = _split(kind)
    ids = [BOS] + vocab.ids(head) + vocab.ids(tokenize(text)) + vocab.ids(tail)
    return Rendered(tuple(ids), len(ids) - 1)


def render_two_stage(vocab: Vocab, prefix, suffix_text: str, text: str) -> TwoStagePrompt:
    """``render_single(prefix, text) , suffix`` with both rep positions recorded."""
    if TEXT_SLOT.lower() in suffix_text.lower():
        raise UsageError("suffix template must not contain a [Text] slot")
    first = render_single(vocab, prefix, text)
    tail = vocab.ids([JOINER] + tokenize(suffix_text))
    ids = first.ids + tuple(tail)
    return TwoStagePrompt(ids=ids, rep1_pos=first.rep_pos, rep2_pos=len(ids) - 1, prefix_len=len(first.ids))
