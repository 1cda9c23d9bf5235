"""Deterministic toy corpus and synthetic STS pairs with rule-assigned gold scores.

Every content word belongs to a synonym pair inside one theme, so the four
similarity bands are checkable from the text alone:

====  ==================================================
5.0   a sentence paired with itself
4.0   one content word replaced by its synonym
2.0   two independent sentences drawn from the same theme
0.0   two sentences from different themes
====  ==================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError

# theme -> slot -> synonym pairs
DEFAULT_THEMES: dict[str, dict[str, list[tuple[str, str]]]] = {
    "farm": {
        "subj": [("dog", "hound"), ("cat", "kitten"), ("horse", "pony"), ("cow", "heifer"),
                 ("farmer", "grower"), ("goat", "billy")],
        "verb": [("chases", "pursues"), ("watches", "observes"), ("feeds", "nourishes"),
                 ("carries", "hauls"), ("finds", "discovers"), ("pushes", "shoves")],
        "obj": [("sheep", "lamb"), ("hay", "straw"), ("fence", "railing"), ("tractor", "plough"),
                ("bucket", "pail"), ("chicken", "hen")],
        "adj": [("muddy", "dirty"), ("old", "aged"), ("lazy", "idle"), ("brown", "tan")],
        "place": [("barn", "stable"), ("field", "meadow"), ("farm", "ranch"), ("yard", "paddock")],
    },
    "kitchen": {
        "subj": [("chef", "cook"), ("baker", "pastrycook"), ("waiter", "server"), ("mother", "mom"),
                 ("child", "kid"), ("guest", "visitor")],
        "verb": [("cuts", "slices"), ("bakes", "roasts"), ("stirs", "mixes"), ("serves", "presents"),
                 ("tastes", "samples"), ("cleans", "scrubs")],
        "obj": [("bread", "loaf"), ("soup", "broth"), ("cake", "gateau"), ("onion", "shallot"),
                ("pan", "skillet"), ("plate", "dish")],
        "adj": [("hot", "warm"), ("fresh", "new"), ("sweet", "sugary"), ("large", "big")],
        "place": [("kitchen", "galley"), ("oven", "stove"), ("table", "counter"), ("bakery", "patisserie")],
    },
    "city": {
        "subj": [("driver", "motorist"), ("officer", "policeman"), ("student", "pupil"),
                 ("banker", "financier"), ("tourist", "traveler"), ("builder", "constructor")],
        "verb": [("parks", "stops"), ("repairs", "fixes"), ("paints", "colors"), ("sells", "trades"),
                 ("photographs", "films"), ("inspects", "examines")],
        "obj": [("car", "automobile"), ("bus", "coach"), ("bicycle", "bike"), ("building", "tower"),
                ("sign", "billboard"), ("taxi", "cab")],
        "adj": [("busy", "crowded"), ("noisy", "loud"), ("modern", "contemporary"), ("tall", "high")],
        "place": [("street", "road"), ("station", "terminal"), ("square", "plaza"), ("garage", "carport")],
    },
    "sea": {
        "subj": [("sailor", "seaman"), ("captain", "skipper"), ("fisherman", "angler"),
                 ("diver", "swimmer"), ("pirate", "buccaneer"), ("gull", "seabird")],
        "verb": [("steers", "navigates"), ("catches", "nets"), ("spots", "sights"), ("anchors", "moors"),
                 ("loads", "packs"), ("sinks", "scuttles")],
        "obj": [("boat", "vessel"), ("fish", "trout"), ("sail", "canvas"), ("rope", "line"),
                ("anchor", "mooring"), ("crab", "lobster")],
        "adj": [("salty", "briny"), ("wet", "damp"), ("stormy", "rough"), ("blue", "azure")],
        "place": [("harbor", "port"), ("ocean", "sea"), ("beach", "shore"), ("island", "isle")],
    },
}

# word slots per pattern; "the"/"a"/prepositions are filler
PATTERNS: tuple[tuple[str, ...], ...] = (
    ("the", "subj", "verb", "the", "obj"),
    ("the", "adj", "subj", "verb", "the", "obj"),
    ("the", "subj", "verb", "the", "obj", "in", "the", "place"),
    ("the", "subj", "verb", "the", "adj", "obj", "near", "the", "place", "."),
    ("a", "adj", "subj", "verb", "the", "adj", "obj", "in", "the", "place", "."),
    ("the", "adj", "subj", "quietly", "verb", "a", "adj", "obj", "beside", "the", "place", "."),
)
SLOTS = ("subj", "verb", "obj", "adj", "place")

BANDS = (5.0, 4.0, 2.0, 0.0)


@dataclass
class SynthSpec:
    themes: dict[str, dict[str, list[tuple[str, str]]]] = field(default_factory=lambda: DEFAULT_THEMES)
    count: int = 2000
    n_pairs: int = 400
    min_len: int = 4
    max_len: int = 12
    seed: int = 0

    def validate(self):
        if not self.themes:
            raise ConfigError("at least one theme is required")
        for name, pools in self.themes.items():
            for slot in SLOTS:
                if not pools.get(slot):
                    raise ConfigError(f"theme {name!r} has an empty {slot!r} word pool")
        if self.count < 0 or self.n_pairs < 0:
            raise ConfigError("counts must be non-negative")
        lens = [len(p) for p in PATTERNS]
        if min(lens) < self.min_len or max(lens) > self.max_len:
            raise ConfigError(f"sentence patterns span {min(lens)}..{max(lens)} tokens, "
                              f"outside [{self.min_len}, {self.max_len}]")


def _words(pools, slot) -> list[str]:
    return [w for pair in pools[slot] for w in pair]


def _sentence(rng, pools) -> list[str]:
    pattern = PATTERNS[rng.integers(len(PATTERNS))]
    out = []
    for tok in pattern:
        if tok in SLOTS:
            words = _words(pools, tok)
            out.append(words[rng.integers(len(words))])
        else:
            out.append(tok)
    return out


def _render(tokens: list[str]) -> str:
    s = " ".join(tokens)
    return s.replace(" .", ".")


def gen_corpus(spec: SynthSpec) -> str:
    """One sentence per line, LF-terminated; empty string when ``count == 0``."""
    spec.validate()
    rng = np.random.default_rng([spec.seed, 0])
    names = sorted(spec.themes)
    lines = []
    for _ in range(spec.count):
        theme = names[rng.integers(len(names))]
        lines.append(_render(_sentence(rng, spec.themes[theme])))
    return "".join(line + "\n" for line in lines)


def synonym_map(spec: SynthSpec) -> dict[str, str]:
    out = {}
    for pools in spec.themes.values():
        for slot in SLOTS:
            for a, b in pools[slot]:
                out[a], out[b] = b, a
    return out


def gen_sts_pairs(spec: SynthSpec) -> list[tuple[str, str, float]]:
    spec.validate()
    rng = np.random.default_rng([spec.seed, 1])
    names = sorted(spec.themes)
    syn = synonym_map(spec)
    per_band = [spec.n_pairs // len(BANDS) + (1 if i < spec.n_pairs % len(BANDS) else 0)
                for i in range(len(BANDS))]
    pairs = []
    for band, n in zip(BANDS, per_band):
        for _ in range(n):
            theme = names[rng.integers(len(names))]
            a = _sentence(rng, spec.themes[theme])
            if band == 5.0:
                b = list(a)
            elif band == 4.0:
                slots = [i for i, w in enumerate(a) if w in syn]
                b = list(a)
                i = slots[rng.integers(len(slots))]
                b[i] = syn[a[i]]
            elif band == 2.0:
                b = _sentence(rng, spec.themes[theme])
                while b == a:
                    b = _sentence(rng, spec.themes[theme])
            else:
                other = [t for t in names if t != theme]
                if not other:
                    raise ConfigError("the 0.0 band needs at least two themes")
                b = _sentence(rng, spec.themes[other[rng.integers(len(other))]])
            pairs.append((_render(a), _render(b), band))
    return pairs


def gen_sts(spec: SynthSpec) -> str:
    """Eval TSV text: ``sentence1<TAB>sentence2<TAB>score`` per line."""
    return "".join(f"{a}\t{b}\t{score:.1f}\n" for a, b, score in gen_sts_pairs(spec))


def write_data(spec: SynthSpec, corpus_path, sts_path):
    Path(corpus_path).write_bytes(gen_corpus(spec).encode("utf-8"))
    Path(sts_path).write_bytes(gen_sts(spec).encode("utf-8"))
