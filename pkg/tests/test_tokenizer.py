import pytest
from hypothesis import given
from hypothesis import strategies as st

from sfplab.errors import InputError
from sfplab.template import TemplateKind
from sfplab.tokenizer import BOS, PAD, RESERVED, UNK, build_vocab, decode, encode, tokenize


def test_reserved_ids(small_vocab):
    assert (PAD, UNK, BOS) == (0, 1, 2)
    assert small_vocab.itos[:3] == RESERVED


def test_min_freq_threshold():
    v = build_vocab("a a b", min_freq=2)
    assert "a" in v and "b" not in v


def test_build_is_deterministic():
    assert build_vocab("x y y z\nz z").itos == build_vocab("x y y z\nz z").itos


def test_frequency_then_lexicographic_order():
    v = build_vocab("qq pp pp rr rr", min_freq=1)
    corpus_part = [t for t in v.itos if t in {"pp", "qq", "rr"}]
    assert corpus_part == ["pp", "rr", "qq"]


def test_template_words_in_vocab():
    corpus = "\n".join(k.text for k in TemplateKind)
    v = build_vocab(corpus)
    for w in ("sentence", "means", "summarized", "word"):
        assert w in v


def test_template_words_forced_even_when_rare():
    v = build_vocab("completely unrelated", min_freq=5)
    for kind in TemplateKind:
        ids = encode(v, kind.text.replace("[Text]", ""))
        assert UNK not in ids


def test_empty_corpus_rejected():
    with pytest.raises(InputError):
        build_vocab("")
    with pytest.raises(InputError):
        build_vocab(["", "   "])


def test_encode_cases():
    v = build_vocab("a a")
    assert encode(v, "") == [BOS]
    assert encode(v, "a a") == [BOS, v.id("a"), v.id("a")]
    assert encode(v, "zzz") == [BOS, UNK]


def test_punctuation_split_and_case_fold():
    assert tokenize('This sentence : "Hi," he said.') == ["this", "sentence", ":", '"', "hi", ",", '"', "he", "said", "."]
    assert tokenize("A?b") == ["a", "?", "b"]


def test_decode_cases():
    v = build_vocab("a a")
    assert decode(v, [BOS, v.id("a")]) == "a"
    assert decode(v, [BOS]) == ""
    with pytest.raises(InputError):
        decode(v, [BOS, len(v)])


def test_round_trip_in_vocab_text(small_vocab):
    text = "The Dog  chases the CAT"
    assert decode(small_vocab, encode(small_vocab, text)) == "the dog chases the cat"


@given(st.lists(st.integers(min_value=3, max_value=40), max_size=20))
def test_encode_decode_ids_round_trip(body):
    v = build_vocab("the dog chases the cat\na cat watches the bird")
    ids = [BOS] + [i % len(v) if i % len(v) >= 3 else 3 for i in body]
    assert encode(v, decode(v, ids)) == ids
