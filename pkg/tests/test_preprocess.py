from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from emojipred.preprocess import (
    CLS_ID,
    PAD_ID,
    RESERVED,
    UNK_ID,
    URL_TOKEN,
    NormalizationConfig,
    UrlPolicy,
    WordVocabulary,
    build_word_vocab,
    normalize,
    tokenize,
)


def test_config_defaults():
    cfg = NormalizationConfig()
    assert cfg.replace_digit_runs and not cfg.lowercase
    assert cfg.url_policy is UrlPolicy.KEEP
    assert NormalizationConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize(
    "raw, expected",
    [
        ("back in 48 minutes", "back in num minutes"),
        ("", ""),
        ("#FridayFeeling", "FridayFeeling"),
        ("so much #FridayFeeling", "so much FridayFeeling"),
        ("t.co/qx3vb91k7w", "t.co/qxnumvbnumknumw"),
        ("rt @sam_k42: @night_owl", "rt @sam_knum: @night_owl"),
        ("Keep Going, friends", "Keep Going, friends"),
        ("#2020", "num"),
        ("v8 engine", "vnum engine"),
    ],
)
def test_normalize(raw, expected):
    assert normalize(raw) == expected


def test_normalize_options():
    cfg = NormalizationConfig(lowercase=True, url_policy=UrlPolicy.REPLACE_TOKEN)
    assert normalize("Look https://t.co/Zk2mQ8rTa1 NOW 5", cfg) == f"look {URL_TOKEN} now num"
    assert normalize("x 12", NormalizationConfig(replace_digit_runs=False)) == "x 12"


@given(st.text())
def test_normalize_idempotent(text):
    once = normalize(text)
    assert normalize(once) == once


@given(st.text())
def test_normalize_idempotent_all_options(text):
    cfg = NormalizationConfig(lowercase=True, url_policy=UrlPolicy.REPLACE_TOKEN)
    once = normalize(text, cfg)
    assert normalize(once, cfg) == once


def test_vocab_threshold():
    vocab = build_word_vocab(["a a b"], min_frequency=2)
    assert "a" in vocab and "b" not in vocab


def test_vocab_empty_corpus():
    vocab = build_word_vocab([], min_frequency=3)
    assert vocab.tokens == RESERVED
    assert (vocab.id("[PAD]"), vocab.id("[UNK]"), vocab.id("[CLS]")) == (PAD_ID, UNK_ID, CLS_ID)


def test_vocab_order():
    corpus = ["x y", "y z"]
    # hand count: y=2, x=1, z=1 -> y, then x < z lexicographically
    counts = Counter(w for line in corpus for w in line.split())
    expected = sorted(counts, key=lambda w: (-counts[w], w))
    assert expected == ["y", "x", "z"]
    vocab = build_word_vocab(corpus, 1)
    assert [vocab.id(w) for w in expected] == [3, 4, 5]


def test_vocab_rejects_bad_threshold():
    with pytest.raises(ValueError):
        build_word_vocab(["a"], 0)


def test_vocab_tsv_roundtrip(tmp_path):
    vocab = build_word_vocab(["b a a", "c"], 1)
    path = tmp_path / "words.tsv"
    vocab.save(path)
    assert path.read_text().splitlines()[3] == "a\t3\t2"
    loaded = WordVocabulary.load(path)
    assert loaded.tokens == vocab.tokens and loaded.frequencies == vocab.frequencies
    assert loaded.digest() == vocab.digest()


def test_tokenize_contracts():
    vocab = build_word_vocab(["hello world"], 1)
    assert tokenize("", vocab).tokens == (CLS_ID,)
    assert tokenize("zzzz-unseen-token", vocab).tokens == (CLS_ID, UNK_ID)
    long_text = " ".join(["hello"] * 200)
    doc = tokenize(long_text, vocab, 128)
    assert doc.length == 128
    assert doc.tokens[0] == CLS_ID


@given(st.lists(st.sampled_from(["a", "b", "c", "zz", "q"]), max_size=60), st.integers(1, 40))
def test_tokenize_bounds(words, max_len):
    vocab = build_word_vocab(["a b c"], 1)
    doc = tokenize(" ".join(words), vocab, max_len)
    assert 1 <= doc.length <= max_len
    assert max(doc.tokens) < len(vocab)
