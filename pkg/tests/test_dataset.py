from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from synth import POOL, planted_corpus

from emojipred.dataset import (
    MULTICLASS,
    BalanceConfig,
    EmojiVocabulary,
    LabeledExample,
    RawRecord,
    balance,
    build,
    build_vocab_topk,
    count_emoji_frequencies,
    label_multiclass,
    label_multilabel,
    read_corpus,
    read_dataset,
    split,
    stats,
    write_dataset,
)
from emojipred.errors import ConfigError, DatasetError, VocabularyError
from emojipred.preprocess import build_word_vocab


def _vocab(*emojis):
    return EmojiVocabulary(tuple(emojis), tuple(range(len(emojis), 0, -1)))


def test_count_simple():
    records = [RawRecord("1", "hi 😂😂"), RawRecord("2", "yo 😂❤️")]
    assert count_emoji_frequencies(records) == {"😂": 3, "❤️": 1}
    assert count_emoji_frequencies([]) == {}


def test_count_skips_unreadable():
    diag = {}
    records = [RawRecord("1", "ok 😂"), RawRecord("2", "bad \ud800"), RawRecord("3", None)]
    assert count_emoji_frequencies(records, diagnostics=diag) == {"😂": 1}
    assert diag["skipped"] == 2


def test_count_planted():
    records, planted = planted_corpus(1000, seed=3)
    expected = Counter(e for row in planted for e in row)
    assert count_emoji_frequencies(records) == expected


def test_count_canonicalizes_unqualified():
    records = [RawRecord("1", "❤ and ❤️")]
    assert count_emoji_frequencies(records) == {"❤️": 2}
    assert count_emoji_frequencies(records, canonical=False) == {"❤": 1, "❤️": 1}


def test_topk_basic_and_ties():
    assert build_vocab_topk({"😂": 3, "❤️": 1}, 1).emojis == ("😂",)
    assert build_vocab_topk({"b": 2, "a": 2, "c": 1}, 2).emojis == ("a", "b")


def test_topk_too_large():
    with pytest.raises(VocabularyError, match="250"):
        build_vocab_topk({chr(0x1F300 + i): 1 for i in range(250)}, 300)


def test_topk_planted_heavy_hitters():
    weights = [50.0 - i for i in range(20)] + [0.5] * (len(POOL) - 20)
    records, planted = planted_corpus(3000, weights=weights, seed=5)
    counts = Counter(e for row in planted for e in row)
    brute = sorted(counts, key=lambda e: (-counts[e], e))[:20]
    vocab = build_vocab_topk(count_emoji_frequencies(records), 20)
    assert list(vocab.emojis) == brute
    assert set(vocab.emojis) == set(POOL[:20])
    assert list(vocab.frequencies) == sorted(vocab.frequencies, reverse=True)


def test_label_multiclass_duplicates():
    vocab = _vocab("😂", "❤️")
    out = label_multiclass(RawRecord("r", "fun 😂❤️😂"), vocab)
    assert [(ex.text, ex.label) for ex in out] == [("fun", 0), ("fun", 1)]
    assert label_multiclass(RawRecord("r", "no emojis"), vocab) == []
    assert label_multiclass(RawRecord("r", "🌙 only"), vocab) == []


def test_label_multilabel():
    vocab = _vocab("😂", "❤️", "🔥")
    ex = label_multilabel(RawRecord("r", "fun 😂❤️😂"), vocab)
    assert ex.label == frozenset({0, 1})
    assert ex.bitset(3).tolist() == [True, True, False]
    assert label_multilabel(RawRecord("r", "plain"), vocab) is None


def test_label_text_is_stripped_and_normalized():
    vocab = _vocab("🔥")
    (ex,) = label_multiclass(RawRecord("r", "r2 remix 🔥 slept 9 hours #GameDay"), vocab)
    assert ex.text == "rnum remix slept num hours GameDay"


def _mc(counts):
    out = []
    for label, n in counts.items():
        out += [LabeledExample(f"t{label}-{i}", label, f"{label}-{i}") for i in range(n)]
    return out


def test_balance_counts():
    out = balance(_mc({0: 100, 1: 10}), BalanceConfig(cap=50, floor=20, seed=1))
    assert Counter(ex.label for ex in out) == {0: 50, 1: 20}
    untouched = balance(_mc({0: 30}), BalanceConfig(cap=50, floor=20))
    assert Counter(ex.label for ex in untouched) == {0: 30}


def test_balance_downsample_without_replacement():
    out = balance(_mc({0: 100}), BalanceConfig(cap=40, floor=0, seed=2))
    assert len({ex.origin_id for ex in out}) == 40


def test_balance_deterministic():
    data = _mc({0: 70, 1: 5, 2: 33})
    cfg = BalanceConfig(cap=40, floor=10, seed=9)
    assert balance(data, cfg) == balance(data, cfg)
    assert balance(data, cfg) != balance(data, BalanceConfig(cap=40, floor=10, seed=10))


def test_balance_config_errors():
    with pytest.raises(ConfigError):
        BalanceConfig(cap=10, floor=20)
    with pytest.raises(DatasetError):
        balance([LabeledExample("x", frozenset({0}), "a")], BalanceConfig(5, 1))


@settings(max_examples=50, deadline=None)
@given(
    st.dictionaries(st.integers(0, 9), st.integers(1, 80), min_size=1, max_size=6),
    st.integers(1, 60),
    st.integers(0, 60),
    st.integers(0, 2**16),
)
def test_balance_bounds(counts, cap, floor, seed):
    floor = min(floor, cap)
    out = balance(_mc(counts), BalanceConfig(cap, floor, seed))
    after = Counter(ex.label for ex in out)
    for label, n in counts.items():
        assert min(n, floor) <= after[label] <= cap
        assert after[label] == min(max(n, floor), cap)


def test_split_sizes_and_groups():
    data = [LabeledExample(f"t{i}", 0, f"o{i}") for i in range(10)]
    train, dev, test = split(data, (0.8, 0.1, 0.1), seed=0)
    assert (len(train), len(dev), len(test)) == (8, 1, 1)
    assert sorted(train + dev + test, key=lambda e: e.origin_id) == sorted(data, key=lambda e: e.origin_id)

    dup = [LabeledExample("same", c, "shared") for c in range(3)] + data
    for seed in range(20):
        parts = split(dup, seed=seed)
        holders = [i for i, p in enumerate(parts) if any(e.origin_id == "shared" for e in p)]
        assert len(holders) == 1
        assert sum(e.origin_id == "shared" for e in parts[holders[0]]) == 3


def test_split_reproducible_and_errors():
    data = [LabeledExample(f"t{i}", 0, f"o{i}") for i in range(50)]
    assert split(data, seed=4) == split(data, seed=4)
    with pytest.raises(ConfigError):
        split(data, (0.5, 0.5, 0.1))
    with pytest.raises(ConfigError):
        split(data, (1.0, 0.0, 0.0))


def test_stats():
    two = [LabeledExample("a", frozenset({0}), "1"), LabeledExample("b", frozenset({0, 1, 2}), "2")]
    s = stats(two)
    assert s.mean_labels_per_example == 2.0
    assert s.class_histogram == {0: 2, 1: 1, 2: 1}
    assert (s.max_class_count, s.min_class_count) == (2, 1)
    empty = stats([])
    assert empty.example_count == 0 and empty.mean_labels_per_example is None
    assert "mean_labels_per_example" not in empty.to_dict()


def test_stats_planted_histogram():
    records, planted = planted_corpus(2000, seed=11)
    vocab = build_vocab_topk(count_emoji_frequencies(records), len(POOL))
    examples = [ex for r in records for ex in label_multiclass(r, vocab)]
    expected = Counter(e for row in planted for e in set(row))
    got = {vocab.emojis[k]: v for k, v in stats(examples).class_histogram.items()}
    assert got == expected


def test_dataset_file_roundtrip(tmp_path):
    vocab = _vocab("😂", "❤️")
    data = [LabeledExample("fun", 0, "a"), LabeledExample("fun", 1, "a")]
    path = tmp_path / "train.jsonl"
    write_dataset(path, data, vocab, {"setting": MULTICLASS, "seed": 1})
    header, back = read_dataset(path, vocab)
    assert back == data and header["K"] == 2
    with pytest.raises(DatasetError, match="hash"):
        read_dataset(path, _vocab("😂", "🔥"))


def test_read_corpus_errors(tmp_path):
    good = tmp_path / "c.jsonl"
    good.write_text('{"id": 1, "text": "hi 😂"}\n\n{"id": "2", "text": "yo"}\n', encoding="utf-8")
    assert [r.id for r in read_corpus(good)] == ["1", "2"]
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": 1, "text": "ok"}\n{"id": 2, "text": \n', encoding="utf-8")
    with pytest.raises(DatasetError, match=":2:"):
        read_corpus(bad)
    dup = tmp_path / "dup.jsonl"
    dup.write_text('{"id": 1, "text": "a"}\n{"id": 1, "text": "b"}\n', encoding="utf-8")
    with pytest.raises(DatasetError, match="duplicate"):
        read_corpus(dup)
    with pytest.raises(DatasetError):
        read_corpus(tmp_path / "missing.jsonl")


def test_build_pipeline_invariants():
    records, planted = planted_corpus(1500, seed=21)
    result = build(records, 12, MULTICLASS, seed=3, balance_config=BalanceConfig(cap=400, floor=30, seed=3))
    all_ex = [ex for part in result.splits.values() for ex in part]
    assert all(0 <= ex.label < 12 for ex in all_ex)
    # dev/test are never resampled, and no origin straddles splits
    origins = [{ex.origin_id for ex in result.splits[name]} for name in ("train", "dev", "test")]
    assert not (origins[0] & origins[1]) and not (origins[0] & origins[2]) and not (origins[1] & origins[2])
    assert result.word_vocab == build_word_vocab(
        dict((ex.origin_id, ex.text) for ex in result.splits["train"]).values(), 1
    )
    assert np.all(np.array(list(stats(result.splits["train"]).class_histogram.values())) <= 400)
