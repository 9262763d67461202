"""Synthetic corpora with planted ground truth, shared by the tests."""

import json

import numpy as np

from emojipred.dataset import RawRecord

WORDS = [
    "good", "night", "tomorrow", "is", "a", "new", "day", "love", "happens", "when", "we", "did", "it",
    "hours", "coming", "soon", "me", "too", "fans", "great", "game", "today", "music", "party", "sad",
]

# Emoji-presentation singletons that cannot merge with a neighbour, plus
# multi-scalar sequences of each structural kind.
SIMPLE = ["😂", "🔥", "🙏", "🎉", "😎", "💪", "🌙", "🎵", "🏆", "🌹", "🍷", "🎄", "🚀", "💔", "🌈", "📷"]
COMPLEX = [
    "❤️",  # VS-16
    "👍🏽",  # modifier
    "👨‍👩‍👧",  # ZWJ
    "🇪🇸",  # flag
    "1️⃣",  # keycap
    "🏴󠁧󠁢󠁳󠁣󠁴󠁿",  # tag sequence
    "❤️‍🔥",
    "👩🏻‍💻",
]
POOL = SIMPLE + COMPLEX


def planted_corpus(n_records, pool=POOL, seed=0, max_emojis=4, weights=None):
    """Records with known emoji occurrences.

    Returns ``(records, planted)`` where ``planted[i]`` is the list of emoji
    strings inserted into record ``i``, repeats included, in order.
    """
    rng = np.random.default_rng(seed)
    if weights is None:
        weights = 1.0 / np.arange(1, len(pool) + 1)
    p = np.asarray(weights, dtype=float)
    p = p / p.sum()
    records, planted = [], []
    for i in range(n_records):
        k = int(rng.integers(0, max_emojis + 1))
        chosen = [pool[j] for j in rng.choice(len(pool), size=k, p=p)]
        words = [WORDS[j] for j in rng.integers(0, len(WORDS), size=int(rng.integers(1, 12)))]
        pieces = list(words)
        for e in chosen:
            pieces.insert(int(rng.integers(0, len(pieces) + 1)), e)
        records.append(RawRecord(f"r{i}", " ".join(pieces)))
        planted.append(chosen)
    return records, planted


def separable_corpus(n, n_classes, seed=0, multilabel=False):
    """Posts whose label emoji(s) are signalled by a dedicated keyword each."""
    rng = np.random.default_rng(seed)
    emojis = SIMPLE[:n_classes]
    records = []
    for i in range(n):
        if multilabel:
            k = int(rng.integers(1, 3))
            labels = sorted(rng.choice(n_classes, size=k, replace=False).tolist())
        else:
            labels = [i % n_classes]
        words = [WORDS[j] for j in rng.integers(0, len(WORDS), size=int(rng.integers(2, 6)))]
        words += [f"key{c}" for c in labels]
        rng.shuffle(words)
        records.append(RawRecord(f"s{i}", " ".join(words) + " " + "".join(emojis[c] for c in labels)))
    return records


def write_corpus(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps({"id": r.id, "text": r.text}, ensure_ascii=False) + "\n")
    return path
