"""Heuristic labeling of raw posts: emoji vocabulary, labeling, balancing, splits.

Labels come from the emojis that literally occur in a post. The post text,
with its emojis removed and normalized, becomes the input document.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .emoji_unicode import EmojiDataTable, default_table, extract_emojis, strip_emojis
from .errors import ConfigError, DatasetError, VocabularyError
from .preprocess import (
    DEFAULT_MAX_SEQ_LEN,
    Document,
    NormalizationConfig,
    WordVocabulary,
    build_word_vocab,
    normalize,
    tokenize,
)
from .seeding import rng_stream

log = logging.getLogger(__name__)

MULTICLASS = "multiclass"
MULTILABEL = "multilabel"
SETTINGS = (MULTICLASS, MULTILABEL)
TIE_BREAK_RULE = "frequency descending, then codepoint sequence ascending"
DATASET_FORMAT = "emojipred-dataset/1"


@dataclass(frozen=True)
class RawRecord:
    id: str
    text: str


@dataclass(frozen=True)
class EmojiVocabulary:
    """The label set: emojis ordered by descending corpus frequency."""

    emojis: tuple[str, ...]
    frequencies: tuple[int, ...]
    tie_break_rule: str = TIE_BREAK_RULE
    source_corpus_hash: str = ""
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if len(self.emojis) != len(self.frequencies):
            raise VocabularyError("emoji and frequency lists differ in length")
        if len(set(self.emojis)) != len(self.emojis):
            raise VocabularyError("duplicate emoji in vocabulary")
        object.__setattr__(self, "_index", {e: i for i, e in enumerate(self.emojis)})

    @property
    def K(self) -> int:
        return len(self.emojis)

    def __len__(self) -> int:
        return len(self.emojis)

    def __contains__(self, emoji: str) -> bool:
        return emoji in self._index

    def index(self, emoji: str) -> int:
        return self._index[emoji]

    def to_tsv(self) -> str:
        return "".join(f"{e}\t{i}\t{f}\n" for i, (e, f) in enumerate(zip(self.emojis, self.frequencies)))

    def digest(self) -> str:
        return hashlib.sha256(self.to_tsv().encode("utf-8")).hexdigest()

    def metadata(self) -> dict:
        return {
            "K": self.K,
            "tie_break_rule": self.tie_break_rule,
            "source_corpus_hash": self.source_corpus_hash,
            "sha256": self.digest(),
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")

    @classmethod
    def from_tsv(cls, content: str, **meta) -> "EmojiVocabulary":
        emojis, freqs = [], []
        for lineno, line in enumerate(content.splitlines(), 1):
            parts = line.split("\t")
            if len(parts) != 3 or not parts[2].isdigit() or parts[1] != str(lineno - 1):
                raise VocabularyError(f"malformed emoji vocabulary line {lineno}: {line!r}")
            emojis.append(parts[0])
            freqs.append(int(parts[2]))
        return cls(tuple(emojis), tuple(freqs), **meta)

    @classmethod
    def load(cls, path: str | Path, **meta) -> "EmojiVocabulary":
        return cls.from_tsv(Path(path).read_text(encoding="utf-8"), **meta)


@dataclass(frozen=True)
class LabeledExample:
    """Processed text plus a label index (multi-class) or index set (multi-label)."""

    text: str
    label: int | frozenset[int]
    origin_id: str

    @property
    def is_multilabel(self) -> bool:
        return isinstance(self.label, frozenset)

    @property
    def label_indices(self) -> tuple[int, ...]:
        return tuple(sorted(self.label)) if self.is_multilabel else (self.label,)

    def bitset(self, width: int) -> np.ndarray:
        bits = np.zeros(width, dtype=bool)
        bits[list(self.label_indices)] = True
        return bits

    def document(self, vocab: WordVocabulary, max_seq_len: int = DEFAULT_MAX_SEQ_LEN) -> Document:
        return tokenize(self.text, vocab, max_seq_len, source_id=self.origin_id)


@dataclass(frozen=True)
class BalanceConfig:
    cap: int
    floor: int
    seed: int = 0

    def __post_init__(self) -> None:
        if self.floor > self.cap:
            raise ConfigError(f"balance floor ({self.floor}) exceeds cap ({self.cap})")
        if self.floor < 0 or self.cap < 1:
            raise ConfigError(f"invalid balance bounds cap={self.cap} floor={self.floor}")


def read_corpus(path: str | Path) -> list[RawRecord]:
    """Load a JSON-lines corpus of ``{"id": ..., "text": ...}`` objects."""
    records: list[RawRecord] = []
    seen: set[str] = set()
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DatasetError(f"cannot read corpus {path}: {exc.strerror}") from exc
    with fh:
        try:
            lines = list(fh)
        except UnicodeDecodeError as exc:
            raise DatasetError(f"corpus {path} is not valid UTF-8: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from exc
        if not isinstance(obj, dict) or not isinstance(obj.get("text"), str) or "id" not in obj:
            raise DatasetError(f"{path}:{lineno}: record needs string 'text' and an 'id'")
        rid = str(obj["id"])
        if rid in seen:
            raise DatasetError(f"{path}:{lineno}: duplicate record id {rid!r}")
        seen.add(rid)
        records.append(RawRecord(rid, obj["text"]))
    return records


def count_emoji_frequencies(
    corpus: Iterable[RawRecord],
    table: EmojiDataTable | None = None,
    canonical: bool = True,
    diagnostics: dict | None = None,
) -> Counter:
    """Count every emoji occurrence, repeats within a record included.

    Records whose text cannot be segmented are skipped and tallied under
    ``diagnostics["skipped"]`` when a dict is supplied.
    """
    table = table or default_table()
    counts: Counter = Counter()
    for record in corpus:
        try:
            counts.update(extract_emojis(record.text, table, canonical=canonical))
        except (UnicodeError, TypeError, AttributeError):
            if diagnostics is not None:
                diagnostics["skipped"] = diagnostics.get("skipped", 0) + 1
    return counts


def build_vocab_topk(freqs: dict[str, int], K: int, source_corpus_hash: str = "") -> EmojiVocabulary:
    if K < 1:
        raise VocabularyError(f"K must be >= 1, got {K}")
    if K > len(freqs):
        raise VocabularyError(f"K={K} exceeds the {len(freqs)} distinct emojis in the corpus")
    top = sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0]))[:K]
    return EmojiVocabulary(
        tuple(e for e, _ in top),
        tuple(c for _, c in top),
        source_corpus_hash=source_corpus_hash,
    )


def prepare_text(text: str, prep: NormalizationConfig, table: EmojiDataTable | None = None) -> str:
    return normalize(strip_emojis(text, table), prep)


def _distinct_in_vocab(record: RawRecord, vocab: EmojiVocabulary, table, canonical: bool) -> list[int]:
    found = extract_emojis(record.text, table, canonical=canonical)
    return sorted({vocab.index(e) for e in found if e in vocab})


def label_multiclass(
    record: RawRecord,
    vocab: EmojiVocabulary,
    prep: NormalizationConfig = NormalizationConfig(),
    table: EmojiDataTable | None = None,
    canonical: bool = True,
) -> list[LabeledExample]:
    """One example per distinct in-vocabulary emoji, all sharing the same text."""
    table = table or default_table()
    labels = _distinct_in_vocab(record, vocab, table, canonical)
    if not labels:
        return []
    text = prepare_text(record.text, prep, table)
    return [LabeledExample(text, idx, record.id) for idx in labels]


def label_multilabel(
    record: RawRecord,
    vocab: EmojiVocabulary,
    prep: NormalizationConfig = NormalizationConfig(),
    table: EmojiDataTable | None = None,
    canonical: bool = True,
) -> LabeledExample | None:
    table = table or default_table()
    labels = _distinct_in_vocab(record, vocab, table, canonical)
    if not labels:
        return None
    return LabeledExample(prepare_text(record.text, prep, table), frozenset(labels), record.id)


def balance(examples: Sequence[LabeledExample], config: BalanceConfig) -> list[LabeledExample]:
    """Downsample classes above ``cap`` and duplicate classes below ``floor``."""
    by_class: dict[int, list[LabeledExample]] = defaultdict(list)
    for ex in examples:
        if ex.is_multilabel:
            raise DatasetError("balancing applies to multi-class examples only")
        by_class[ex.label].append(ex)
    rng = rng_stream(config.seed, "balance")
    out: list[LabeledExample] = []
    for label in sorted(by_class):
        members = by_class[label]
        n = len(members)
        if n > config.cap:
            keep = np.sort(rng.choice(n, size=config.cap, replace=False))
            members = [members[i] for i in keep]
        elif n < config.floor:
            extra = rng.choice(n, size=config.floor - n, replace=True)
            members = members + [members[i] for i in extra]
        out.extend(members)
    order = rng.permutation(len(out))
    return [out[i] for i in order]


def split(
    examples: Sequence[LabeledExample],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[list[LabeledExample], list[LabeledExample], list[LabeledExample]]:
    """Seeded shuffle of origin groups, then a contiguous train/dev/test cut.

    Examples sharing an ``origin_id`` always land in the same split. A group
    goes to the split in which its first example's position falls.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must be three positive numbers summing to 1, got {ratios}")
    groups: dict[str, list[LabeledExample]] = {}
    for ex in examples:
        groups.setdefault(ex.origin_id, []).append(ex)
    keys = list(groups)
    order = rng_stream(seed, "split").permutation(len(keys))
    n = len(examples)
    cut1 = round(ratios[0] * n)
    cut2 = round((ratios[0] + ratios[1]) * n)
    parts: tuple[list, list, list] = ([], [], [])
    pos = 0
    for gi in order:
        members = groups[keys[gi]]
        target = 0 if pos < cut1 else 1 if pos < cut2 else 2
        parts[target].extend(members)
        pos += len(members)
    return parts


@dataclass
class DatasetStats:
    example_count: int
    class_histogram: dict[int, int]
    mean_labels_per_example: float | None
    max_class_count: int | None
    min_class_count: int | None

    def to_dict(self, vocab: EmojiVocabulary | None = None) -> dict:
        hist = {
            (vocab.emojis[k] if vocab is not None else str(k)): v for k, v in sorted(self.class_histogram.items())
        }
        d = {
            "example_count": self.example_count,
            "class_histogram": hist,
            "max_class_count": self.max_class_count,
            "min_class_count": self.min_class_count,
        }
        if self.mean_labels_per_example is not None:
            d["mean_labels_per_example"] = self.mean_labels_per_example
        return d


def stats(examples: Sequence[LabeledExample]) -> DatasetStats:
    hist: Counter = Counter()
    total_labels = 0
    for ex in examples:
        idx = ex.label_indices
        hist.update(idx)
        total_labels += len(idx)
    n = len(examples)
    return DatasetStats(
        example_count=n,
        class_histogram=dict(sorted(hist.items())),
        mean_labels_per_example=total_labels / n if n else None,
        max_class_count=max(hist.values()) if hist else None,
        min_class_count=min(hist.values()) if hist else None,
    )


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def write_dataset(path: str | Path, examples: Sequence[LabeledExample], vocab: EmojiVocabulary, header: dict) -> None:
    """Write a JSON-lines dataset: one header line, then one example per line."""
    header = {**header, "format": DATASET_FORMAT, "emoji_vocab_sha256": vocab.digest(), "K": vocab.K}
    lines = [_dumps({"header": header})]
    for ex in examples:
        lines.append(
            _dumps({"id": ex.origin_id, "labels": [vocab.emojis[i] for i in ex.label_indices], "text": ex.text})
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dataset(path: str | Path, vocab: EmojiVocabulary) -> tuple[dict, list[LabeledExample]]:
    """Load a dataset file, refusing it if it was built against another vocabulary."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc.strerror}") from exc
    if not lines:
        raise DatasetError(f"{path}: empty dataset file (missing header)")
    try:
        header = json.loads(lines[0])["header"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DatasetError(f"{path}:1: missing or malformed header") from exc
    if header.get("format") != DATASET_FORMAT:
        raise DatasetError(f"{path}: unsupported dataset format {header.get('format')!r}")
    if header.get("emoji_vocab_sha256") != vocab.digest():
        raise DatasetError(f"{path}: emoji vocabulary hash mismatch")
    setting = header.get("setting")
    if setting not in SETTINGS:
        raise DatasetError(f"{path}: unknown setting {setting!r}")
    examples = []
    for lineno, line in enumerate(lines[1:], 2):
        try:
            obj = json.loads(line)
            labels = [vocab.index(e) for e in obj["labels"]]
            text, rid = obj["text"], obj["id"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise DatasetError(f"{path}:{lineno}: malformed example") from exc
        if not labels:
            raise DatasetError(f"{path}:{lineno}: example without labels")
        if setting == MULTICLASS:
            if len(labels) != 1:
                raise DatasetError(f"{path}:{lineno}: multi-class example with {len(labels)} labels")
            examples.append(LabeledExample(text, labels[0], rid))
        else:
            examples.append(LabeledExample(text, frozenset(labels), rid))
    return header, examples


@dataclass
class BuildResult:
    vocab: EmojiVocabulary
    splits: dict[str, list[LabeledExample]]
    word_vocab: WordVocabulary
    diagnostics: dict


def build(
    records: Sequence[RawRecord],
    K: int,
    setting: str,
    *,
    seed: int = 0,
    prep: NormalizationConfig = NormalizationConfig(),
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    balance_config: BalanceConfig | None = None,
    min_word_frequency: int = 1,
    canonical: bool = True,
    corpus_hash: str = "",
    table: EmojiDataTable | None = None,
) -> BuildResult:
    """Full construction: count, pick top-K, label, split, balance the train split."""
    if setting not in SETTINGS:
        raise ConfigError(f"setting must be one of {SETTINGS}, got {setting!r}")
    if balance_config is not None and setting != MULTICLASS:
        raise ConfigError("balancing is only defined for the multiclass setting")
    table = table or default_table()
    diagnostics: dict = {"skipped": 0}
    freqs = count_emoji_frequencies(records, table, canonical=canonical, diagnostics=diagnostics)
    vocab = build_vocab_topk(freqs, K, source_corpus_hash=corpus_hash)

    examples: list[LabeledExample] = []
    for record in records:
        try:
            if setting == MULTICLASS:
                examples.extend(label_multiclass(record, vocab, prep, table, canonical))
            else:
                ex = label_multilabel(record, vocab, prep, table, canonical)
                if ex is not None:
                    examples.append(ex)
        except UnicodeError:
            continue  # already tallied as skipped while counting
    diagnostics["labeled_examples"] = len(examples)
    log.info("labeled %d examples from %d records", len(examples), len(records))

    train, dev, test = split(examples, ratios, seed)
    if balance_config is not None:
        train = balance(train, balance_config)
    word_vocab = build_word_vocab_from(train, min_word_frequency)
    return BuildResult(vocab, {"train": train, "dev": dev, "test": test}, word_vocab, diagnostics)


def build_word_vocab_from(examples: Sequence[LabeledExample], min_frequency: int = 1) -> WordVocabulary:
    # one count per document; upsampled duplicates would inflate frequencies
    seen: dict[str, str] = {}
    for ex in examples:
        seen.setdefault(ex.origin_id, ex.text)
    return build_word_vocab(seen.values(), min_frequency)


def check_vocab_coherence(examples: Iterable[LabeledExample], vocab: EmojiVocabulary) -> None:
    for ex in examples:
        if any(not 0 <= i < vocab.K for i in ex.label_indices):
            raise DatasetError(f"label index out of range for |E|={vocab.K} in example {ex.origin_id!r}")
