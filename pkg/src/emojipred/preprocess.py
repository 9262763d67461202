"""Text normalization, word vocabulary and tokenization."""

from __future__ import annotations

import enum
import hashlib
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

PAD, UNK, CLS = "[PAD]", "[UNK]", "[CLS]"
RESERVED = (PAD, UNK, CLS)
PAD_ID, UNK_ID, CLS_ID = 0, 1, 2
URL_TOKEN = "<url>"
DEFAULT_MAX_SEQ_LEN = 128

_DIGIT_RUN = re.compile(r"[0-9]+")
_HASHTAG = re.compile(r"#+(?=\w)")
_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)


class UrlPolicy(str, enum.Enum):
    KEEP = "keep"
    REPLACE_TOKEN = "replace_token"


class HashtagPolicy(str, enum.Enum):
    KEEP_TEXT_PART = "keep_text_part"


class MentionPolicy(str, enum.Enum):
    KEEP = "keep"


@dataclass(frozen=True)
class NormalizationConfig:
    replace_digit_runs: bool = True
    lowercase: bool = False
    url_policy: UrlPolicy = UrlPolicy.KEEP
    hashtag_policy: HashtagPolicy = HashtagPolicy.KEEP_TEXT_PART
    mention_policy: MentionPolicy = MentionPolicy.KEEP

    def to_dict(self) -> dict:
        return {
            "replace_digit_runs": self.replace_digit_runs,
            "lowercase": self.lowercase,
            "url_policy": self.url_policy.value,
            "hashtag_policy": self.hashtag_policy.value,
            "mention_policy": self.mention_policy.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationConfig":
        return cls(
            replace_digit_runs=bool(d.get("replace_digit_runs", True)),
            lowercase=bool(d.get("lowercase", False)),
            url_policy=UrlPolicy(d.get("url_policy", UrlPolicy.KEEP.value)),
            hashtag_policy=HashtagPolicy(d.get("hashtag_policy", HashtagPolicy.KEEP_TEXT_PART.value)),
            mention_policy=MentionPolicy(d.get("mention_policy", MentionPolicy.KEEP.value)),
        )


def normalize(text: str, config: NormalizationConfig = NormalizationConfig()) -> str:
    """Apply the configured normalizations.

    Order matters for idempotence: case, then URLs, then hashtags, then digit
    runs (so ``#2020`` becomes ``num``). Emojis pass through untouched.
    """
    if config.lowercase:
        text = text.lower()
    if config.url_policy is UrlPolicy.REPLACE_TOKEN:
        text = _URL.sub(URL_TOKEN, text)
    text = _HASHTAG.sub("", text)
    if config.replace_digit_runs:
        text = _DIGIT_RUN.sub("num", text)
    return text


@dataclass(frozen=True)
class Document:
    tokens: tuple[int, ...]
    source_id: str = ""

    @property
    def length(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class WordVocabulary:
    """Dense word -> id map with reserved ids ``[PAD]=0, [UNK]=1, [CLS]=2``."""

    tokens: tuple[str, ...]
    frequencies: tuple[int, ...]
    min_frequency: int = 1
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens[: len(RESERVED)] != RESERVED:
            raise ValueError("word vocabulary must start with the reserved tokens")
        index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(index) != len(self.tokens):
            raise ValueError("duplicate tokens in word vocabulary")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def id(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def to_tsv(self) -> str:
        return "".join(
            f"{tok}\t{i}\t{freq}\n" for i, (tok, freq) in enumerate(zip(self.tokens, self.frequencies))
        )

    def digest(self) -> str:
        return hashlib.sha256(self.to_tsv().encode("utf-8")).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_tsv(), encoding="utf-8")

    @classmethod
    def from_tsv(cls, content: str, min_frequency: int = 1) -> "WordVocabulary":
        tokens, freqs = [], []
        for lineno, line in enumerate(content.splitlines(), 1):
            parts = line.split("\t")
            if len(parts) != 3 or int(parts[1]) != lineno - 1:
                raise ValueError(f"malformed word vocabulary line {lineno}: {line!r}")
            tokens.append(parts[0])
            freqs.append(int(parts[2]))
        return cls(tuple(tokens), tuple(freqs), min_frequency)

    @classmethod
    def load(cls, path: str | Path, min_frequency: int = 1) -> "WordVocabulary":
        return cls.from_tsv(Path(path).read_text(encoding="utf-8"), min_frequency)


def build_word_vocab(corpus: Iterable[str], min_frequency: int = 1) -> WordVocabulary:
    """Vocabulary of whitespace tokens seen at least ``min_frequency`` times.

    Ordered by descending frequency, ties broken lexicographically.
    """
    if min_frequency < 1:
        raise ValueError(f"min_frequency must be >= 1, got {min_frequency}")
    counts = Counter()
    for text in corpus:
        counts.update(text.split())
    for tok in RESERVED:
        counts.pop(tok, None)
    kept = sorted((t for t, c in counts.items() if c >= min_frequency), key=lambda t: (-counts[t], t))
    return WordVocabulary(
        RESERVED + tuple(kept),
        (0,) * len(RESERVED) + tuple(counts[t] for t in kept),
        min_frequency,
    )


def tokenize(
    text: str, vocab: WordVocabulary, max_seq_len: int = DEFAULT_MAX_SEQ_LEN, source_id: str = ""
) -> Document:
    """``[CLS]`` followed by word ids, truncated to ``max_seq_len`` in total. No padding."""
    if max_seq_len < 1:
        raise ValueError("max_seq_len must be >= 1")
    ids = [CLS_ID]
    for word in text.split()[: max_seq_len - 1]:
        ids.append(vocab.id(word))
    return Document(tuple(ids), source_id)
