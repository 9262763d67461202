"""Emoji sequence detection, extraction and stripping.

An "emoji" here is a Unicode emoji sequence as classified by the UTS #51 data
files (``emoji-data.txt`` and ``emoji-test.txt``). A pinned copy of both files
ships with the package; other versions can be loaded with
:meth:`EmojiDataTable.load`.

Segmentation is greedy left-to-right. At each position the longer of two
candidates wins:

* the longest sequence listed in ``emoji-test.txt`` (any qualification status)
  that starts there, and
* a single grammatical emoji element: a flag pair, or an ``Emoji`` scalar with
  an optional skin-tone modifier, VS-16, keycap mark and tag run.

Non-RGI ZWJ chains therefore split into their RGI parts, leaving the joiner in
the residual text. Bare ASCII digits, ``#`` and ``*`` are only emitted with a
VS-16 or keycap mark attached.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path

ZWJ = 0x200D
VS16 = 0xFE0F
KEYCAP = 0x20E3
TAG_END = 0xE007F
REGIONAL_INDICATORS = range(0x1F1E6, 0x1F200)
_TAG_CHARS = range(0xE0020, 0xE007F)
_KEYCAP_BASES = frozenset(map(ord, "0123456789#*"))

_DATA_LINE = re.compile(r"^([0-9A-F]+)(?:\.\.([0-9A-F]+))?\s*;\s*(\w+)")
_TEST_LINE = re.compile(r"^([0-9A-F ]+?)\s*;\s*([\w-]+)\s*#\s*\S+\s+E\d+\.\d+\s+(.*)$")
_VERSION_LINE = re.compile(r"^#\s*Version:\s*([\d.]+)")


class Qualification(str, enum.Enum):
    FULLY_QUALIFIED = "fully-qualified"
    MINIMALLY_QUALIFIED = "minimally-qualified"
    UNQUALIFIED = "unqualified"
    COMPONENT = "component"


@dataclass(frozen=True)
class EmojiToken:
    """One extracted emoji sequence.

    ``span`` holds UTF-8 byte offsets into the source text, ``char_span`` the
    matching Python string indices.
    """

    codepoints: tuple[int, ...]
    span: tuple[int, int]
    qualified: Qualification
    char_span: tuple[int, int] = field(compare=False, repr=False, default=(0, 0))

    @property
    def text(self) -> str:
        return "".join(map(chr, self.codepoints))


class _Trie:
    __slots__ = ("children", "terminal")

    def __init__(self) -> None:
        self.children: dict[int, _Trie] = {}
        self.terminal = False

    def insert(self, seq: tuple[int, ...]) -> None:
        node = self
        for cp in seq:
            node = node.children.setdefault(cp, _Trie())
        node.terminal = True

    def longest_match(self, cps: list[int], start: int) -> int:
        """End index of the longest stored sequence at ``start``, or ``start``."""
        node, best = self, start
        for i in range(start, len(cps)):
            node = node.children.get(cps[i])
            if node is None:
                break
            if node.terminal:
                best = i + 1
        return best


@dataclass(frozen=True, eq=False)
class EmojiDataTable:
    """Emoji property sets plus the emoji-test sequence catalogue."""

    emoji: frozenset[int]
    emoji_presentation: frozenset[int]
    emoji_modifier: frozenset[int]
    emoji_modifier_base: frozenset[int]
    emoji_component: frozenset[int]
    sequences: dict[tuple[int, ...], Qualification]
    names: dict[tuple[int, ...], str]
    version: str
    _trie: _Trie = field(repr=False, default_factory=_Trie)
    _canonical: dict[tuple[int, ...], tuple[int, ...]] = field(repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        for seq in self.sequences:
            self._trie.insert(seq)
        fully = {
            self.names[seq]: seq
            for seq, q in self.sequences.items()
            if q is Qualification.FULLY_QUALIFIED
        }
        for seq, q in self.sequences.items():
            if q in (Qualification.MINIMALLY_QUALIFIED, Qualification.UNQUALIFIED):
                target = fully.get(self.names[seq])
                if target is not None:
                    self._canonical[seq] = target

    @classmethod
    def load(cls, data_path: str | Path, test_path: str | Path) -> "EmojiDataTable":
        props: dict[str, set[int]] = {
            "Emoji": set(),
            "Emoji_Presentation": set(),
            "Emoji_Modifier": set(),
            "Emoji_Modifier_Base": set(),
            "Emoji_Component": set(),
        }
        version = "unknown"
        with open(data_path, encoding="utf-8") as fh:
            for line in fh:
                if m := _VERSION_LINE.match(line):
                    version = m.group(1)
                    continue
                m = _DATA_LINE.match(line)
                if not m or m.group(3) not in props:
                    continue
                lo = int(m.group(1), 16)
                hi = int(m.group(2), 16) if m.group(2) else lo
                props[m.group(3)].update(range(lo, hi + 1))

        sequences: dict[tuple[int, ...], Qualification] = {}
        names: dict[tuple[int, ...], str] = {}
        with open(test_path, encoding="utf-8") as fh:
            for line in fh:
                m = _TEST_LINE.match(line)
                if not m:
                    continue
                seq = tuple(int(h, 16) for h in m.group(1).split())
                sequences[seq] = Qualification(m.group(2))
                names[seq] = m.group(3).strip()

        return cls(
            emoji=frozenset(props["Emoji"]),
            emoji_presentation=frozenset(props["Emoji_Presentation"]),
            emoji_modifier=frozenset(props["Emoji_Modifier"]),
            emoji_modifier_base=frozenset(props["Emoji_Modifier_Base"]),
            emoji_component=frozenset(props["Emoji_Component"]),
            sequences=sequences,
            names=names,
            version=version,
        )

    def fully_qualified(self) -> list[tuple[int, ...]]:
        return [s for s, q in self.sequences.items() if q is Qualification.FULLY_QUALIFIED]

    def canonical(self, codepoints: tuple[int, ...]) -> tuple[int, ...]:
        """Map a minimally-qualified or unqualified sequence to its fully-qualified form."""
        return self._canonical.get(codepoints, codepoints)

    def qualification(self, codepoints: tuple[int, ...]) -> Qualification:
        q = self.sequences.get(codepoints)
        if q is not None:
            return q
        if len(codepoints) == 1 and codepoints[0] in self.emoji_component and (
            codepoints[0] not in REGIONAL_INDICATORS
        ):
            return Qualification.COMPONENT
        return Qualification.UNQUALIFIED


@lru_cache(maxsize=1)
def default_table() -> EmojiDataTable:
    """The vendored emoji data table (loaded once)."""
    base = resources.files("emojipred") / "data"
    with resources.as_file(base / "emoji-data.txt") as data, resources.as_file(
        base / "emoji-test.txt"
    ) as test:
        return EmojiDataTable.load(data, test)


def _element_end(cps: list[int], i: int, table: EmojiDataTable) -> int:
    """End of the grammatical emoji element starting at ``i`` (``i`` if none)."""
    cp = cps[i]
    n = len(cps)
    if cp in REGIONAL_INDICATORS:
        if i + 1 < n and cps[i + 1] in REGIONAL_INDICATORS:
            return i + 2
        return i + 1
    if cp not in table.emoji:
        return i
    j = i + 1
    if cp in table.emoji_modifier_base and j < n and cps[j] in table.emoji_modifier:
        j += 1
    if j < n and cps[j] == VS16:
        j += 1
    if cp in _KEYCAP_BASES and j < n and cps[j] == KEYCAP:
        j += 1
    if j < n and cps[j] in _TAG_CHARS:
        k = j
        while k < n and cps[k] in _TAG_CHARS:
            k += 1
        if k < n and cps[k] == TAG_END:
            j = k + 1
    if cp in _KEYCAP_BASES and j == i + 1:
        return i
    return j


def _check_text(text: str | bytes) -> str:
    if isinstance(text, bytes):
        return text.decode("utf-8")
    # lone surrogates are not valid Unicode scalars
    text.encode("utf-8")
    return text


def segment(text: str | bytes, table: EmojiDataTable | None = None) -> list[EmojiToken]:
    """Return every maximal emoji sequence in ``text``, left to right.

    Raises ``UnicodeError`` for invalid UTF-8 bytes or strings containing lone
    surrogates.
    """
    text = _check_text(text)
    table = table or default_table()
    cps = [ord(c) for c in text]
    tokens: list[EmojiToken] = []
    i = 0
    byte_pos = 0
    last_char = 0
    n = len(cps)
    while i < n:
        end = max(table._trie.longest_match(cps, i), _element_end(cps, i, table))
        if end == i:
            i += 1
            continue
        byte_pos += len(text[last_char:i].encode("utf-8"))
        seq = tuple(cps[i:end])
        nbytes = len(text[i:end].encode("utf-8"))
        tokens.append(
            EmojiToken(seq, (byte_pos, byte_pos + nbytes), table.qualification(seq), (i, end))
        )
        byte_pos += nbytes
        last_char = end
        i = end
    return tokens


def extract_emojis(text: str, table: EmojiDataTable | None = None, canonical: bool = False) -> list[str]:
    """Emoji strings in order of occurrence, repeats included."""
    table = table or default_table()
    out = []
    for tok in segment(text, table):
        cps = table.canonical(tok.codepoints) if canonical else tok.codepoints
        out.append("".join(map(chr, cps)))
    return out


def remove_spans(text: str, tokens: list[EmojiToken]) -> str:
    """Residual text after cutting out token spans, whitespace untouched."""
    pieces = []
    prev = 0
    for tok in tokens:
        start, end = tok.char_span
        pieces.append(text[prev:start])
        prev = end
    pieces.append(text[prev:])
    return "".join(pieces)


_SPACE_RUN = re.compile(r" {2,}")


def strip_emojis(text: str | bytes, table: EmojiDataTable | None = None) -> str:
    """Remove all emoji sequences and collapse the space runs left behind.

    Removal repeats until no emoji remains, because cutting a sequence can
    join a digit to a stray keycap mark that followed it. Leading and
    trailing whitespace is trimmed.
    """
    text = _check_text(text)
    table = table or default_table()
    while True:
        tokens = segment(text, table)
        if not tokens:
            break
        text = remove_spans(text, tokens)
    return _SPACE_RUN.sub(" ", text).strip()


def is_emoji_sequence(codepoints, table: EmojiDataTable | None = None) -> bool:
    """True iff ``codepoints`` segments into exactly one token covering all of it."""
    cps = tuple(codepoints)
    if not cps:
        raise ValueError("codepoint sequence must be nonempty")
    try:
        text = "".join(map(chr, cps))
        tokens = segment(text, table)
    except (ValueError, UnicodeError):
        return False
    return len(tokens) == 1 and tokens[0].codepoints == cps
