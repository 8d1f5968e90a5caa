"""IPA-to-ARPAbet conversion and lexicon-driven phoneme-to-word alignment.

The inventory is a fixed IPA->ARPAbet table shipped with the package
(``data/ipa_arpabet.tsv``). Lookups try the symbol verbatim first, then with
diacritics (stress, length and combining marks) stripped; anything else is
rejected rather than silently dropped.

Word segmentation maps a timed ARPAbet sequence onto lexicon words, either
greedily (longest pronunciation match, left to right) or with a dynamic
program that minimizes the number of uncovered phonemes. Uncovered phonemes
surface as single-phoneme ``<unk>`` words.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Sequence

from .annotation import MalformedDocument, TimedUnit

UNK = "<unk>"

GREEDY = "greedy"
DP = "dp"
STRATEGIES = (GREEDY, DP)

# Modifier letters stripped in addition to Unicode combining marks.
_MODIFIERS = frozenset("ˈˌːˑʰʲʷ˞ʼ")


class UnknownSymbol(ValueError):
    def __init__(self, symbol: str, index: int):
        super().__init__(f"unknown phoneme symbol {symbol!r} at index {index}")
        self.symbol = symbol
        self.index = index

    def __reduce__(self):
        return (UnknownSymbol, (self.symbol, self.index))


def strip_diacritics(symbol: str) -> str:
    return "".join(
        c for c in symbol if not unicodedata.combining(c) and c not in _MODIFIERS
    )


@dataclass(frozen=True)
class PhonemeInventory:
    """Total, deterministic IPA->ARPAbet mapping over its declared domain."""

    ipa_to_arpa: dict

    @property
    def arpa_set(self) -> frozenset:
        return frozenset(self.ipa_to_arpa.values())

    def lookup(self, symbol: str) -> str | None:
        hit = self.ipa_to_arpa.get(symbol)
        if hit is not None:
            return hit
        return self.ipa_to_arpa.get(strip_diacritics(symbol))

    @classmethod
    def from_tsv(cls, text: str) -> "PhonemeInventory":
        table = {}
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedDocument(f"inventory line {lineno}: expected 'ipa<TAB>arpabet'")
            table[parts[0]] = parts[1]
        return cls(table)

    @classmethod
    def default(cls) -> "PhonemeInventory":
        text = resources.files("disfluency_kit.data").joinpath("ipa_arpabet.tsv").read_text("utf-8")
        return cls.from_tsv(text)


_DEFAULT_INVENTORY: PhonemeInventory | None = None


def default_inventory() -> PhonemeInventory:
    global _DEFAULT_INVENTORY
    if _DEFAULT_INVENTORY is None:
        _DEFAULT_INVENTORY = PhonemeInventory.default()
    return _DEFAULT_INVENTORY


def ipa_to_arpabet(
    units: Sequence[TimedUnit], inventory: PhonemeInventory | None = None
) -> list[TimedUnit]:
    """Relabel timed IPA symbols as ARPAbet, preserving order and timestamps."""
    inv = inventory or default_inventory()
    out = []
    for i, u in enumerate(units):
        arpa = inv.lookup(u.label)
        if arpa is None:
            raise UnknownSymbol(u.label, i)
        out.append(TimedUnit(arpa, u.start, u.end, u.dtype))
    return out


def _strip_stress(phone: str) -> str:
    return phone.rstrip("0123456789")


@dataclass
class Lexicon:
    """Word -> pronunciations (stress-free ARPAbet), case-insensitive lookup."""

    entries: dict

    def lookup(self, word: str) -> tuple:
        return self.entries.get(word.lower(), ())

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, Sequence[str]]]) -> "Lexicon":
        entries: dict = {}
        for word, pron in pairs:
            pron = tuple(_strip_stress(p) for p in pron)
            if not pron:
                raise MalformedDocument(f"empty pronunciation for {word!r}")
            entries.setdefault(word.lower(), [])
            if pron not in entries[word.lower()]:
                entries[word.lower()].append(pron)
        return cls({w: tuple(ps) for w, ps in entries.items()})

    @classmethod
    def from_text(cls, text: str) -> "Lexicon":
        """Parse CMU-dictionary-style lines ``WORD  PH1 PH2 ...``.

        ``WORD(2)`` variant suffixes and ``;;;`` comment lines are accepted;
        stress digits are stripped.
        """
        pairs = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith(";;;"):
                continue
            parts = line.split()
            if len(parts) < 2:
                raise MalformedDocument(f"lexicon line {lineno}: word without pronunciation")
            word = parts[0]
            if word.endswith(")") and "(" in word:
                word = word[: word.index("(")]
            pairs.append((word, parts[1:]))
        return cls.from_pairs(pairs)

    @classmethod
    def from_file(cls, path) -> "Lexicon":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


@dataclass(frozen=True)
class WordSegmentation:
    words: tuple[TimedUnit, ...]
    coverage: float
    strategy: str


def _match_index(lexicon: Lexicon) -> dict:
    """First-phoneme index of (pronunciation, word) candidates."""
    index: dict = {}
    for word, prons in lexicon.entries.items():
        for pron in prons:
            index.setdefault(pron[0], []).append((pron, word))
    return index


def _matches_at(phones: Sequence[str], i: int, index: dict) -> list[tuple[tuple, str]]:
    out = []
    for pron, word in index.get(phones[i], ()):
        if len(pron) <= len(phones) - i and tuple(phones[i : i + len(pron)]) == pron:
            out.append((pron, word))
    return out


def _hint_rank(word: str, hint: list[str], cursor: int) -> tuple:
    try:
        k = hint.index(word, cursor)
    except ValueError:
        k = len(hint) + 1
    return (k, word)


def _normalize_hint(hint) -> list[str]:
    if hint is None:
        return []
    if isinstance(hint, str):
        hint = hint.split()
    return [w.lower() for w in hint]


def phonemes_to_words(
    phones: Sequence[TimedUnit],
    lexicon: Lexicon,
    hint=None,
    strategy: str = GREEDY,
) -> WordSegmentation:
    """Segment a time-ordered ARPAbet sequence into timed lexicon words.

    Ties between equally long matches are broken toward the word appearing
    next in ``hint`` (if given), then lexicographically. Phonemes no
    pronunciation covers become ``<unk>`` words; the returned coverage is the
    fraction of phonemes covered by real words.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    labels = [u.label for u in phones]
    n = len(labels)
    if n == 0:
        return WordSegmentation((), 1.0, strategy)
    index = _match_index(lexicon)
    hint_words = _normalize_hint(hint)

    # spans[i] for each chosen segment start: (length, word or None for <unk>)
    if strategy == GREEDY:
        picks = _segment_greedy(labels, index, hint_words)
    else:
        picks = _segment_dp(labels, index, hint_words)

    out = []
    unk_phones = 0
    i = 0
    for length, word in picks:
        start, end = phones[i].start, phones[i + length - 1].end
        if word is None:
            out.append(TimedUnit(UNK, start, end))
            unk_phones += length
        else:
            out.append(TimedUnit(word, start, end))
        i += length
    coverage = 1.0 - unk_phones / n
    return WordSegmentation(tuple(out), coverage, strategy)


def _segment_greedy(labels, index, hint_words) -> list[tuple[int, str | None]]:
    picks: list[tuple[int, str | None]] = []
    cursor = 0
    i = 0
    n = len(labels)
    while i < n:
        cands = _matches_at(labels, i, index)
        if not cands:
            picks.append((1, None))
            i += 1
            continue
        best_len = max(len(p) for p, _ in cands)
        tied = sorted({w for p, w in cands if len(p) == best_len})
        word = min(tied, key=lambda w: _hint_rank(w, hint_words, cursor))
        picks.append((best_len, word))
        try:
            cursor = hint_words.index(word, cursor) + 1
        except ValueError:
            pass
        i += best_len
    return picks


def _segment_dp(labels, index, hint_words) -> list[tuple[int, str | None]]:
    """Minimize (#unk phonemes, #words); reconstruct with greedy tie rules."""
    n = len(labels)
    INF = (n + 1, n + 1)
    cost = [INF] * (n + 1)
    cost[n] = (0, 0)
    match_cache: list[list[tuple[tuple, str]]] = [[] for _ in range(n)]
    for i in range(n - 1, -1, -1):
        match_cache[i] = _matches_at(labels, i, index)
        unk = (cost[i + 1][0] + 1, cost[i + 1][1] + 1)
        best = unk
        for pron, _ in match_cache[i]:
            nxt = cost[i + len(pron)]
            cand = (nxt[0], nxt[1] + 1)
            if cand < best:
                best = cand
        cost[i] = best

    picks: list[tuple[int, str | None]] = []
    cursor = 0
    i = 0
    while i < n:
        target = cost[i]
        # among optimal transitions, prefer lexicon matches, longest first
        best_len = 0
        cand_words: list[str] = []
        for pron, word in match_cache[i]:
            nxt = cost[i + len(pron)]
            if (nxt[0], nxt[1] + 1) == target:
                if len(pron) > best_len:
                    best_len = len(pron)
                    cand_words = [word]
                elif len(pron) == best_len and word not in cand_words:
                    cand_words.append(word)
        if best_len == 0:
            picks.append((1, None))
            i += 1
            continue
        word = min(sorted(cand_words), key=lambda w: _hint_rank(w, hint_words, cursor))
        picks.append((best_len, word))
        try:
            cursor = hint_words.index(word, cursor) + 1
        except ValueError:
            pass
        i += best_len
    return picks
