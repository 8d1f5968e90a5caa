"""Builders and parsers for the textual prompt variants.

Five kinds of textual input can accompany an utterance: recognizer phonemes,
recognizer-derived words, the clean transcript, and forced-aligned phonemes
or words. Timed kinds render as space-joined ``label(start,end)`` items; the
combined prompt is the five variants joined by single spaces in a fixed
order. Ingestion helpers read Praat TextGrid interval tiers and CTC-style
frame output.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .annotation import (
    Anomaly,
    InvariantViolation,
    MalformedDocument,
    PHONEME,
    TimedUnit,
    UtteranceRecord,
    WORD,
    fmt_ts,
    quantize,
    to_cs,
)


class MissingSource(ValueError):
    def __init__(self, kind: "InputKind"):
        super().__init__(f"no alignment source provided for {kind.value!r}")
        self.kind = kind


class InputKind(Enum):
    WAV2VEC_PHONEMES = "wav2vec-phonemes"
    WAV2VEC_WORDS = "wav2vec-words"
    CLEAN_TRANSCRIPT = "clean-transcript"
    ALIGNED_PHONEMES = "aligned-phonemes"
    ALIGNED_WORDS = "aligned-words"
    ALL = "all"


#: Concatenation order of the combined prompt.
BASIC_KINDS = (
    InputKind.WAV2VEC_PHONEMES,
    InputKind.WAV2VEC_WORDS,
    InputKind.CLEAN_TRANSCRIPT,
    InputKind.ALIGNED_PHONEMES,
    InputKind.ALIGNED_WORDS,
)

RECOGNIZER = "recognizer"
FORCED_ALIGNER = "forced_aligner"
DATASET = "dataset"

ORIGIN_FOR_KIND = {
    InputKind.WAV2VEC_PHONEMES: RECOGNIZER,
    InputKind.WAV2VEC_WORDS: RECOGNIZER,
    InputKind.ALIGNED_PHONEMES: FORCED_ALIGNER,
    InputKind.ALIGNED_WORDS: FORCED_ALIGNER,
}

LEVEL_FOR_KIND = {
    InputKind.WAV2VEC_PHONEMES: PHONEME,
    InputKind.WAV2VEC_WORDS: WORD,
    InputKind.ALIGNED_PHONEMES: PHONEME,
    InputKind.ALIGNED_WORDS: WORD,
}


@dataclass(frozen=True)
class AlignmentSource:
    """Timed units from a recognizer, forced aligner, or the dataset itself."""

    origin: str
    level: str
    units: tuple[TimedUnit, ...]

    def validate(self) -> None:
        prev_end = None
        for i, u in enumerate(self.units):
            s, e = to_cs(u.start), to_cs(u.end)
            if s < 0 or s > e:
                raise InvariantViolation(f"source unit {i}: bad span {u.start}..{u.end}")
            if prev_end is not None and s < prev_end:
                raise InvariantViolation(f"source unit {i}: overlaps previous unit")
            prev_end = e


def build_input(
    rec: UtteranceRecord,
    sources: dict[InputKind, AlignmentSource],
    kind: InputKind,
) -> str:
    """Render one textual input variant (or the combination) as a single line."""
    if kind is InputKind.CLEAN_TRANSCRIPT:
        return rec.clean_transcript
    if kind is InputKind.ALL:
        parts = [build_input(rec, sources, k) for k in BASIC_KINDS]
        return " ".join(p for p in parts if p)
    src = sources.get(kind)
    if src is None:
        raise MissingSource(kind)
    src.validate()
    return " ".join(f"{u.label}({fmt_ts(u.start)},{fmt_ts(u.end)})" for u in src.units)


@dataclass(frozen=True)
class ParsedInput:
    source: AlignmentSource
    anomalies: tuple[Anomaly, ...] = ()


_ITEM_RE = re.compile(r"^(.+)\((\d+(?:\.\d+)?),(\d+(?:\.\d+)?)\)$")


def parse_input(text: str, kind: InputKind):
    """Inverse of build_input: a transcript string for the clean kind, else a
    ParsedInput with per-item anomalies for anything malformed."""
    if kind is InputKind.CLEAN_TRANSCRIPT:
        return text
    if kind is InputKind.ALL:
        raise ValueError("the combined input is not unambiguously parseable")
    units = []
    anomalies = []
    for i, tok in enumerate(text.split()):
        m = _ITEM_RE.match(tok)
        if not m:
            anomalies.append(Anomaly("bad-item", tok, i))
            continue
        units.append(
            TimedUnit(m.group(1), quantize(float(m.group(2))), quantize(float(m.group(3))))
        )
    source = AlignmentSource(ORIGIN_FOR_KIND[kind], LEVEL_FOR_KIND[kind], tuple(units))
    return ParsedInput(source, tuple(anomalies))


# ---------------------------------------------------------------------------
# Forced-aligner ingestion: Praat TextGrid (long format), interval tiers
# ---------------------------------------------------------------------------

_TIER_SPLIT_RE = re.compile(r"item\s*\[\d+\]\s*:")
_TIER_CLASS_RE = re.compile(r'class\s*=\s*"([^"]*)"')
_TIER_NAME_RE = re.compile(r'name\s*=\s*"([^"]*)"')
_INTERVAL_RE = re.compile(
    r'xmin\s*=\s*([\d.]+)\s+xmax\s*=\s*([\d.]+)\s+text\s*=\s*"((?:[^"]|"")*)"'
)


def read_textgrid(path) -> dict[str, tuple[TimedUnit, ...]]:
    """Parse interval tiers from a long-format Praat TextGrid.

    Returns tier name -> units; empty-text (silence) intervals are dropped.
    """
    text = Path(path).read_text(encoding="utf-8")
    tiers: dict[str, tuple[TimedUnit, ...]] = {}
    chunks = _TIER_SPLIT_RE.split(text)[1:]
    if not chunks and "IntervalTier" in text:
        raise MalformedDocument(f"{path}: unrecognized TextGrid layout")
    for chunk in chunks:
        cls = _TIER_CLASS_RE.search(chunk)
        name = _TIER_NAME_RE.search(chunk)
        if not cls or cls.group(1) != "IntervalTier" or not name:
            continue
        units = []
        for m in _INTERVAL_RE.finditer(chunk):
            label = m.group(3).replace('""', '"').strip()
            if not label:
                continue
            units.append(TimedUnit(label, quantize(float(m.group(1))), quantize(float(m.group(2)))))
        tiers[name.group(1)] = tuple(units)
    return tiers


def source_from_textgrid(path, level: str) -> AlignmentSource:
    """Build a forced-aligner source from the "words" or "phones" tier."""
    tiers = read_textgrid(path)
    tier = "words" if level == WORD else "phones"
    if tier not in tiers:
        raise MalformedDocument(f"{path}: no {tier!r} interval tier (found {sorted(tiers)})")
    return AlignmentSource(FORCED_ALIGNER, level, tiers[tier])


# ---------------------------------------------------------------------------
# Recognizer ingestion: CTC frame output
# ---------------------------------------------------------------------------

def collapse_ctc(symbols: list[str], frame_ms: float, frames: list[int], blank: int = 0) -> tuple[TimedUnit, ...]:
    """Standard CTC collapse: merge consecutive repeats, drop blank frames.

    Each surviving run becomes a unit spanning its frames.
    """
    units = []
    run_sym = None
    run_start = 0
    for i, sym in enumerate(list(frames) + [None]):
        if sym == run_sym:
            continue
        if run_sym is not None and run_sym != blank:
            if not 0 <= run_sym < len(symbols):
                raise MalformedDocument(f"frame symbol index {run_sym} out of range")
            units.append(
                TimedUnit(
                    symbols[run_sym],
                    quantize(run_start * frame_ms / 1000.0),
                    quantize(i * frame_ms / 1000.0),
                )
            )
        run_sym = sym
        run_start = i
    return tuple(units)


def source_from_ctc(doc: dict, level: str = PHONEME) -> AlignmentSource:
    """Build a recognizer source from ``{symbols, frame_ms, frames[, blank]}``."""
    for key in ("symbols", "frame_ms", "frames"):
        if key not in doc:
            raise MalformedDocument(f"CTC document missing {key!r}")
    units = collapse_ctc(doc["symbols"], doc["frame_ms"], doc["frames"], doc.get("blank", 0))
    return AlignmentSource(RECOGNIZER, level, units)
