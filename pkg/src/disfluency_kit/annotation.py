"""Core data model for timestamped disfluency annotations.

Defines the disfluency categories, timed word/phoneme units, the utterance
record (one JSON document per utterance), and the annotated "TRANSCRIPT:"
ground-truth text grammar together with its renderer and a total,
never-raising parser for scoring raw model output.

Word-level grammar (normative):

    gt    = "TRANSCRIPT:" *(SP item)
    item  = word / mark
    mark  = "(" ts ")" SP token [SP payload] SP "(" ts ")"
    token = "[REP]" / "[MISS]" / "[BLOCK]" / "[PRO]" / "[SUB]" / "[INS]"
    ts    = 1*DIGIT "." 2DIGIT

Phoneme-level output is the clean transcript, a "|" separator, then one
`label (start,end) token` triple per disfluent phoneme.

All timestamps are seconds at centisecond resolution; values are snapped
to the centisecond grid on load so that render/parse round-trips are exact.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

PREFIX = "TRANSCRIPT:"

WORD = "word"
PHONEME = "phoneme"
LEVELS = (WORD, PHONEME)


class DisfluencyType(Enum):
    """The closed set of annotation categories. Wire names match the JSON format."""

    NONE = "none"
    REPETITION = "rep"
    DELETION = "miss"
    BLOCK = "block"
    SUBSTITUTION = "sub"
    PROLONGATION = "pro"
    INSERTION = "ins"

    @property
    def display(self) -> str:
        return _DISPLAY[self]


_DISPLAY = {
    DisfluencyType.NONE: "None",
    DisfluencyType.REPETITION: "Repetition",
    DisfluencyType.DELETION: "Deletion",
    DisfluencyType.BLOCK: "Block",
    DisfluencyType.SUBSTITUTION: "Substitution",
    DisfluencyType.PROLONGATION: "Prolongation",
    DisfluencyType.INSERTION: "Insertion",
}

#: Everything except NONE, in stable reporting order.
DISFLUENT_TYPES = (
    DisfluencyType.REPETITION,
    DisfluencyType.DELETION,
    DisfluencyType.BLOCK,
    DisfluencyType.SUBSTITUTION,
    DisfluencyType.PROLONGATION,
    DisfluencyType.INSERTION,
)

TOKEN_FOR_TYPE = {
    DisfluencyType.REPETITION: "[REP]",
    DisfluencyType.DELETION: "[MISS]",
    DisfluencyType.BLOCK: "[BLOCK]",
    DisfluencyType.SUBSTITUTION: "[SUB]",
    DisfluencyType.PROLONGATION: "[PRO]",
    DisfluencyType.INSERTION: "[INS]",
}
TYPE_FOR_TOKEN = {tok: dtype for dtype, tok in TOKEN_FOR_TYPE.items()}

#: Types that may appear as word-level ground-truth tokens. Substitution is
#: annotated at the phoneme level only.
WORD_LEVEL_TYPES = frozenset(DISFLUENT_TYPES) - {DisfluencyType.SUBSTITUTION}


class MalformedDocument(ValueError):
    """The interchange document is syntactically or schematically invalid."""


class InvariantViolation(ValueError):
    """A structurally valid document violates a record invariant."""


class UnsupportedType(ValueError):
    """A unit carries a disfluency type not allowed at this level."""


def to_cs(seconds: float) -> int:
    """Seconds to integer centiseconds (nearest)."""
    return int(round(seconds * 100))


def from_cs(cs: int) -> float:
    return cs / 100.0


def quantize(seconds: float) -> float:
    """Snap a time to the centisecond grid."""
    return to_cs(seconds) / 100.0


def fmt_ts(seconds: float) -> str:
    return f"{seconds:.2f}"


@dataclass(frozen=True)
class TimedUnit:
    """A labelled time span at word or phoneme granularity."""

    label: str
    start: float
    end: float
    dtype: DisfluencyType = DisfluencyType.NONE

    @property
    def duration(self) -> float:
        return self.end - self.start


def _check_units(units: tuple[TimedUnit, ...], level: str, audio_duration: float) -> None:
    dur_cs = to_cs(audio_duration)
    prev_end = 0
    for i, u in enumerate(units):
        s, e = to_cs(u.start), to_cs(u.end)
        if s < 0:
            raise InvariantViolation(f"{level} unit {i}: negative start {u.start}")
        if s > e:
            raise InvariantViolation(f"{level} unit {i}: start {u.start} > end {u.end}")
        if e > dur_cs:
            raise InvariantViolation(
                f"{level} unit {i}: end {u.end} exceeds audio duration {audio_duration}"
            )
        if s < prev_end:
            raise InvariantViolation(f"{level} unit {i}: overlaps previous unit")
        prev_end = e


@dataclass(frozen=True)
class UtteranceRecord:
    """One corpus instance: clean transcript plus timed word/phoneme annotations."""

    id: str
    clean_transcript: str
    words: tuple[TimedUnit, ...]
    phonemes: tuple[TimedUnit, ...]
    audio_duration: float

    def validate(self) -> None:
        if self.audio_duration < 0:
            raise InvariantViolation(f"negative audio duration {self.audio_duration}")
        _check_units(self.words, WORD, self.audio_duration)
        _check_units(self.phonemes, PHONEME, self.audio_duration)

    @property
    def is_fluent(self) -> bool:
        return all(
            u.dtype is DisfluencyType.NONE for u in self.words + self.phonemes
        )

    def units(self, level: str) -> tuple[TimedUnit, ...]:
        return self.words if level == WORD else self.phonemes

    def to_json(self) -> dict:
        def dump(units):
            return [[u.label, u.start, u.end, u.dtype.value] for u in units]

        return {
            "id": self.id,
            "clean_transcript": self.clean_transcript,
            "audio_duration": self.audio_duration,
            "words": dump(self.words),
            "phonemes": dump(self.phonemes),
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json(), ensure_ascii=False)


def _units_from_json(raw, level: str) -> tuple[TimedUnit, ...]:
    if not isinstance(raw, list):
        raise MalformedDocument(f"'{level}s' must be a list")
    units = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, list) or len(entry) != 4:
            raise MalformedDocument(f"{level} unit {i}: expected [label, start, end, type]")
        label, start, end, dtype = entry
        if not isinstance(label, str):
            raise MalformedDocument(f"{level} unit {i}: label must be a string")
        if not isinstance(start, (int, float)) or not isinstance(end, (int, float)):
            raise MalformedDocument(f"{level} unit {i}: timestamps must be numbers")
        try:
            kind = DisfluencyType(dtype)
        except ValueError:
            raise MalformedDocument(f"{level} unit {i}: unknown type {dtype!r}") from None
        units.append(TimedUnit(label, quantize(start), quantize(end), kind))
    return tuple(units)


def record_from_json(doc: dict) -> UtteranceRecord:
    if not isinstance(doc, dict):
        raise MalformedDocument("record must be a JSON object")
    for key in ("id", "clean_transcript", "audio_duration", "words", "phonemes"):
        if key not in doc:
            raise MalformedDocument(f"missing field {key!r}")
    if not isinstance(doc["id"], str) or not isinstance(doc["clean_transcript"], str):
        raise MalformedDocument("'id' and 'clean_transcript' must be strings")
    if not isinstance(doc["audio_duration"], (int, float)):
        raise MalformedDocument("'audio_duration' must be a number")
    rec = UtteranceRecord(
        id=doc["id"],
        clean_transcript=doc["clean_transcript"],
        words=_units_from_json(doc["words"], WORD),
        phonemes=_units_from_json(doc["phonemes"], PHONEME),
        audio_duration=quantize(doc["audio_duration"]),
    )
    rec.validate()
    return rec


def parse_record(text: str) -> UtteranceRecord:
    """Parse and validate one utterance document (JSON).

    Raises MalformedDocument for syntax/schema problems and
    InvariantViolation (naming the offending unit index) for structural ones.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"invalid JSON: {exc}") from None
    return record_from_json(doc)


# ---------------------------------------------------------------------------
# Ground-truth text
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DisfluencyMark:
    """A disfluency token with its time span and optional payload word/phoneme."""

    token: str
    start: float
    end: float
    payload: str | None = None

    @property
    def dtype(self) -> DisfluencyType:
        return TYPE_FOR_TOKEN[self.token]


Item = Union[str, DisfluencyMark]

# Anomaly kinds reported by the total parser.
A_MISSING_PREFIX = "missing-prefix"
A_UNKNOWN_TOKEN = "unknown-token"
A_BAD_TIMESTAMP = "bad-timestamp"
A_ORPHAN_TIMESTAMP = "orphan-timestamp"
A_TRUNCATED_MARK = "truncated-mark"
A_BARE_TOKEN = "bare-token"
A_MISSING_SEPARATOR = "missing-separator"
A_STRAY_TOKEN = "stray-token"


@dataclass(frozen=True)
class Anomaly:
    kind: str
    detail: str
    position: int = 0


@dataclass(frozen=True)
class GroundTruthText:
    """Structured form of a "TRANSCRIPT:" line: plain words plus timestamped marks."""

    raw: str
    level: str
    items: tuple[Item, ...]
    anomalies: tuple[Anomaly, ...] = ()

    @property
    def marks(self) -> tuple[DisfluencyMark, ...]:
        return tuple(it for it in self.items if isinstance(it, DisfluencyMark))

    @property
    def plain_words(self) -> tuple[str, ...]:
        return tuple(it for it in self.items if isinstance(it, str))

    def tokens(self) -> list[tuple]:
        """Token stream for error-rate scoring.

        A mark counts as a single token identified by its disfluency token and
        payload; timestamp values are excluded.
        """
        out: list[tuple] = []
        for it in self.items:
            if isinstance(it, DisfluencyMark):
                out.append(("m", it.token, it.payload))
            else:
                out.append(("w", it))
        return out

    def render(self) -> str:
        """Re-render the structured items through the normative grammar."""
        return render_items(self.items, self.level)


def _render_word_mark(mark: DisfluencyMark) -> str:
    inner = f"({fmt_ts(mark.start)}) {mark.token}"
    if mark.payload:
        inner += f" {mark.payload}"
    return inner + f" ({fmt_ts(mark.end)})"


def _render_phoneme_mark(mark: DisfluencyMark) -> str:
    span = f"({fmt_ts(mark.start)},{fmt_ts(mark.end)}) {mark.token}"
    if mark.payload:
        return f"{mark.payload} {span}"
    return span


def render_items(items: Iterable[Item], level: str) -> str:
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    parts = [PREFIX]
    if level == WORD:
        for it in items:
            parts.append(_render_word_mark(it) if isinstance(it, DisfluencyMark) else it)
    else:
        marks = []
        for it in items:
            if isinstance(it, DisfluencyMark):
                marks.append(it)
            else:
                parts.append(it)
        parts.append("|")
        parts.extend(_render_phoneme_mark(m) for m in marks)
    return " ".join(parts)


def _mark_from_unit(u: TimedUnit) -> DisfluencyMark:
    return DisfluencyMark(
        token=TOKEN_FOR_TYPE[u.dtype],
        start=quantize(u.start),
        end=quantize(u.end),
        payload=u.label or None,
    )


def render_ground_truth_word(rec: UtteranceRecord) -> GroundTruthText:
    """Render the word-level annotated transcript.

    Fluent words appear bare; each disfluent word becomes a timestamped mark
    at its position in the time-ordered word list. Deletion marks carry the
    missing word as payload and sit on the vacated gap interval.
    """
    rec.validate()
    items: list[Item] = []
    for i, u in enumerate(rec.words):
        if u.dtype is DisfluencyType.NONE:
            items.append(u.label)
        elif u.dtype not in WORD_LEVEL_TYPES:
            raise UnsupportedType(
                f"word unit {i}: {u.dtype.display} is phoneme-level only"
            )
        else:
            items.append(_mark_from_unit(u))
    tup = tuple(items)
    return GroundTruthText(render_items(tup, WORD), WORD, tup)


def render_ground_truth_phoneme(rec: UtteranceRecord) -> GroundTruthText:
    """Render the phoneme-level ground truth.

    Output is the clean transcript, a "|" separator, then only the disfluent
    phonemes, each with its time span and disfluency token.
    """
    rec.validate()
    items: list[Item] = list(rec.clean_transcript.split())
    for u in rec.phonemes:
        if u.dtype is not DisfluencyType.NONE:
            items.append(_mark_from_unit(u))
    tup = tuple(items)
    return GroundTruthText(render_items(tup, PHONEME), PHONEME, tup)


_TS_RE = re.compile(r"^\((\d+(?:\.\d+)?)\)$")
_TS_PAIR_RE = re.compile(r"^\((\d+(?:\.\d+)?),(\d+(?:\.\d+)?)\)$")
_BRACKET_RE = re.compile(r"^\[[^\[\]]+\]$")


def _parse_word_items(toks: list[str], anomalies: list[Anomaly]) -> list[Item]:
    items: list[Item] = []
    i = 0
    n = len(toks)
    while i < n:
        t = toks[i]
        m = _TS_RE.match(t)
        if m:
            start = float(m.group(1))
            if i + 1 < n and toks[i + 1] in TYPE_FOR_TOKEN:
                token = toks[i + 1]
                j = i + 2
                payload = None
                if (
                    j + 1 < n
                    and not _TS_RE.match(toks[j])
                    and _TS_RE.match(toks[j + 1])
                ):
                    payload = toks[j]
                    j += 1
                m2 = _TS_RE.match(toks[j]) if j < n else None
                if m2:
                    items.append(
                        DisfluencyMark(token, quantize(start), quantize(float(m2.group(1))), payload)
                    )
                    i = j + 1
                else:
                    anomalies.append(Anomaly(A_TRUNCATED_MARK, f"{t} {token}", i))
                    i = j
            else:
                anomalies.append(Anomaly(A_ORPHAN_TIMESTAMP, t, i))
                i += 1
        elif t.startswith("(") and t.endswith(")"):
            anomalies.append(Anomaly(A_BAD_TIMESTAMP, t, i))
            i += 1
        elif _BRACKET_RE.match(t):
            if t in TYPE_FOR_TOKEN:
                anomalies.append(Anomaly(A_BARE_TOKEN, t, i))
            else:
                anomalies.append(Anomaly(A_UNKNOWN_TOKEN, t, i))
            i += 1
        else:
            items.append(t)
            i += 1
    return items


def _parse_phoneme_items(toks: list[str], anomalies: list[Anomaly]) -> list[Item]:
    items: list[Item] = []
    if "|" not in toks:
        if toks:
            anomalies.append(Anomaly(A_MISSING_SEPARATOR, "no '|' separator", 0))
        items.extend(toks)
        return items
    sep = toks.index("|")
    items.extend(toks[:sep])
    rest = toks[sep + 1:]
    i = 0
    n = len(rest)

    def finish(span_tok: str, payload: str | None, pos: int, consumed: int) -> None:
        nonlocal i
        pm = _TS_PAIR_RE.match(span_tok)
        nxt = pos + 1
        if nxt < n and rest[nxt] in TYPE_FOR_TOKEN:
            items.append(
                DisfluencyMark(
                    rest[nxt],
                    quantize(float(pm.group(1))),
                    quantize(float(pm.group(2))),
                    payload,
                )
            )
            i += consumed
        elif nxt < n and _BRACKET_RE.match(rest[nxt]):
            anomalies.append(Anomaly(A_UNKNOWN_TOKEN, rest[nxt], sep + 1 + nxt))
            i += consumed
        else:
            anomalies.append(Anomaly(A_TRUNCATED_MARK, span_tok, sep + 1 + pos))
            i += consumed - 1

    while i < n:
        t = rest[i]
        if _TS_PAIR_RE.match(t):
            finish(t, None, i, 2)
        elif i + 1 < n and _TS_PAIR_RE.match(rest[i + 1]):
            finish(rest[i + 1], t, i + 1, 3)
        else:
            anomalies.append(Anomaly(A_STRAY_TOKEN, t, sep + 1 + i))
            i += 1
    return items


def parse_ground_truth(text: str, level: str = WORD) -> GroundTruthText:
    """Total parse of an annotated transcript string.

    Never raises on content: malformed pieces are dropped and reported in
    ``anomalies`` so that arbitrary model output can be scored.
    """
    if level not in LEVELS:
        raise ValueError(f"unknown level {level!r}")
    anomalies: list[Anomaly] = []
    body = text
    if text.startswith(PREFIX):
        body = text[len(PREFIX):]
    else:
        anomalies.append(Anomaly(A_MISSING_PREFIX, text[:20]))
    toks = body.split()
    if level == WORD:
        items = _parse_word_items(toks, anomalies)
    else:
        items = _parse_phoneme_items(toks, anomalies)
    return GroundTruthText(text, level, tuple(items), tuple(anomalies))
