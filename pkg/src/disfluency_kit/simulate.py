"""Text-domain disfluency injection and corpus statistics.

``inject`` applies an ordered list of rules to a fluent utterance record,
re-stamping the timeline so later units shift by the inserted time. All
arithmetic happens in integer centiseconds, so outputs stay exactly on the
annotation grid and the duration accounting is exact.

Rules edit the unit list of their own level; the other level (and the audio
duration) only experiences the resulting time shifts. Cross-level content is
not synthesized: repeating a word does not fabricate phoneme copies.
"""

from __future__ import annotations

import hashlib
import json
import random
import statistics
from dataclasses import dataclass, field
from typing import Iterable

from .annotation import (
    DISFLUENT_TYPES,
    DisfluencyType,
    InvariantViolation,
    LEVELS,
    MalformedDocument,
    PHONEME,
    TimedUnit,
    UtteranceRecord,
    WORD,
    from_cs,
    to_cs,
)


class TargetOutOfRange(ValueError):
    """Rule target does not address a usable unit/position."""


class IncompatibleLevel(ValueError):
    """Rule type is not allowed at the requested level."""


def stable_hash(text: str) -> int:
    """Deterministic 64-bit hash, stable across processes and runs."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


RANDOM_TARGET = "random"


@dataclass(frozen=True)
class InjectionRule:
    dtype: DisfluencyType
    level: str
    target: int | str = RANDOM_TARGET
    count: int = 1              # repetition: number of extra copies
    gap: float = 0.0            # repetition: silence between copies (s)
    pause: float | None = None  # block: pause length (s)
    factor: float | None = None  # prolongation: stretch factor
    replacement: str | None = None  # substitution: new phoneme label
    label: str | None = None    # insertion: inserted label

    def validate(self) -> None:
        if self.dtype not in DISFLUENT_TYPES:
            raise MalformedDocument(f"rule type must be one of {[t.value for t in DISFLUENT_TYPES]}")
        if self.level not in LEVELS:
            raise MalformedDocument(f"rule level must be one of {LEVELS}")
        if self.target != RANDOM_TARGET and not isinstance(self.target, int):
            raise MalformedDocument("rule target must be an index or 'random'")
        if self.dtype is DisfluencyType.REPETITION:
            if self.count < 1:
                raise MalformedDocument("repetition count must be >= 1")
            if self.gap < 0:
                raise MalformedDocument("repetition gap must be >= 0")
        elif self.dtype is DisfluencyType.BLOCK:
            if self.pause is None or self.pause <= 0:
                raise MalformedDocument("block pause must be > 0")
        elif self.dtype is DisfluencyType.PROLONGATION:
            if self.factor is None or self.factor <= 1:
                raise MalformedDocument("prolongation factor must be > 1")
        elif self.dtype is DisfluencyType.SUBSTITUTION:
            if self.level != PHONEME:
                raise IncompatibleLevel("substitution rules are phoneme-level only")
            if not self.replacement:
                raise MalformedDocument("substitution needs a replacement label")
        elif self.dtype is DisfluencyType.INSERTION:
            if not self.label:
                raise MalformedDocument("insertion needs a label")

    def to_json(self) -> dict:
        doc: dict = {"type": self.dtype.value, "level": self.level, "target": self.target}
        if self.dtype is DisfluencyType.REPETITION:
            doc.update(count=self.count, gap=self.gap)
        elif self.dtype is DisfluencyType.BLOCK:
            doc.update(pause=self.pause)
        elif self.dtype is DisfluencyType.PROLONGATION:
            doc.update(factor=self.factor)
        elif self.dtype is DisfluencyType.SUBSTITUTION:
            doc.update(replacement=self.replacement)
        elif self.dtype is DisfluencyType.INSERTION:
            doc.update(label=self.label)
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "InjectionRule":
        if not isinstance(doc, dict) or "type" not in doc or "level" not in doc:
            raise MalformedDocument("rule must be an object with 'type' and 'level'")
        try:
            dtype = DisfluencyType(doc["type"])
        except ValueError:
            raise MalformedDocument(f"unknown rule type {doc['type']!r}") from None
        rule = cls(
            dtype=dtype,
            level=doc["level"],
            target=doc.get("target", RANDOM_TARGET),
            count=doc.get("count", 1),
            gap=doc.get("gap", 0.0),
            pause=doc.get("pause"),
            factor=doc.get("factor"),
            replacement=doc.get("replacement"),
            label=doc.get("label"),
        )
        rule.validate()
        return rule


@dataclass(frozen=True)
class InjectionSpec:
    rules: tuple[InjectionRule, ...]
    seed: int = 0

    def validate(self) -> None:
        for rule in self.rules:
            rule.validate()

    def to_json(self) -> dict:
        return {"seed": self.seed, "rules": [r.to_json() for r in self.rules]}

    @classmethod
    def from_json(cls, doc: dict) -> "InjectionSpec":
        if not isinstance(doc, dict) or not isinstance(doc.get("rules"), list):
            raise MalformedDocument("spec must be an object with a 'rules' array")
        seed = doc.get("seed", 0)
        if not isinstance(seed, int):
            raise MalformedDocument("'seed' must be an integer")
        return cls(tuple(InjectionRule.from_json(r) for r in doc["rules"]), seed)

    @classmethod
    def from_file(cls, path) -> "InjectionSpec":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise MalformedDocument(f"invalid spec JSON: {exc}") from None
        return cls.from_json(doc)


@dataclass(frozen=True)
class AppliedRule:
    """What one rule actually did: resolved target and exact time delta."""

    index: int
    dtype: DisfluencyType
    level: str
    target: int
    time_delta_cs: int
    original_label: str | None = None


@dataclass(frozen=True)
class InjectionTrace:
    applied: tuple[AppliedRule, ...]
    # (level, unit index in the final record, original label) per substitution
    substitutions: tuple[tuple[str, int, str], ...]


class _Unit:
    __slots__ = ("label", "start", "end", "dtype", "orig_label")

    def __init__(self, label, start, end, dtype, orig_label=None):
        self.label = label
        self.start = start
        self.end = end
        self.dtype = dtype
        self.orig_label = orig_label


def _resolve_unit_target(rule: InjectionRule, units: list[_Unit], rng, rule_idx: int) -> int:
    fluent = [i for i, u in enumerate(units) if u.dtype is DisfluencyType.NONE]
    if rule.target == RANDOM_TARGET:
        if not fluent:
            raise TargetOutOfRange(f"rule {rule_idx}: no fluent {rule.level} unit to target")
        return rng.choice(fluent)
    t = rule.target
    if not 0 <= t < len(units):
        raise TargetOutOfRange(f"rule {rule_idx}: target {t} out of range 0..{len(units) - 1}")
    if units[t].dtype is not DisfluencyType.NONE:
        raise TargetOutOfRange(f"rule {rule_idx}: {rule.level} unit {t} is already disfluent")
    return t


def _resolve_position(rule: InjectionRule, units: list[_Unit], rng, rule_idx: int) -> int:
    if rule.target == RANDOM_TARGET:
        return rng.randint(0, len(units))
    t = rule.target
    if not 0 <= t <= len(units):
        raise TargetOutOfRange(f"rule {rule_idx}: position {t} out of range 0..{len(units)}")
    return t


def _shift_from(units: list[_Unit], index: int, delta: int) -> None:
    for u in units[index:]:
        u.start += delta
        u.end += delta


def _insert_time(units: list[_Unit], at: int, delta: int) -> None:
    """Open a gap of delta at time `at`: later units shift, straddlers stretch.

    A unit ending exactly at the point stays put; one starting there shifts.
    """
    for u in units:
        if u.start == u.end:
            if u.start >= at:
                u.start += delta
                u.end += delta
        else:
            if u.start >= at:
                u.start += delta
            if u.end > at:
                u.end += delta


def _delete_time(units: list[_Unit], a: int, b: int) -> None:
    """Remove the time span [a, b): straddlers clip, covered units collapse
    to the zero-length boundary instant (labels are kept, mirroring how the
    deleted unit itself is annotated)."""
    d = b - a

    def remap(t: int) -> int:
        if t <= a:
            return t
        if t < b:
            return a
        return t - d

    for u in units:
        u.start = remap(u.start)
        u.end = remap(u.end)


def inject_traced(
    rec: UtteranceRecord, spec: InjectionSpec, close_gaps: bool = False
) -> tuple[UtteranceRecord, InjectionTrace]:
    """Apply the injection rules in order and return (record, trace).

    The trace carries the resolved targets, the exact per-rule time delta,
    and the original labels of substituted units, which is what the
    strip-inverse needs to recover the fluent label sequence.
    """
    rec.validate()
    if not rec.is_fluent:
        raise InvariantViolation(f"record {rec.id!r} already contains disfluencies")
    spec.validate()
    rng = random.Random(spec.seed ^ stable_hash(rec.id))

    levels = {
        WORD: [_Unit(u.label, to_cs(u.start), to_cs(u.end), u.dtype) for u in rec.words],
        PHONEME: [_Unit(u.label, to_cs(u.start), to_cs(u.end), u.dtype) for u in rec.phonemes],
    }
    audio_cs = to_cs(rec.audio_duration)
    applied: list[AppliedRule] = []

    for ridx, rule in enumerate(spec.rules):
        units = levels[rule.level]
        other = levels[PHONEME if rule.level == WORD else WORD]
        delta = 0
        original = None

        if rule.dtype is DisfluencyType.REPETITION:
            t = _resolve_unit_target(rule, units, rng, ridx)
            u = units[t]
            d = u.end - u.start
            g = to_cs(rule.gap)
            k = rule.count
            delta = k * (d + g)
            _shift_from(units, t + 1, delta)
            _insert_time(other, u.end, delta)
            u.dtype = DisfluencyType.REPETITION
            copies = []
            for i in range(1, k + 1):
                cs = u.end + i * g + (i - 1) * d
                kind = DisfluencyType.REPETITION if i < k else DisfluencyType.NONE
                copies.append(_Unit(u.label, cs, cs + d, kind))
            units[t + 1 : t + 1] = copies

        elif rule.dtype is DisfluencyType.DELETION:
            t = _resolve_unit_target(rule, units, rng, ridx)
            u = units[t]
            original = u.label
            d = u.end - u.start
            u.dtype = DisfluencyType.DELETION
            if close_gaps:
                delta = -d
                end_old = u.end
                u.end = u.start
                _shift_from(units, t + 1, delta)
                _delete_time(other, u.start, end_old)

        elif rule.dtype is DisfluencyType.BLOCK:
            t = _resolve_unit_target(rule, units, rng, ridx)
            u = units[t]
            delta = to_cs(rule.pause)
            _shift_from(units, t + 1, delta)
            _insert_time(other, u.end, delta)
            units.insert(t + 1, _Unit("", u.end, u.end + delta, DisfluencyType.BLOCK))

        elif rule.dtype is DisfluencyType.SUBSTITUTION:
            t = _resolve_unit_target(rule, units, rng, ridx)
            u = units[t]
            original = u.label
            u.orig_label = u.label
            u.label = rule.replacement
            u.dtype = DisfluencyType.SUBSTITUTION

        elif rule.dtype is DisfluencyType.PROLONGATION:
            t = _resolve_unit_target(rule, units, rng, ridx)
            u = units[t]
            d = u.end - u.start
            delta = int(round(d * (rule.factor - 1.0)))
            end_old = u.end
            _shift_from(units, t + 1, delta)
            _insert_time(other, end_old, delta)
            u.end += delta
            u.dtype = DisfluencyType.PROLONGATION

        else:  # INSERTION
            t = _resolve_position(rule, units, rng, ridx)
            durs = [u.end - u.start for u in units]
            d = int(round(statistics.fmean(durs))) if durs else 0
            prev_end = units[t - 1].end if t > 0 else 0
            delta = d
            _shift_from(units, t, delta)
            _insert_time(other, prev_end, delta)
            units.insert(t, _Unit(rule.label, prev_end, prev_end + d, DisfluencyType.INSERTION))

        audio_cs += delta
        applied.append(AppliedRule(ridx, rule.dtype, rule.level, t, delta, original))

    def rebuild(units: list[_Unit]) -> tuple[TimedUnit, ...]:
        return tuple(TimedUnit(u.label, from_cs(u.start), from_cs(u.end), u.dtype) for u in units)

    out = UtteranceRecord(
        id=rec.id,
        clean_transcript=rec.clean_transcript,
        words=rebuild(levels[WORD]),
        phonemes=rebuild(levels[PHONEME]),
        audio_duration=from_cs(audio_cs),
    )
    out.validate()
    subs = tuple(
        (level, i, u.orig_label)
        for level in LEVELS
        for i, u in enumerate(levels[level])
        if u.orig_label is not None
    )
    return out, InjectionTrace(tuple(applied), subs)


def inject(rec: UtteranceRecord, spec: InjectionSpec, close_gaps: bool = False) -> UtteranceRecord:
    """Inject disfluencies into a fluent record; see inject_traced."""
    return inject_traced(rec, spec, close_gaps)[0]


# Kept in the recovered label sequence (deletions restore their label,
# prolongations keep the stretched word); the rest is injected material.
_KEPT_TYPES = {
    DisfluencyType.NONE,
    DisfluencyType.DELETION,
    DisfluencyType.PROLONGATION,
    DisfluencyType.SUBSTITUTION,
}


def recover_fluent_labels(
    rec: UtteranceRecord, trace: InjectionTrace | None = None
) -> tuple[list[str], list[str]]:
    """Strip-inverse: recover the fluent (word, phoneme) label sequences.

    Repetition-marked copies, blocks and insertions are dropped; deletion
    units contribute their retained label; substitution units are reverted
    using the trace's original labels.
    """
    subs = {}
    if trace is not None:
        subs = {(level, i): orig for level, i, orig in trace.substitutions}
    out: list[list[str]] = []
    for level in LEVELS:
        labels = []
        for i, u in enumerate(rec.units(level)):
            if u.dtype not in _KEPT_TYPES:
                continue
            if u.dtype is DisfluencyType.SUBSTITUTION:
                labels.append(subs.get((level, i), u.label))
            else:
                labels.append(u.label)
        out.append(labels)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# Corpus statistics
# ---------------------------------------------------------------------------

@dataclass
class CorpusStats:
    """Per-type disfluent time and instance counts over a corpus.

    Durations accumulate in integer centiseconds, so the fold is exact and
    independent of record order (mergeable across shards).
    """

    centiseconds: dict = field(default_factory=lambda: {t: 0 for t in DISFLUENT_TYPES})
    counts: dict = field(default_factory=lambda: {t: 0 for t in DISFLUENT_TYPES})
    audio_centiseconds: int = 0
    records: int = 0

    def add_record(self, rec: UtteranceRecord) -> None:
        for u in rec.words + rec.phonemes:
            if u.dtype is not DisfluencyType.NONE:
                self.centiseconds[u.dtype] += to_cs(u.end) - to_cs(u.start)
                self.counts[u.dtype] += 1
        self.audio_centiseconds += to_cs(rec.audio_duration)
        self.records += 1

    def merge(self, other: "CorpusStats") -> "CorpusStats":
        out = CorpusStats()
        for t in DISFLUENT_TYPES:
            out.centiseconds[t] = self.centiseconds[t] + other.centiseconds[t]
            out.counts[t] = self.counts[t] + other.counts[t]
        out.audio_centiseconds = self.audio_centiseconds + other.audio_centiseconds
        out.records = self.records + other.records
        return out

    def hours(self, dtype: DisfluencyType) -> float:
        return self.centiseconds[dtype] / 360000.0

    @property
    def total_hours(self) -> float:
        return sum(self.hours(t) for t in DISFLUENT_TYPES)

    @property
    def total_count(self) -> int:
        return sum(self.counts.values())

    def to_dict(self) -> dict:
        return {
            "per_type": {
                t.display: {"hours": self.hours(t), "count": self.counts[t]}
                for t in DISFLUENT_TYPES
            },
            "total_hours": self.total_hours,
            "total_count": self.total_count,
            "audio_hours": self.audio_centiseconds / 360000.0,
            "records": self.records,
        }

    def format_table(self) -> str:
        lines = [f"{'Dysfluency':<16}{'Hours':>12}{'Count':>10}"]
        for t in DISFLUENT_TYPES:
            lines.append(f"{t.display:<16}{self.hours(t):>12.6f}{self.counts[t]:>10d}")
        lines.append(f"{'Total':<16}{self.total_hours:>12.6f}{self.total_count:>10d}")
        return "\n".join(lines)


def corpus_stats(records: Iterable[UtteranceRecord]) -> CorpusStats:
    """Single-pass fold of per-type disfluent duration and counts."""
    stats = CorpusStats()
    for rec in records:
        stats.add_record(rec)
    return stats
