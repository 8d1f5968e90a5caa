"""Shared corpus generators. Everything is seeded for reproducibility."""

from __future__ import annotations

import random

import pytest

from disfluency_kit.annotation import DisfluencyType, TimedUnit, UtteranceRecord
from disfluency_kit.simulate import InjectionRule, InjectionSpec

VOCAB = [
    "call", "stella", "ask", "her", "to", "bring", "these", "things",
    "with", "from", "the", "store", "six", "spoons", "of", "fresh",
    "snow", "peas", "five", "thick", "slabs", "blue", "cheese", "and",
    "maybe", "a", "snack", "for", "her", "brother", "bob",
]

ARPA = [
    "AA", "AE", "AH", "AO", "AW", "AY", "B", "CH", "D", "DH", "EH", "ER",
    "EY", "F", "G", "HH", "IH", "IY", "JH", "K", "L", "M", "N", "NG",
    "OW", "OY", "P", "R", "S", "SH", "T", "TH", "UH", "UW", "V", "W",
    "Y", "Z", "ZH",
]


def make_fluent_record(
    rng: random.Random,
    n_words: int | None = None,
    with_phonemes: bool = True,
    uid: str | None = None,
) -> UtteranceRecord:
    """A fluent record on the centisecond grid with nested phoneme spans."""
    n = n_words if n_words is not None else rng.randint(2, 8)
    words, phones = [], []
    t = 0  # centiseconds
    for _ in range(n):
        t += rng.randint(0, 30)
        dur = rng.randint(10, 60)
        start, end = t, t + dur
        words.append(TimedUnit(rng.choice(VOCAB), start / 100, end / 100))
        if with_phonemes:
            k = rng.randint(1, min(3, dur))
            cuts = sorted(rng.sample(range(start + 1, end), k - 1)) if k > 1 else []
            bounds = [start] + cuts + [end]
            for a, b in zip(bounds, bounds[1:]):
                phones.append(TimedUnit(rng.choice(ARPA), a / 100, b / 100))
        t = end
    audio = (t + rng.randint(0, 50)) / 100
    transcript = " ".join(w.label for w in words)
    rec = UtteranceRecord(
        uid or f"utt-{rng.randrange(10**9):09d}",
        transcript,
        tuple(words),
        tuple(phones),
        audio,
    )
    rec.validate()
    return rec


def random_rule(rng: random.Random, dtype: DisfluencyType, level: str | None = None) -> InjectionRule:
    if dtype is DisfluencyType.SUBSTITUTION:
        level = "phoneme"
    if level is None:
        level = rng.choice(["word", "phoneme"])
    if dtype is DisfluencyType.REPETITION:
        return InjectionRule(dtype, level, count=rng.randint(1, 3), gap=rng.randint(0, 20) / 100)
    if dtype is DisfluencyType.BLOCK:
        return InjectionRule(dtype, level, pause=rng.randint(5, 100) / 100)
    if dtype is DisfluencyType.PROLONGATION:
        return InjectionRule(dtype, level, factor=1.0 + rng.randint(1, 30) / 10)
    if dtype is DisfluencyType.SUBSTITUTION:
        return InjectionRule(dtype, level, replacement=rng.choice(ARPA))
    if dtype is DisfluencyType.INSERTION:
        return InjectionRule(dtype, level, label=rng.choice(VOCAB))
    return InjectionRule(dtype, level)


def random_spec(rng: random.Random, dtypes, seed: int | None = None) -> InjectionSpec:
    rules = tuple(random_rule(rng, dt) for dt in dtypes)
    return InjectionSpec(rules, seed if seed is not None else rng.randrange(2**32))


def write_corpus(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json_line() + "\n")


@pytest.fixture
def rng():
    return random.Random(20240917)
