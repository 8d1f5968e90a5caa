import json
import re

import pytest

from disfluency_kit.annotation import (
    A_BAD_TIMESTAMP,
    A_BARE_TOKEN,
    A_MISSING_PREFIX,
    A_MISSING_SEPARATOR,
    A_ORPHAN_TIMESTAMP,
    A_UNKNOWN_TOKEN,
    DisfluencyMark,
    DisfluencyType,
    InvariantViolation,
    MalformedDocument,
    TimedUnit,
    UnsupportedType,
    UtteranceRecord,
    parse_ground_truth,
    parse_record,
    render_ground_truth_phoneme,
    render_ground_truth_word,
)
from conftest import make_fluent_record

D = DisfluencyType


def rec_json(words=(), phonemes=(), transcript="", duration=10.0, uid="u"):
    return json.dumps(
        {
            "id": uid,
            "clean_transcript": transcript,
            "audio_duration": duration,
            "words": [list(w) for w in words],
            "phonemes": [list(p) for p in phonemes],
        }
    )


class TestParseRecord:
    def test_paper_example(self):
        rec = parse_record(
            rec_json(
                words=[("Call", 0.00, 0.05, "none"), ("Stella", 0.08, 0.20, "pro")],
                phonemes=[("EH", 0.10, 0.15, "pro")],
                transcript="Call Stella",
                duration=0.30,
            )
        )
        assert len(rec.words) == 2
        assert rec.words[0] == TimedUnit("Call", 0.00, 0.05, D.NONE)
        assert rec.words[1] == TimedUnit("Stella", 0.08, 0.20, D.PROLONGATION)
        assert rec.phonemes == (TimedUnit("EH", 0.10, 0.15, D.PROLONGATION),)

    def test_empty_record_is_valid(self):
        rec = parse_record(rec_json(duration=0.0))
        assert rec.words == () and rec.phonemes == ()
        assert rec.clean_transcript == ""

    def test_start_after_end_rejected(self):
        with pytest.raises(InvariantViolation, match=r"word unit 0"):
            parse_record(rec_json(words=[("X", 0.30, 0.10, "none")]))

    def test_overlap_rejected(self):
        with pytest.raises(InvariantViolation, match=r"word unit 1"):
            parse_record(
                rec_json(words=[("a", 0.0, 0.5, "none"), ("b", 0.4, 0.8, "none")])
            )

    def test_unit_beyond_audio_duration(self):
        with pytest.raises(InvariantViolation, match="exceeds audio duration"):
            parse_record(rec_json(words=[("a", 0.0, 3.0, "none")], duration=1.0))

    def test_negative_start(self):
        with pytest.raises(InvariantViolation, match="negative start"):
            parse_record(rec_json(words=[("a", -0.2, 0.5, "none")]))

    @pytest.mark.parametrize(
        "text",
        [
            "not json at all",
            "[1, 2, 3]",
            '{"id": "u"}',
            rec_json(words=[("a", 0.0, 0.1, "nope")]),
            rec_json(words=[("a", 0.0, 0.1)]),
            rec_json(words=[(1, 0.0, 0.1, "none")]),
        ],
    )
    def test_malformed_documents(self, text):
        with pytest.raises(MalformedDocument):
            parse_record(text)

    def test_timestamps_snap_to_centisecond_grid(self):
        rec = parse_record(rec_json(words=[("a", 0.0810001, 0.1999999, "none")], duration=1.0))
        assert rec.words[0].start == 0.08
        assert rec.words[0].end == 0.20

    def test_json_line_round_trip(self, rng):
        for _ in range(50):
            rec = make_fluent_record(rng)
            assert parse_record(rec.to_json_line()) == rec


class TestRenderWord:
    def test_prolongation_surface(self):
        rec = parse_record(
            rec_json(
                words=[("Call", 0.00, 0.05, "none"), ("Stella", 0.08, 0.20, "pro")],
                transcript="Call Stella",
                duration=1.0,
            )
        )
        assert render_ground_truth_word(rec).raw == "TRANSCRIPT: Call (0.08) [PRO] Stella (0.20)"

    def test_fluent_is_transcript_verbatim(self):
        rec = parse_record(
            rec_json(
                words=[("Call", 0.0, 0.1, "none"), ("Stella", 0.2, 0.4, "none")],
                transcript="Call Stella",
                duration=1.0,
            )
        )
        gt = render_ground_truth_word(rec)
        assert gt.raw == "TRANSCRIPT: " + rec.clean_transcript
        assert not re.search(r"\(\d", gt.raw)

    def test_insertion_surface(self):
        rec = parse_record(rec_json(words=[("um", 0.10, 0.40, "ins")], duration=1.0))
        assert render_ground_truth_word(rec).raw == "TRANSCRIPT: (0.10) [INS] um (0.40)"

    def test_block_has_no_payload(self):
        rec = parse_record(
            rec_json(
                words=[("a", 0.0, 0.3, "none"), ("", 0.3, 0.8, "block")], duration=1.0
            )
        )
        assert render_ground_truth_word(rec).raw == "TRANSCRIPT: a (0.30) [BLOCK] (0.80)"

    def test_deletion_carries_missing_word(self):
        rec = parse_record(
            rec_json(
                words=[("call", 0.0, 0.3, "none"), ("stella", 0.3, 0.3, "miss")],
                transcript="call stella",
                duration=1.0,
            )
        )
        assert (
            render_ground_truth_word(rec).raw
            == "TRANSCRIPT: call (0.30) [MISS] stella (0.30)"
        )

    def test_word_level_substitution_rejected(self):
        rec = parse_record(rec_json(words=[("a", 0.0, 0.1, "sub")], duration=1.0))
        with pytest.raises(UnsupportedType):
            render_ground_truth_word(rec)

    def test_large_timestamps_round_trip(self):
        rec = parse_record(
            rec_json(words=[("word", 3999.90, 4000.25, "pro")], duration=4100.0)
        )
        gt = render_ground_truth_word(rec)
        assert gt.raw == "TRANSCRIPT: (3999.90) [PRO] word (4000.25)"
        parsed = parse_ground_truth(gt.raw, "word")
        assert parsed.items == gt.items and parsed.anomalies == ()

    def test_unicode_labels_round_trip(self):
        rec = parse_record(
            rec_json(
                words=[("café", 0.0, 0.2, "none"), ("naïve", 0.3, 0.5, "rep")],
                transcript="café naïve",
                duration=1.0,
            )
        )
        gt = render_ground_truth_word(rec)
        parsed = parse_ground_truth(gt.raw, "word")
        assert parsed.items == gt.items
        assert parse_record(rec.to_json_line()) == rec

    def test_rendering_is_deterministic(self, rng):
        rec = make_fluent_record(rng)
        assert render_ground_truth_word(rec).raw == render_ground_truth_word(rec).raw


class TestRenderPhoneme:
    def test_surface(self):
        rec = parse_record(
            rec_json(
                phonemes=[("EH", 0.10, 0.15, "pro")],
                transcript="Call Stella",
                duration=1.0,
            )
        )
        assert (
            render_ground_truth_phoneme(rec).raw
            == "TRANSCRIPT: Call Stella | EH (0.10,0.15) [PRO]"
        )

    def test_fluent_has_empty_list(self):
        rec = parse_record(
            rec_json(
                phonemes=[("K", 0.0, 0.1, "none")], transcript="Call Stella", duration=1.0
            )
        )
        assert render_ground_truth_phoneme(rec).raw == "TRANSCRIPT: Call Stella |"

    def test_out_of_order_units_rejected(self):
        rec = UtteranceRecord(
            "u",
            "x",
            (),
            (TimedUnit("EH", 0.5, 0.6, D.PROLONGATION), TimedUnit("K", 0.1, 0.2, D.NONE)),
            1.0,
        )
        with pytest.raises(InvariantViolation):
            render_ground_truth_phoneme(rec)

    def test_substitution_allowed_at_phoneme_level(self):
        rec = parse_record(
            rec_json(phonemes=[("AH", 0.1, 0.2, "sub")], transcript="x", duration=1.0)
        )
        assert "[SUB]" in render_ground_truth_phoneme(rec).raw


class TestParseGroundTruth:
    def test_unknown_token_dropped_with_anomaly(self):
        gt = parse_ground_truth("TRANSCRIPT: Call [QQQ] Stella", "word")
        assert gt.items == ("Call", "Stella")
        assert [a.kind for a in gt.anomalies] == [A_UNKNOWN_TOKEN]

    def test_empty_input(self):
        gt = parse_ground_truth("", "word")
        assert gt.items == ()
        assert [a.kind for a in gt.anomalies] == [A_MISSING_PREFIX]

    def test_orphan_timestamp(self):
        gt = parse_ground_truth("TRANSCRIPT: (0.50) hello", "word")
        assert gt.items == ("hello",)
        assert [a.kind for a in gt.anomalies] == [A_ORPHAN_TIMESTAMP]

    def test_bad_timestamp(self):
        gt = parse_ground_truth("TRANSCRIPT: (abc) hello", "word")
        assert gt.items == ("hello",)
        assert [a.kind for a in gt.anomalies] == [A_BAD_TIMESTAMP]

    def test_bare_token(self):
        gt = parse_ground_truth("TRANSCRIPT: Call [REP] Stella", "word")
        assert gt.items == ("Call", "Stella")
        assert [a.kind for a in gt.anomalies] == [A_BARE_TOKEN]

    def test_truncated_mark_recovers_words(self):
        gt = parse_ground_truth("TRANSCRIPT: (0.10) [INS] um", "word")
        assert gt.items == ("um",)
        assert any(a.kind == "truncated-mark" for a in gt.anomalies)

    def test_lenient_timestamp_precision(self):
        gt = parse_ground_truth("TRANSCRIPT: (0.1) [PRO] x (0.204) y", "word")
        assert gt.items == (DisfluencyMark("[PRO]", 0.10, 0.20, "x"), "y")

    def test_phoneme_missing_separator(self):
        gt = parse_ground_truth("TRANSCRIPT: Call Stella", "phoneme")
        assert gt.items == ("Call", "Stella")
        assert [a.kind for a in gt.anomalies] == [A_MISSING_SEPARATOR]

    def test_phoneme_unknown_token(self):
        gt = parse_ground_truth("TRANSCRIPT: a | EH (0.10,0.15) [ZZZ]", "phoneme")
        assert gt.items == ("a",)
        assert [a.kind for a in gt.anomalies] == [A_UNKNOWN_TOKEN]

    def test_never_raises_on_garbage(self, rng):
        alphabet = "ab ()[]|.0123TRANSCRIPT:"
        for _ in range(300):
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 60)))
            parse_ground_truth(text, rng.choice(["word", "phoneme"]))

    def test_parse_of_rendered_parse_is_fixed_point(self, rng):
        # re-rendering whatever the total parser salvaged must parse cleanly
        # and reproduce the same items (canonicalization property)
        from disfluency_kit.annotation import render_items

        alphabet = "ab ()[]|.0123TRANSCRIPT: [REP] [MISS] (0.10) (0.2,0.3)"
        for _ in range(500):
            level = rng.choice(["word", "phoneme"])
            text = " ".join(
                rng.choice(alphabet.split(" ") + ["x", "(1.00)", "[BLOCK]"])
                for _ in range(rng.randint(0, 20))
            )
            first = parse_ground_truth(text, level)
            rendered = render_items(first.items, level)
            second = parse_ground_truth(rendered, level)
            assert second.anomalies == ()
            assert second.items == first.items


def _random_disfluent_record(rng):
    """Record carrying marks of every word-allowed type at random positions."""
    from disfluency_kit.simulate import inject
    from conftest import random_spec

    types = rng.sample(
        [D.REPETITION, D.DELETION, D.BLOCK, D.PROLONGATION, D.INSERTION, D.SUBSTITUTION],
        k=rng.randint(1, 4),
    )
    rec = make_fluent_record(rng, n_words=rng.randint(4, 8))
    return inject(rec, random_spec(rng, types))


class TestRoundTrip:
    def test_word_marks_reconstruct_exactly(self, rng):
        for _ in range(200):
            rec = _random_disfluent_record(rng)
            gt = render_ground_truth_word(rec)
            parsed = parse_ground_truth(gt.raw, "word")
            assert parsed.anomalies == ()
            assert parsed.items == gt.items
            expect = [
                (u.dtype, u.start, u.end)
                for u in rec.words
                if u.dtype is not D.NONE
            ]
            got = [(m.dtype, m.start, m.end) for m in parsed.marks]
            assert got == expect

    def test_phoneme_round_trip(self, rng):
        for _ in range(200):
            rec = _random_disfluent_record(rng)
            gt = render_ground_truth_phoneme(rec)
            parsed = parse_ground_truth(gt.raw, "phoneme")
            assert parsed.anomalies == ()
            assert parsed.items == gt.items
            assert parsed.render() == gt.raw

    def test_timestamp_locality(self, rng):
        for _ in range(100):
            rec = _random_disfluent_record(rng)
            gt = render_ground_truth_word(rec)
            has_disfluent = any(u.dtype is not D.NONE for u in rec.words)
            assert bool(re.search(r"\(\d+\.\d{2}\)", gt.raw)) == has_disfluent

    def test_timestamps_monotonic(self, rng):
        for _ in range(100):
            rec = _random_disfluent_record(rng)
            gt = render_ground_truth_word(rec)
            times = [float(t) for t in re.findall(r"\((\d+\.\d{2})\)", gt.raw)]
            assert times == sorted(times)
