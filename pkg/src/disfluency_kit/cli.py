"""Command-line interface.

Subcommands: ``simulate``, ``build-inputs``, ``render-gt``, ``evaluate``,
``stats``, ``mask``, ``corrupt``. Corpora stream line-by-line; per-utterance
work is parallelizable with ``--workers`` and output order never depends on
the worker count. Every file artifact gets a ``<path>.manifest.json`` sidecar
with input/output content digests.

Exit codes: 0 success, 2 usage problems (bad arguments, malformed spec,
missing paths), 3 data problems (the first offending record is reported).
"""

from __future__ import annotations

import argparse
import functools
import json
import random
import string
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .annotation import (
    DisfluencyMark,
    GroundTruthText,
    InvariantViolation,
    LEVELS,
    MalformedDocument,
    PHONEME,
    TimedUnit,
    UnsupportedType,
    UtteranceRecord,
    WORD,
    parse_ground_truth,
    parse_record,
    quantize,
    render_ground_truth_phoneme,
    render_ground_truth_word,
    render_items,
)
from .corpusio import (
    RunManifest,
    Stopwatch,
    iter_records,
    map_ordered,
    read_lines,
    write_lines,
)
from .inputs import (
    AlignmentSource,
    BASIC_KINDS,
    InputKind,
    MissingSource,
    RECOGNIZER,
    build_input,
    source_from_ctc,
    source_from_textgrid,
)
from .layout import FramingConfig, build_layout
from .metrics import EmptyCorpus, EvalPair, evaluate_corpus
from .phonemes import Lexicon, STRATEGIES, UnknownSymbol, ipa_to_arpabet, phonemes_to_words
from .simulate import (
    InjectionSpec,
    TargetOutOfRange,
    corpus_stats,
    inject,
    stable_hash,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3

_DATA_ERRORS = (
    MalformedDocument,
    InvariantViolation,
    UnsupportedType,
    TargetOutOfRange,
    UnknownSymbol,
)


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


def _require_file(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"input path does not exist: {p}")
    return p


def _render_gt(rec: UtteranceRecord, level: str) -> GroundTruthText:
    if level == WORD:
        return render_ground_truth_word(rec)
    return render_ground_truth_phoneme(rec)


def _write_manifest(args, manifest: RunManifest, primary_out) -> None:
    if getattr(args, "no_manifest", False):
        return
    path = getattr(args, "manifest", None) or f"{primary_out}.manifest.json"
    manifest.write(path)


def _new_manifest(argv_echo, seed=None) -> RunManifest:
    return RunManifest(command=argv_echo, tool_version=__version__, seed=seed)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_line(line: str, spec: InjectionSpec, close_gaps: bool) -> str:
    rec = parse_record(line)
    return inject(rec, spec, close_gaps).to_json_line()


def cmd_simulate(args) -> int:
    try:
        spec = InjectionSpec.from_file(_require_file(args.spec))
    except (MalformedDocument, ValueError) as exc:
        raise UsageError(f"bad injection spec: {exc}") from None
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    in_path = _require_file(args.input)
    watch = Stopwatch()
    manifest = _new_manifest(args.argv_echo, spec.seed)
    manifest.add_input(in_path)
    fn = functools.partial(_simulate_line, spec=spec, close_gaps=args.close_gaps)
    try:
        count = write_lines(args.out, map_ordered(fn, read_lines(in_path), args.workers))
    except _DATA_ERRORS as exc:
        raise DataError(str(exc)) from None
    manifest.add_output(args.out)
    manifest.wall_time_s = watch.elapsed
    _write_manifest(args, manifest, args.out)
    print(f"simulated {count} utterances -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# render-gt
# ---------------------------------------------------------------------------

def _render_line(line: str, level: str) -> str:
    return _render_gt(parse_record(line), level).raw


def cmd_render_gt(args) -> int:
    in_path = _require_file(args.input)
    watch = Stopwatch()
    manifest = _new_manifest(args.argv_echo)
    manifest.add_input(in_path)
    fn = functools.partial(_render_line, level=args.level)
    try:
        count = write_lines(args.out, map_ordered(fn, read_lines(in_path), args.workers))
    except _DATA_ERRORS as exc:
        raise DataError(str(exc)) from None
    manifest.add_output(args.out)
    manifest.wall_time_s = watch.elapsed
    _write_manifest(args, manifest, args.out)
    print(f"rendered {count} ground-truth lines -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# corrupt
# ---------------------------------------------------------------------------

CORRUPT_OPS = ("sub", "del", "shift")


def _word_positions(items) -> list[int]:
    return [i for i, it in enumerate(items) if isinstance(it, str)]


def _mark_positions(items) -> list[int]:
    return [i for i, it in enumerate(items) if isinstance(it, DisfluencyMark)]


def corrupt_items(items, n: int, rng: random.Random, ops=CORRUPT_OPS) -> list:
    """Apply n random token substitutions/deletions/mark-shifts.

    Substitution targets are drawn without replacement and the replacement
    appends "~<letter>"; for corpora whose tokens are "~"-free, n
    substitutions raise the edit distance by exactly n.
    """
    items = list(items)
    subbed: set[int] = set()
    for _ in range(n):
        available = []
        for op in ops:
            if op == "sub" and [p for p in _word_positions(items) if p not in subbed]:
                available.append(op)
            elif op == "del" and _word_positions(items):
                available.append(op)
            elif op == "shift" and _mark_positions(items):
                available.append(op)
        if not available:
            break
        op = rng.choice(available)
        if op == "sub":
            pos = rng.choice([p for p in _word_positions(items) if p not in subbed])
            items[pos] = f"{items[pos]}~{rng.choice(string.ascii_lowercase)}"
            subbed.add(pos)
        elif op == "del":
            pos = rng.choice(_word_positions(items))
            del items[pos]
            subbed = {p - 1 if p > pos else p for p in subbed if p != pos}
        else:
            pos = rng.choice(_mark_positions(items))
            m = items[pos]
            delta = rng.choice([-1, 1]) * rng.randint(1, 10) * 0.02
            start = max(0.0, round(m.start + delta, 2))
            end = max(start, round(m.end + delta, 2))
            items[pos] = replace(m, start=start, end=end)
    return items


def _corrupt_line(line: str, level: str, n: int, seed: int, ops) -> str:
    rec = parse_record(line)
    gt = _render_gt(rec, level)
    rng = random.Random(seed ^ stable_hash(rec.id))
    return render_items(corrupt_items(gt.items, n, rng, ops), level)


def cmd_corrupt(args) -> int:
    if args.n < 0:
        raise UsageError("--n must be >= 0")
    ops = tuple(args.ops.split(","))
    for op in ops:
        if op not in CORRUPT_OPS:
            raise UsageError(f"unknown corruption op {op!r} (choose from {CORRUPT_OPS})")
    in_path = _require_file(args.input)
    watch = Stopwatch()
    seed = args.seed if args.seed is not None else 0
    manifest = _new_manifest(args.argv_echo, seed)
    manifest.add_input(in_path)
    fn = functools.partial(_corrupt_line, level=args.level, n=args.n, seed=seed, ops=ops)
    try:
        count = write_lines(args.out, map_ordered(fn, read_lines(in_path), args.workers))
    except _DATA_ERRORS as exc:
        raise DataError(str(exc)) from None
    manifest.add_output(args.out)
    manifest.wall_time_s = watch.elapsed
    _write_manifest(args, manifest, args.out)
    print(f"corrupted {count} hypotheses (n={args.n}) -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def cmd_evaluate(args) -> int:
    ref_path = _require_file(args.ref)
    hyp_path = _require_file(args.hyp)
    watch = Stopwatch()
    try:
        records = list(iter_records(ref_path))
    except _DATA_ERRORS as exc:
        raise DataError(str(exc)) from None
    hyp_lines = Path(hyp_path).read_text(encoding="utf-8").splitlines()
    if len(hyp_lines) != len(records):
        raise DataError(
            f"{hyp_path}: {len(hyp_lines)} hypothesis lines for {len(records)} references"
        )
    pairs = []
    for rec, line in zip(records, hyp_lines):
        try:
            ref_gt = _render_gt(rec, args.level)
        except UnsupportedType as exc:
            raise DataError(f"record {rec.id!r}: {exc}") from None
        pairs.append(EvalPair(ref_gt, parse_ground_truth(line, args.level), args.level))
    try:
        report = evaluate_corpus(
            pairs, penalty_ms=args.penalty_ms, window_s=args.window_s, bl_mode=args.bl_mode
        )
    except EmptyCorpus as exc:
        raise DataError(str(exc)) from None
    print(report.format_table())
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        manifest = _new_manifest(args.argv_echo)
        manifest.add_input(ref_path)
        manifest.add_input(hyp_path)
        manifest.add_output(args.report)
        manifest.wall_time_s = watch.elapsed
        _write_manifest(args, manifest, args.report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# stats
# ---------------------------------------------------------------------------

def cmd_stats(args) -> int:
    in_path = _require_file(args.input)
    watch = Stopwatch()
    try:
        stats = corpus_stats(iter_records(in_path))
    except _DATA_ERRORS as exc:
        raise DataError(str(exc)) from None
    print(stats.format_table())
    if args.report:
        Path(args.report).write_text(
            json.dumps(stats.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        manifest = _new_manifest(args.argv_echo)
        manifest.add_input(in_path)
        manifest.add_output(args.report)
        manifest.wall_time_s = watch.elapsed
        _write_manifest(args, manifest, args.report)
    return EXIT_OK


# ---------------------------------------------------------------------------
# mask
# ---------------------------------------------------------------------------

def cmd_mask(args) -> int:
    if args.textual_tokens < 0 or args.transcript_tokens < 0:
        raise UsageError("token counts must be >= 0")
    if args.duration < 0:
        raise UsageError("--duration must be >= 0")
    layout = build_layout(
        args.textual_tokens,
        args.duration,
        args.transcript_tokens,
        FramingConfig(),
        audio_first=args.audio_first,
    )
    print(json.dumps(layout.to_dict(), indent=2))
    return EXIT_OK


# ---------------------------------------------------------------------------
# build-inputs
# ---------------------------------------------------------------------------

def _load_jsonl_docs(path) -> dict:
    docs = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}:{lineno}: invalid JSON: {exc}") from None
            if "id" not in doc:
                raise DataError(f"{path}:{lineno}: document has no 'id'")
            docs[doc["id"]] = doc
    return docs


def _doc_to_source(doc, level) -> AlignmentSource:
    if "frames" in doc:
        return source_from_ctc(doc, level)
    units = doc.get("units")
    if not isinstance(units, list):
        raise DataError(f"document for {doc.get('id')!r} has neither 'frames' nor 'units'")
    return AlignmentSource(
        doc.get("origin", RECOGNIZER),
        level,
        tuple(TimedUnit(u[0], quantize(u[1]), quantize(u[2])) for u in units),
    )


def _source_provider(path_arg, level):
    """Return id -> AlignmentSource for a TextGrid dir, CTC-JSON dir, or JSONL map."""
    p = Path(path_arg)
    if not p.exists():
        raise UsageError(f"input path does not exist: {p}")
    if p.is_dir():
        def from_dir(utt_id: str) -> AlignmentSource:
            tg = p / f"{utt_id}.TextGrid"
            if tg.exists():
                return source_from_textgrid(tg, level)
            js = p / f"{utt_id}.json"
            if js.exists():
                return _doc_to_source(json.loads(js.read_text(encoding="utf-8")), level)
            raise DataError(f"no source file for utterance {utt_id!r} in {p}")

        return from_dir
    docs = _load_jsonl_docs(p)

    def from_map(utt_id: str) -> AlignmentSource:
        if utt_id not in docs:
            raise DataError(f"no source document for utterance {utt_id!r} in {p}")
        return _doc_to_source(docs[utt_id], level)

    return from_map


def cmd_build_inputs(args) -> int:
    kind = InputKind(args.kind)
    in_path = _require_file(args.rec)
    requested = BASIC_KINDS if kind is InputKind.ALL else (kind,)
    needed = [k for k in requested if k is not InputKind.CLEAN_TRANSCRIPT]

    providers = {}
    if args.aligned_words:
        providers[InputKind.ALIGNED_WORDS] = _source_provider(args.aligned_words, WORD)
    if args.aligned_phonemes:
        providers[InputKind.ALIGNED_PHONEMES] = _source_provider(args.aligned_phonemes, PHONEME)
    if args.wav2vec_phonemes:
        providers[InputKind.WAV2VEC_PHONEMES] = _source_provider(args.wav2vec_phonemes, PHONEME)
    if args.wav2vec_words:
        providers[InputKind.WAV2VEC_WORDS] = _source_provider(args.wav2vec_words, WORD)
    lexicon = Lexicon.from_file(_require_file(args.lexicon)) if args.lexicon else None

    for k in needed:
        if k in providers:
            continue
        if k is InputKind.WAV2VEC_WORDS and InputKind.WAV2VEC_PHONEMES in providers and lexicon:
            continue  # derivable from recognizer phonemes
        raise UsageError(f"kind {k.value!r} needs a source (see --{k.value})")

    watch = Stopwatch()
    manifest = _new_manifest(args.argv_echo)
    manifest.add_input(in_path)

    def sources_for(rec: UtteranceRecord) -> dict:
        sources = {}
        for k in needed:
            if k in providers:
                src = providers[k](rec.id)
                if k is InputKind.WAV2VEC_PHONEMES and args.ipa_to_arpabet:
                    src = AlignmentSource(src.origin, src.level, tuple(ipa_to_arpabet(src.units)))
                sources[k] = src
        if InputKind.WAV2VEC_WORDS in needed and InputKind.WAV2VEC_WORDS not in sources:
            seg = phonemes_to_words(
                sources[InputKind.WAV2VEC_PHONEMES].units,
                lexicon,
                hint=rec.clean_transcript,
                strategy=args.segmentation,
            )
            sources[InputKind.WAV2VEC_WORDS] = AlignmentSource(RECOGNIZER, WORD, seg.words)
        return sources

    def lines():
        for rec in iter_records(in_path):
            text = build_input(rec, sources_for(rec), kind)
            yield json.dumps({"id": rec.id, "kind": kind.value, "text": text}, ensure_ascii=False)

    try:
        count = write_lines(args.out, lines())
    except _DATA_ERRORS as exc:
        raise DataError(str(exc)) from None
    except MissingSource as exc:
        raise UsageError(str(exc)) from None
    manifest.add_output(args.out)
    manifest.wall_time_s = watch.elapsed
    _write_manifest(args, manifest, args.out)
    print(f"built {count} prompts -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfkit",
        description="Timestamped disfluency annotation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=int, default=1, help="parallel workers (default 1)")
    common.add_argument("--seed", type=int, default=None, help="override the random seed")
    common.add_argument("--manifest", default=None, help="manifest path (default <out>.manifest.json)")
    common.add_argument("--no-manifest", action="store_true", help="skip manifest sidecars")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="inject disfluencies into a fluent corpus")
    p.add_argument("--spec", required=True, help="injection spec JSON")
    p.add_argument("--in", dest="input", required=True, help="fluent corpus JSONL")
    p.add_argument("--out", required=True, help="output corpus JSONL")
    p.add_argument("--close-gaps", action="store_true", help="close the gap left by deletions")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("render-gt", parents=[common], help="render ground-truth transcript lines")
    p.add_argument("--in", dest="input", required=True, help="corpus JSONL")
    p.add_argument("--level", choices=LEVELS, default=WORD)
    p.add_argument("--out", required=True, help="output text file, one line per utterance")
    p.set_defaults(func=cmd_render_gt)

    p = sub.add_parser("corrupt", parents=[common], help="derive corrupted hypotheses for metric validation")
    p.add_argument("--in", dest="input", required=True, help="corpus JSONL")
    p.add_argument("--level", choices=LEVELS, default=WORD)
    p.add_argument("--n", type=int, required=True, help="corruption operations per utterance")
    p.add_argument("--ops", default=",".join(CORRUPT_OPS), help="comma list of sub,del,shift")
    p.add_argument("--out", required=True, help="output hypothesis text file")
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("evaluate", parents=[common], help="score hypotheses against a reference corpus")
    p.add_argument("--ref", required=True, help="reference corpus JSONL")
    p.add_argument("--hyp", required=True, help="hypothesis text, one raw line per utterance")
    p.add_argument("--level", choices=LEVELS, default=WORD)
    p.add_argument("--report", default=None, help="write the metrics report JSON here")
    p.add_argument("--penalty-ms", type=float, default=100.0, help="BL penalty per unmatched boundary")
    p.add_argument("--window-s", type=float, default=2.0, help="mark matching window in seconds")
    p.add_argument("--bl-mode", choices=("quantize", "raster"), default="quantize")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", parents=[common], help="per-type duration/count table for a corpus")
    p.add_argument("--in", dest="input", required=True, help="corpus JSONL")
    p.add_argument("--report", default=None, help="write the stats JSON here")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("mask", parents=[common], help="print the decoder layout and loss mask")
    p.add_argument("--textual-tokens", type=int, required=True)
    p.add_argument("--duration", type=float, required=True, help="audio duration in seconds")
    p.add_argument("--transcript-tokens", type=int, required=True)
    p.add_argument("--audio-first", action="store_true", help="place audio before textual tokens")
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("build-inputs", parents=[common], help="build textual prompt variants")
    p.add_argument("--rec", required=True, help="corpus JSONL")
    p.add_argument("--kind", choices=[k.value for k in InputKind], required=True)
    p.add_argument("--out", required=True, help="output prompts JSONL")
    p.add_argument("--aligned-words", default=None, help="TextGrid dir or units JSONL")
    p.add_argument("--aligned-phonemes", default=None, help="TextGrid dir or units JSONL")
    p.add_argument("--wav2vec-phonemes", default=None, help="CTC JSON dir or JSONL")
    p.add_argument("--wav2vec-words", default=None, help="units JSONL (else derived via --lexicon)")
    p.add_argument("--lexicon", default=None, help="CMU-format pronunciation dictionary")
    p.add_argument("--segmentation", choices=STRATEGIES, default="greedy")
    p.add_argument("--ipa-to-arpabet", action="store_true", help="convert recognizer IPA symbols")
    p.set_defaults(func=cmd_build_inputs)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv_echo = ["dfkit"] + argv
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
