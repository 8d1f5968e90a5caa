"""Toolkit for timestamped disfluency annotation.

Data model and grammar for disfluency-annotated transcripts, a text-domain
disfluency simulator, builders for the textual prompt variants, decoder
layout/loss-mask arithmetic, and the evaluation metric suite (TER, EAcc,
CAcc, BL, TD).
"""

__version__ = "0.1.0"

from .annotation import (
    DISFLUENT_TYPES,
    Anomaly,
    DisfluencyMark,
    DisfluencyType,
    GroundTruthText,
    InvariantViolation,
    MalformedDocument,
    PHONEME,
    TimedUnit,
    UnsupportedType,
    UtteranceRecord,
    WORD,
    parse_ground_truth,
    parse_record,
    render_ground_truth_phoneme,
    render_ground_truth_word,
    render_items,
)
from .inputs import AlignmentSource, InputKind, MissingSource, build_input, parse_input
from .layout import DecoderLayout, FramingConfig, NegativeDuration, audio_token_count, build_layout
from .metrics import (
    EmptyCorpus,
    EvalPair,
    InapplicableLevel,
    MetricsReport,
    align_marks,
    bound_loss,
    classification_accuracy,
    edit_distance,
    evaluate_corpus,
    existence_accuracy,
    token_distance,
    token_error_rate,
)
from .phonemes import Lexicon, PhonemeInventory, UnknownSymbol, ipa_to_arpabet, phonemes_to_words
from .simulate import (
    CorpusStats,
    IncompatibleLevel,
    InjectionRule,
    InjectionSpec,
    InjectionTrace,
    TargetOutOfRange,
    corpus_stats,
    inject,
    inject_traced,
    recover_fluent_labels,
)
