"""Evaluation metrics over (reference, hypothesis) annotated-transcript pairs.

Implements token error rate (unit-cost edit distance over the annotated
token stream), utterance-level existence accuracy, per-mark classification
accuracy, boundary loss over 20 ms-quantized mark boundaries, and token
distance, plus per-type/per-level corpus aggregation.

Marks are paired by optimal assignment on |ref.start - hyp.start| restricted
to a 2 s window, so scoring is order-independent and does not depend on a
greedy pairing. Aggregates are duration-unweighted means over pairs; the
classification accuracy pools reference marks across the corpus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment

from .annotation import (
    DISFLUENT_TYPES,
    DisfluencyMark,
    DisfluencyType,
    GroundTruthText,
    LEVELS,
    WORD,
)

MATCH_WINDOW_S = 2.0
BL_GRID_MS = 20.0
BL_PENALTY_MS = 100.0

BL_QUANTIZE = "quantize"
BL_RASTER = "raster"


class EmptyCorpus(ValueError):
    """Metric requested over zero evaluation pairs."""


class InapplicableLevel(ValueError):
    """Metric is not defined at this annotation level."""


@dataclass(frozen=True)
class EvalPair:
    reference: GroundTruthText
    hypothesis: GroundTruthText
    level: str


# ---------------------------------------------------------------------------
# Token error rate
# ---------------------------------------------------------------------------

@njit(cache=True)
def _lev_kernel(a, b):  # pragma: no cover - exercised via edit_distance
    lb = b.shape[0]
    prev = np.empty(lb + 1, dtype=np.int64)
    cur = np.empty(lb + 1, dtype=np.int64)
    for j in range(lb + 1):
        prev[j] = j
    for i in range(1, a.shape[0] + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, lb + 1):
            c = 0 if ai == b[j - 1] else 1
            best = prev[j - 1] + c
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        for j in range(lb + 1):
            prev[j] = cur[j]
    return prev[lb]


def edit_distance(ref, hyp) -> int:
    """Unit-cost Levenshtein distance between two token sequences."""
    ref = list(ref)
    hyp = list(hyp)
    if not ref:
        return len(hyp)
    if not hyp:
        return len(ref)
    codes: dict = {}
    a = np.empty(len(ref), dtype=np.int64)
    for i, tok in enumerate(ref):
        a[i] = codes.setdefault(tok, len(codes))
    b = np.empty(len(hyp), dtype=np.int64)
    for i, tok in enumerate(hyp):
        b[i] = codes.setdefault(tok, len(codes))
    return int(_lev_kernel(a, b))


def token_error_rate(ref, hyp) -> float:
    """Edit distance divided by reference length.

    Marks count as single tokens (timestamp values excluded). An empty
    reference scores insertions against a length of 1.
    """
    return edit_distance(ref, hyp) / max(1, len(list(ref)))


# ---------------------------------------------------------------------------
# Mark alignment
# ---------------------------------------------------------------------------

def align_marks(
    ref_marks, hyp_marks, window_s: float = MATCH_WINDOW_S
) -> list[tuple[int, int]]:
    """One-to-one matching minimizing total |ref.start - hyp.start|.

    Optimal assignment over the bipartite graph restricted to pairs whose
    start times are within the window; unmatched marks stay unmatched. A tiny
    index bias keeps ties deterministic (identical lists match identically).
    """
    if not ref_marks or not hyp_marks:
        return []
    rs = np.array([m.start for m in ref_marks], dtype=float)
    hs = np.array([m.start for m in hyp_marks], dtype=float)
    raw = np.abs(rs[:, None] - hs[None, :])
    ii = np.arange(len(ref_marks))[:, None]
    jj = np.arange(len(hyp_marks))[None, :]
    cost = np.where(raw <= window_s, raw + 1e-7 * np.abs(ii - jj), 1e9)
    rows, cols = linear_sum_assignment(cost)
    return [(int(i), int(j)) for i, j in zip(rows, cols) if raw[i, j] <= window_s]


# ---------------------------------------------------------------------------
# Existence / classification accuracy
# ---------------------------------------------------------------------------

def _has_type(gt: GroundTruthText, dtype: DisfluencyType) -> bool:
    return any(m.dtype is dtype for m in gt.marks)


def existence_accuracy(pairs, dtype: DisfluencyType) -> float:
    """Percentage of pairs agreeing on whether any mark of the type exists."""
    if not pairs:
        raise EmptyCorpus("existence accuracy over zero pairs")
    agree = sum(
        1
        for p in pairs
        if _has_type(p.reference, dtype) == _has_type(p.hypothesis, dtype)
    )
    return 100.0 * agree / len(pairs)


def classification_accuracy(pairs, dtype: DisfluencyType) -> float | None:
    """Over reference marks of the type, the fraction aligned to a hypothesis
    mark of the same type (percent). Unmatched reference marks count as
    misclassified; absent (None) when the references carry no such mark."""
    if not pairs:
        raise EmptyCorpus("classification accuracy over zero pairs")
    total = 0
    correct = 0
    for p in pairs:
        rmarks = p.reference.marks
        hmarks = p.hypothesis.marks
        matching = dict(align_marks(rmarks, hmarks))
        for i, m in enumerate(rmarks):
            if m.dtype is not dtype:
                continue
            total += 1
            j = matching.get(i)
            if j is not None and hmarks[j].dtype is dtype:
                correct += 1
    if total == 0:
        return None
    return 100.0 * correct / total


# ---------------------------------------------------------------------------
# Bound loss
# ---------------------------------------------------------------------------

def _q20_ms(seconds: float) -> float:
    return round(seconds * 1000.0 / BL_GRID_MS) * BL_GRID_MS


def _raster_cells(start: float, end: float) -> frozenset:
    s_ms, e_ms = start * 1000.0, end * 1000.0
    if e_ms <= s_ms:
        return frozenset()
    first = math.floor(s_ms / BL_GRID_MS)
    last = math.ceil(e_ms / BL_GRID_MS)
    return frozenset(range(first, last))


def _bl_terms(
    ref_marks,
    hyp_marks,
    matching,
    penalty_ms: float,
    mode: str,
    dtype: DisfluencyType | None = None,
) -> tuple[list[float], int]:
    """Squared boundary offsets (ms^2) for matched pairs plus penalties for
    unmatched reference marks, optionally restricted to one reference type."""
    sq: list[float] = []
    matched = set()
    for i, j in matching:
        r, h = ref_marks[i], hyp_marks[j]
        if dtype is not None and r.dtype is not dtype:
            continue
        matched.add(i)
        if mode == BL_QUANTIZE:
            sq.append((_q20_ms(r.start) - _q20_ms(h.start)) ** 2)
            sq.append((_q20_ms(r.end) - _q20_ms(h.end)) ** 2)
        else:
            diff = len(_raster_cells(r.start, r.end) ^ _raster_cells(h.start, h.end))
            sq.append((BL_GRID_MS * diff) ** 2)
    for i, r in enumerate(ref_marks):
        if i in matched or (dtype is not None and r.dtype is not dtype):
            continue
        if mode == BL_QUANTIZE:
            sq.extend((penalty_ms**2, penalty_ms**2))
        else:
            sq.append(penalty_ms**2)
    return sq, len(sq)


def bound_loss(
    ref_marks,
    hyp_marks,
    matching=None,
    penalty_ms: float = BL_PENALTY_MS,
    mode: str = BL_QUANTIZE,
) -> float | None:
    """Root-mean-squared boundary offset in ms after 20 ms grid quantization.

    Each matched pair contributes its start and end offsets; each unmatched
    reference mark contributes the penalty per boundary. Absent (None) when
    there are no reference marks.
    """
    if mode not in (BL_QUANTIZE, BL_RASTER):
        raise ValueError(f"unknown bound-loss mode {mode!r}")
    if not ref_marks:
        return None
    if matching is None:
        matching = align_marks(ref_marks, hyp_marks)
    sq, n = _bl_terms(ref_marks, hyp_marks, matching, penalty_ms, mode)
    if n == 0:
        return None
    return math.sqrt(math.fsum(sq) / n)


# ---------------------------------------------------------------------------
# Token distance
# ---------------------------------------------------------------------------

def _mark_stream_positions(gt: GroundTruthText) -> list[int]:
    return [i for i, it in enumerate(gt.items) if isinstance(it, DisfluencyMark)]


def token_distance(
    pair: EvalPair,
    dtype: DisfluencyType | None = None,
    matching=None,
) -> float | None:
    """Mean token-stream displacement of matched marks, divided by the
    reference token count, reported in e-3 units. Word level only."""
    if pair.level != WORD:
        raise InapplicableLevel("token distance is defined at the word level only")
    ref, hyp = pair.reference, pair.hypothesis
    rmarks, hmarks = ref.marks, hyp.marks
    if matching is None:
        matching = align_marks(rmarks, hmarks)
    rpos = _mark_stream_positions(ref)
    hpos = _mark_stream_positions(hyp)
    disp = [
        abs(rpos[i] - hpos[j])
        for i, j in matching
        if dtype is None or rmarks[i].dtype is dtype
    ]
    if not disp:
        return None
    return math.fsum(disp) / len(disp) / max(1, len(ref.items)) * 1000.0


# ---------------------------------------------------------------------------
# Corpus evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CellMetrics:
    pairs: int
    ter: float | None
    eacc: float | None
    cacc: float | None
    bl_ms: float | None
    bl_mse: float | None
    td: float | None

    def to_dict(self) -> dict:
        return {
            "pairs": self.pairs,
            "ter": self.ter,
            "eacc": self.eacc,
            "cacc": self.cacc,
            "bl_ms": self.bl_ms,
            "bl_mse": self.bl_mse,
            "td": self.td,
        }


@dataclass
class MetricsReport:
    cells: dict = field(default_factory=dict)       # (level, DisfluencyType) -> CellMetrics
    aggregates: dict = field(default_factory=dict)  # level -> CellMetrics
    pair_counts: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict = {"pairs": dict(self.pair_counts), "cells": {}, "aggregate": {}}
        for (level, dtype), cell in self.cells.items():
            out["cells"].setdefault(level, {})[dtype.display] = cell.to_dict()
        for level, cell in self.aggregates.items():
            out["aggregate"][level] = cell.to_dict()
        return out

    def format_table(self) -> str:
        def f(v, spec):
            return "-" if v is None else format(v, spec)

        lines = [
            f"{'Level':<9}{'Type':<14}{'Pairs':>6}{'TER':>8}{'EAcc':>8}"
            f"{'CAcc':>8}{'BL(ms)':>9}{'TD(e-3)':>9}"
        ]
        for level in LEVELS:
            for dtype in DISFLUENT_TYPES:
                cell = self.cells.get((level, dtype))
                if cell is None:
                    continue
                lines.append(
                    f"{level:<9}{dtype.display:<14}{cell.pairs:>6d}"
                    f"{f(cell.ter, '.3f'):>8}{f(cell.eacc, '.2f'):>8}"
                    f"{f(cell.cacc, '.2f'):>8}{f(cell.bl_ms, '.2f'):>9}"
                    f"{f(cell.td, '.2f'):>9}"
                )
            agg = self.aggregates.get(level)
            if agg is not None:
                lines.append(
                    f"{level:<9}{'all':<14}{agg.pairs:>6d}"
                    f"{f(agg.ter, '.3f'):>8}{f(agg.eacc, '.2f'):>8}"
                    f"{f(agg.cacc, '.2f'):>8}{f(agg.bl_ms, '.2f'):>9}"
                    f"{f(agg.td, '.2f'):>9}"
                )
        return "\n".join(lines)


def _mean(values) -> float | None:
    values = [v for v in values if v is not None]
    if not values:
        return None
    return math.fsum(values) / len(values)


@dataclass
class _PairCtx:
    pair: EvalPair
    ter: float
    matching: list


def evaluate_corpus(
    pairs,
    penalty_ms: float = BL_PENALTY_MS,
    window_s: float = MATCH_WINDOW_S,
    bl_mode: str = BL_QUANTIZE,
) -> MetricsReport:
    """Compute every metric per (level, type) cell plus per-level aggregates.

    A cell is populated when at least one reference at that level carries the
    type; its TER/BL/TD average over the pairs whose reference contains the
    type, existence accuracy covers all pairs of the level, and
    classification accuracy pools reference marks across the corpus.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyCorpus("no evaluation pairs")
    report = MetricsReport()
    by_level: dict[str, list[_PairCtx]] = {}
    for p in pairs:
        ctx = _PairCtx(
            pair=p,
            ter=token_error_rate(p.reference.tokens(), p.hypothesis.tokens()),
            matching=align_marks(p.reference.marks, p.hypothesis.marks, window_s),
        )
        by_level.setdefault(p.level, []).append(ctx)

    def pooled_cacc(ctxs, dtype):
        total = correct = 0
        for c in ctxs:
            rmarks, hmarks = c.pair.reference.marks, c.pair.hypothesis.marks
            matched = dict(c.matching)
            for i, m in enumerate(rmarks):
                if dtype is not None and m.dtype is not dtype:
                    continue
                total += 1
                j = matched.get(i)
                if j is not None and hmarks[j].dtype is m.dtype:
                    correct += 1
        return None if total == 0 else 100.0 * correct / total

    def pair_bl(c, dtype, squared):
        rmarks, hmarks = c.pair.reference.marks, c.pair.hypothesis.marks
        if dtype is not None and not any(m.dtype is dtype for m in rmarks):
            return None
        if not rmarks:
            return None
        sq, n = _bl_terms(rmarks, hmarks, c.matching, penalty_ms, bl_mode, dtype)
        if n == 0:
            return None
        mse = math.fsum(sq) / n
        return mse if squared else math.sqrt(mse)

    def pair_td(c, dtype):
        if c.pair.level != WORD:
            return None
        return token_distance(c.pair, dtype, c.matching)

    def build_cell(ctxs, level, dtype) -> CellMetrics:
        if dtype is None:
            subset = ctxs
            eacc_vals = [
                100.0
                * (bool(c.pair.reference.marks) == bool(c.pair.hypothesis.marks))
                for c in ctxs
            ]
            eacc = _mean(eacc_vals)
        else:
            subset = [c for c in ctxs if _has_type(c.pair.reference, dtype)]
            eacc = existence_accuracy([c.pair for c in ctxs], dtype)
        return CellMetrics(
            pairs=len(subset),
            ter=_mean([c.ter for c in subset]),
            eacc=eacc,
            cacc=pooled_cacc(ctxs, dtype),
            bl_ms=_mean([pair_bl(c, dtype, squared=False) for c in subset]),
            bl_mse=_mean([pair_bl(c, dtype, squared=True) for c in subset]),
            td=_mean([pair_td(c, dtype) for c in subset]),
        )

    for level, ctxs in by_level.items():
        report.pair_counts[level] = len(ctxs)
        present = [
            dtype
            for dtype in DISFLUENT_TYPES
            if any(_has_type(c.pair.reference, dtype) for c in ctxs)
        ]
        for dtype in present:
            report.cells[(level, dtype)] = build_cell(ctxs, level, dtype)
        report.aggregates[level] = build_cell(ctxs, level, None)
    return report
