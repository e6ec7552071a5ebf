"""Mask-filtered scoring for the three punctuation classes.

Only positions with position_mask = 1 are scored. O generates no counts
of its own; it shows up solely as false positives or false negatives on
COMMA, PERIOD, and QUESTION. Micro F1 pools tp/fp/fn across the three
classes before computing F1; Mean F1 is the unweighted arithmetic mean of
the three per-class F1 values, computed from unrounded inputs and rounded
once for display (one decimal, half away from zero).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

import numpy as np

from .corpus import PunctLabel
from .errors import LengthMismatch

PUNCT_CLASSES: tuple[PunctLabel, ...] = (
    PunctLabel.COMMA,
    PunctLabel.PERIOD,
    PunctLabel.QUESTION,
)


@dataclass(frozen=True)
class ConfusionCounts:
    """tp/fp/fn per punctuation class, plus masked-in totals for debugging."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    correct: int = 0
    total: int = 0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.correct + other.correct,
            self.total + other.total,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConfusionCounts):
            return NotImplemented
        return (np.array_equal(self.tp, other.tp)
                and np.array_equal(self.fp, other.fp)
                and np.array_equal(self.fn, other.fn)
                and self.correct == other.correct
                and self.total == other.total)


def zero_counts() -> ConfusionCounts:
    z = np.zeros(len(PUNCT_CLASSES), dtype=np.int64)
    return ConfusionCounts(z.copy(), z.copy(), z.copy())


def confusion_counts(
    pred: Sequence[int], gold: Sequence[int], mask: Sequence[int]
) -> ConfusionCounts:
    """Tally tp/fp/fn over masked-in positions only."""
    p = np.asarray(pred)
    g = np.asarray(gold)
    m = np.asarray(mask)
    if g.size != p.size:
        raise LengthMismatch("gold", p.size, g.size)
    if m.size != p.size:
        raise LengthMismatch("mask", p.size, m.size)
    sel = m != 0
    p = p[sel]
    g = g[sel]
    tp = np.zeros(len(PUNCT_CLASSES), dtype=np.int64)
    fp = np.zeros(len(PUNCT_CLASSES), dtype=np.int64)
    fn = np.zeros(len(PUNCT_CLASSES), dtype=np.int64)
    for ci, c in enumerate(PUNCT_CLASSES):
        is_p = p == int(c)
        is_g = g == int(c)
        tp[ci] = np.count_nonzero(is_p & is_g)
        fp[ci] = np.count_nonzero(is_p & ~is_g)
        fn[ci] = np.count_nonzero(is_g & ~is_p)
    return ConfusionCounts(
        tp, fp, fn,
        correct=int(np.count_nonzero(p == g)),
        total=int(p.size),
    )


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision, recall, F1 as percentages; 0 where a denominator is 0."""
    precision = 100.0 * tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = 100.0 * tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return precision, recall, f1


def micro_prf(counts: ConfusionCounts) -> tuple[float, float, float]:
    """P/R/F1 of tp/fp/fn pooled across the three punctuation classes."""
    return prf(int(counts.tp.sum()), int(counts.fp.sum()), int(counts.fn.sum()))


def micro_f1(counts: ConfusionCounts) -> float:
    return micro_prf(counts)[2]


def mean_f1(f1_comma: float, f1_period: float, f1_question: float) -> float:
    """Unweighted mean of the three per-class F1 values.

    fsum keeps the result independent of argument order.
    """
    return math.fsum((f1_comma, f1_period, f1_question)) / 3.0


@dataclass(frozen=True)
class EvalReport:
    """Per-class and overall percentages, all unrounded."""

    comma: tuple[float, float, float]
    period: tuple[float, float, float]
    question: tuple[float, float, float]
    overall_p: float
    overall_r: float
    micro_f1: float
    mean_f1: float
    accuracy: float = 0.0


def report_from_counts(counts: ConfusionCounts) -> EvalReport:
    per_class = [prf(int(t), int(f), int(n))
                 for t, f, n in zip(counts.tp, counts.fp, counts.fn)]
    op, orc, of1 = micro_prf(counts)
    return EvalReport(
        comma=per_class[0],
        period=per_class[1],
        question=per_class[2],
        overall_p=op,
        overall_r=orc,
        micro_f1=of1,
        mean_f1=mean_f1(per_class[0][2], per_class[1][2], per_class[2][2]),
        accuracy=100.0 * counts.correct / counts.total if counts.total else 0.0,
    )


def fmt1(x: float) -> str:
    """One decimal, ties rounded away from zero (88.05 -> '88.1')."""
    return str(
        Decimal(repr(float(x))).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    )


def render_report(report: EvalReport) -> str:
    """Tab-separated table with one-decimal percentages."""
    rows = [
        ("class", "P", "R", "F1"),
        ("COMMA", *map(fmt1, report.comma)),
        ("PERIOD", *map(fmt1, report.period)),
        ("QUESTION", *map(fmt1, report.question)),
        ("OVERALL", fmt1(report.overall_p), fmt1(report.overall_r),
         fmt1(report.micro_f1)),
        ("MEAN_F1", "", "", fmt1(report.mean_f1)),
    ]
    return "\n".join("\t".join(r) for r in rows) + "\n"


def render_report_kv(report: EvalReport) -> str:
    """Machine-readable key=value lines with unrounded values."""
    items = [
        ("comma_p", report.comma[0]), ("comma_r", report.comma[1]),
        ("comma_f1", report.comma[2]),
        ("period_p", report.period[0]), ("period_r", report.period[1]),
        ("period_f1", report.period[2]),
        ("question_p", report.question[0]), ("question_r", report.question[1]),
        ("question_f1", report.question[2]),
        ("overall_p", report.overall_p), ("overall_r", report.overall_r),
        ("micro_f1", report.micro_f1), ("mean_f1", report.mean_f1),
        ("accuracy", report.accuracy),
    ]
    return "".join(f"{k}={v!r}\n" for k, v in items)


def write_predictions(
    path: str, gold: Sequence[int], pred: Sequence[int], mask: Sequence[int]
) -> None:
    """Write `gold<TAB>pred<TAB>mask_bit` lines for offline scoring."""
    with open(path, "w", encoding="utf-8") as fh:
        for g, p, m in zip(gold, pred, mask):
            fh.write(
                f"{PunctLabel(int(g)).name}\t{PunctLabel(int(p)).name}\t{int(m)}\n"
            )


def score_prediction_file(path: str) -> EvalReport:
    """Score a prediction file written by write_predictions."""
    gold: list[int] = []
    pred: list[int] = []
    mask: list[int] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            g, p, m = line.split("\t")
            gold.append(int(PunctLabel[g]))
            pred.append(int(PunctLabel[p]))
            mask.append(int(m))
    return report_from_counts(confusion_counts(pred, gold, mask))
