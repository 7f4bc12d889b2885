"""Evaluation metrics: per-class precision/recall/F1, MCC, calibration error.

Class convention throughout: factual is the positive class (1), misinformation
the negative class (0). MCC is symmetric under a simultaneous class swap, so
the convention only fixes reporting, not the score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FACTUAL = 1
MISINFORMATION = 0

CLASS_NAMES = {FACTUAL: "factual", MISINFORMATION: "misinformation"}


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    per_class: dict[str, ClassScores]
    mcc: float
    ece: float | None = None
    # set when a zero denominator forced a 0-by-convention value
    degenerate: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.n if self.n else 0.0

    def to_record(self) -> dict:
        """Flat key-value form with fixed key names for table aggregation."""
        rec = {
            "n": self.n,
            "tp": self.tp,
            "fp": self.fp,
            "tn": self.tn,
            "fn": self.fn,
            "accuracy": self.accuracy,
            "mcc": self.mcc,
        }
        for name, scores in sorted(self.per_class.items()):
            rec[f"{name}_precision"] = scores.precision
            rec[f"{name}_recall"] = scores.recall
            rec[f"{name}_f1"] = scores.f1
        rec["ece"] = self.ece
        rec["degenerate"] = ",".join(self.degenerate)
        return rec


def _prf(tp: int, fp: int, fn: int, flags: list[str], name: str) -> ClassScores:
    if tp + fp == 0:
        precision = 0.0
        flags.append(f"{name}_precision")
    else:
        precision = tp / (tp + fp)
    if tp + fn == 0:
        recall = 0.0
        flags.append(f"{name}_recall")
    else:
        recall = tp / (tp + fn)
    if precision + recall == 0.0:
        f1 = 0.0
        flags.append(f"{name}_f1")
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return ClassScores(precision, recall, f1)


def confusion_counts(predictions: Sequence[int], labels: Sequence[int]) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) with factual = positive."""
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(labels)} labels")
    if len(labels) == 0:
        raise ValueError("empty input")
    tp = fp = tn = fn = 0
    for p, y in zip(predictions, labels):
        if p not in (0, 1) or y not in (0, 1):
            raise ValueError(f"labels must be binary 0/1, got prediction={p!r} label={y!r}")
        if p == 1 and y == 1:
            tp += 1
        elif p == 1 and y == 0:
            fp += 1
        elif p == 0 and y == 0:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


def class_prf1(predictions: Sequence[int], labels: Sequence[int]) -> MetricsReport:
    """Per-class precision/recall/F1 plus confusion counts.

    Empty-denominator cases return 0 and are flagged in ``degenerate`` rather
    than raising; small test splits hit them routinely.
    """
    tp, fp, tn, fn = confusion_counts(predictions, labels)
    flags: list[str] = []
    factual = _prf(tp, fp, fn, flags, "factual")
    # complement class: swap positives and negatives
    misinfo = _prf(tn, fn, fp, flags, "misinformation")
    return MetricsReport(
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        per_class={"factual": factual, "misinformation": misinfo},
        mcc=mcc(tp, fp, tn, fn),
        degenerate=flags,
    )


def mcc(tp: int, fp: int, tn: int, fn: int) -> float:
    """Matthews correlation coefficient; any zero denominator factor -> 0."""
    for v in (tp, fp, tn, fn):
        if v < 0:
            raise ValueError("confusion counts must be non-negative")
    if tp + fp + tn + fn < 1:
        raise ValueError("confusion counts must total at least 1")
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def ece(confidences: Sequence[float], correct: Sequence[bool], num_bins: int = 10) -> float:
    """Expected calibration error over equal-width confidence bins.

    Sum over bins of (n_b / N) * |accuracy(b) - mean confidence(b)|. A
    confidence equal to a bin edge belongs to the higher bin; 1.0 goes to
    the top bin.
    """
    if len(confidences) != len(correct):
        raise ValueError("confidences and correctness flags must have equal length")
    if len(confidences) == 0:
        raise ValueError("empty input")
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    conf = np.asarray(confidences, dtype=np.float64)
    if np.any(conf < 0.0) or np.any(conf > 1.0):
        raise ValueError("confidences must lie in [0, 1]")
    hits = np.asarray(correct, dtype=np.float64)
    bins = np.minimum((conf * num_bins).astype(int), num_bins - 1)
    total = 0.0
    n = len(conf)
    for b in range(num_bins):
        mask = bins == b
        n_b = int(mask.sum())
        if n_b == 0:
            continue
        acc_b = float(hits[mask].mean())
        conf_b = float(conf[mask].mean())
        total += (n_b / n) * abs(acc_b - conf_b)
    return total


def evaluate_probabilities(
    probabilities: Sequence[float], labels: Sequence[int], num_bins: int = 10, threshold: float = 0.5
) -> MetricsReport:
    """Full report from p(factual) outputs: thresholded classes plus ECE.

    Confidence of a prediction is the predicted probability of the top class,
    i.e. max(p, 1 - p).
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    preds = (probs >= threshold).astype(int)
    report = class_prf1(preds.tolist(), list(labels))
    confidences = np.maximum(probs, 1.0 - probs)
    hits = preds == np.asarray(labels, dtype=int)
    report.ece = ece(confidences.tolist(), hits.tolist(), num_bins=num_bins)
    return report
