"""Weak labeling: match messages to claims by embedding similarity.

A message is linked to every claim whose cosine score reaches the threshold
(default 0.7) and inherits the claim's verdict as its weak label. Human
adjudication turns pending pairs into confirmed (with a strong label) or
rejected ones; weak precision is the confirmed fraction of adjudicated pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import PersistenceError, UndefinedPrecisionError
from .graph import MessageNode
from .kb import KnowledgeBase

DEFAULT_THRESHOLD = 0.7

PAIR_LABELS = ("factual", "misinformation", "other")
STATUSES = ("pending", "confirmed", "rejected")


@dataclass(frozen=True)
class Threshold:
    value: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if not (0.0 < self.value <= 1.0):
            raise ValueError(f"threshold must lie in (0, 1], got {self.value}")


@dataclass(frozen=True)
class MessageClaimPair:
    message_id: str
    claim_id: str
    score: float
    weak_label: str
    strong_label: Optional[str] = None
    status: str = "pending"

    def __post_init__(self):
        if self.weak_label not in PAIR_LABELS:
            raise ValueError(f"weak_label must be one of {PAIR_LABELS}")
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")
        if self.status == "confirmed" and self.strong_label is None:
            raise ValueError("confirmed pairs must carry a strong_label")
        if self.status == "rejected" and self.strong_label is not None:
            raise ValueError("rejected pairs must not carry a strong_label")
        if self.strong_label is not None and self.strong_label not in PAIR_LABELS:
            raise ValueError(f"strong_label must be one of {PAIR_LABELS}")

    @property
    def pair_id(self) -> str:
        return f"{self.message_id}::{self.claim_id}"


@dataclass
class MatchResult:
    pairs: list[MessageClaimPair]
    errors: list[str] = field(default_factory=list)


def match_messages(
    messages: Sequence[MessageNode],
    kb: KnowledgeBase,
    embeddings: Mapping[str, np.ndarray],
    threshold: float | Threshold = DEFAULT_THRESHOLD,
    shortlist_per_claim: Optional[int] = None,
) -> MatchResult:
    """Create a pending pair for every (message, claim) with score >= threshold.

    ``embeddings`` maps both message ids and claim ids to vectors; items with
    a missing embedding get a per-item error entry and are skipped. Pairs come
    back sorted by descending score (ties by message then claim id), so the
    result is independent of input order. ``shortlist_per_claim`` optionally
    caps each claim's matches to its top-k messages.
    """
    if isinstance(threshold, Threshold):
        threshold = threshold.value
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must lie in (0, 1], got {threshold}")

    errors: list[str] = []
    usable_messages: list[MessageNode] = []
    for m in sorted(messages, key=lambda m: m.message_id):
        if m.message_id not in embeddings:
            errors.append(f"missing embedding for message {m.message_id}")
        else:
            usable_messages.append(m)
    usable_claims = []
    for c in sorted(kb.claims, key=lambda c: c.claim_id):
        if c.claim_id not in embeddings:
            errors.append(f"missing embedding for claim {c.claim_id}")
        else:
            usable_claims.append(c)

    pairs: list[MessageClaimPair] = []
    if usable_messages and usable_claims:
        msg_mat = np.stack([np.asarray(embeddings[m.message_id], dtype=np.float64) for m in usable_messages])
        claim_mat = np.stack([np.asarray(embeddings[c.claim_id], dtype=np.float64) for c in usable_claims])
        msg_norms = np.linalg.norm(msg_mat, axis=1, keepdims=True)
        claim_norms = np.linalg.norm(claim_mat, axis=1, keepdims=True)
        msg_norms[msg_norms == 0.0] = 1.0
        claim_norms[claim_norms == 0.0] = 1.0
        scores = np.clip((msg_mat / msg_norms) @ (claim_mat / claim_norms).T, -1.0, 1.0)
        per_claim: dict[int, list[tuple[float, int]]] = {}
        for mi, ci in zip(*np.nonzero(scores >= threshold)):
            per_claim.setdefault(int(ci), []).append((float(scores[mi, ci]), int(mi)))
        for ci, hits in per_claim.items():
            if shortlist_per_claim is not None and len(hits) > shortlist_per_claim:
                hits = sorted(hits, key=lambda sc: (-sc[0], usable_messages[sc[1]].message_id))
                hits = hits[:shortlist_per_claim]
            claim = usable_claims[ci]
            for score, mi in hits:
                pairs.append(
                    MessageClaimPair(
                        message_id=usable_messages[mi].message_id,
                        claim_id=claim.claim_id,
                        score=score,
                        weak_label=claim.verdict,
                    )
                )
    pairs.sort(key=lambda p: (-p.score, p.message_id, p.claim_id))
    return MatchResult(pairs=pairs, errors=errors)


def weak_precision(pairs: Iterable[MessageClaimPair]) -> float:
    """confirmed / (confirmed + rejected); pending pairs are excluded."""
    confirmed = rejected = 0
    for p in pairs:
        if p.status == "confirmed":
            confirmed += 1
        elif p.status == "rejected":
            rejected += 1
    if confirmed + rejected == 0:
        raise UndefinedPrecisionError("no adjudicated pairs")
    return confirmed / (confirmed + rejected)


@dataclass
class AnnotationOutcome:
    pairs: list[MessageClaimPair]
    strong_dataset: list[MessageClaimPair]
    applied: int = 0
    idempotent: int = 0
    rejected_decisions: list[str] = field(default_factory=list)


def _decide(pair: MessageClaimPair, decision: str) -> MessageClaimPair:
    if decision == "reject":
        return replace(pair, status="rejected", strong_label=None)
    return replace(pair, status="confirmed", strong_label=decision)


def apply_annotations(
    pairs: Sequence[MessageClaimPair],
    decisions: Iterable[tuple[str, str]],
) -> AnnotationOutcome:
    """Apply (pair_id, decision) adjudications.

    decision is one of the strong labels or "reject". Repeating an identical
    decision is a no-op; a decision for an unknown pair, or one conflicting
    with an earlier adjudication, lands in rejected_decisions instead of
    mutating anything. The strong dataset is the confirmed pairs whose strong
    label is factual or misinformation ("other" stays stored but is excluded
    from training).
    """
    by_id = {p.pair_id: p for p in pairs}
    if len(by_id) != len(pairs):
        raise ValueError("duplicate pair ids in pair store")
    outcome = AnnotationOutcome(pairs=[], strong_dataset=[])
    for pair_id, decision in decisions:
        if decision not in PAIR_LABELS and decision != "reject":
            outcome.rejected_decisions.append(f"{pair_id}: unknown decision {decision!r}")
            continue
        pair = by_id.get(pair_id)
        if pair is None:
            outcome.rejected_decisions.append(f"{pair_id}: unknown pair")
            continue
        updated = _decide(pair, decision)
        if pair.status == "pending":
            by_id[pair_id] = updated
            outcome.applied += 1
        elif (pair.status, pair.strong_label) == (updated.status, updated.strong_label):
            outcome.idempotent += 1
        else:
            outcome.rejected_decisions.append(
                f"{pair_id}: already {pair.status} ({pair.strong_label}), decision {decision!r} conflicts"
            )
    outcome.pairs = [by_id[p.pair_id] for p in pairs]
    outcome.strong_dataset = [
        p
        for p in outcome.pairs
        if p.status == "confirmed" and p.strong_label in ("factual", "misinformation")
    ]
    return outcome


def select_training_labels(
    pairs: Iterable[MessageClaimPair], label_source: str = "weak"
) -> dict[str, str]:
    """One binary label per message from its best pair.

    weak source: highest-scoring pair over all pairs; strong source:
    highest-scoring confirmed pair, using its strong label. Ties break by
    claim_id order. Messages whose selected label is "other" are dropped.
    """
    if label_source not in ("weak", "strong"):
        raise ValueError("label_source must be 'weak' or 'strong'")
    best: dict[str, MessageClaimPair] = {}
    for p in pairs:
        if label_source == "strong" and p.status != "confirmed":
            continue
        incumbent = best.get(p.message_id)
        if incumbent is None or (-p.score, p.claim_id) < (-incumbent.score, incumbent.claim_id):
            best[p.message_id] = p
    labels: dict[str, str] = {}
    for message_id, p in best.items():
        label = p.strong_label if label_source == "strong" else p.weak_label
        if label in ("factual", "misinformation"):
            labels[message_id] = label
    return labels


def pair_store_stats(pairs: Sequence[MessageClaimPair]) -> dict:
    """Raw and adjudicated counts, comparable with either reported reading."""
    stats = {
        "total_pairs": len(pairs),
        "weak_labels": {label: 0 for label in PAIR_LABELS},
        "status": {status: 0 for status in STATUSES},
        "strong_labels": {label: 0 for label in PAIR_LABELS},
        "adjudicated": 0,
    }
    for p in pairs:
        stats["weak_labels"][p.weak_label] += 1
        stats["status"][p.status] += 1
        if p.strong_label is not None:
            stats["strong_labels"][p.strong_label] += 1
        if p.status != "pending":
            stats["adjudicated"] += 1
    try:
        stats["weak_precision"] = weak_precision(pairs)
    except UndefinedPrecisionError:
        stats["weak_precision"] = None
    return stats


# ---------------------------------------------------------------------------
# Pair store persistence (line-delimited, canonical order)
# ---------------------------------------------------------------------------


def save_pairs(pairs: Sequence[MessageClaimPair], path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for p in sorted(pairs, key=lambda p: (-p.score, p.message_id, p.claim_id)):
                obj = {
                    "message_id": p.message_id,
                    "claim_id": p.claim_id,
                    "score": p.score,
                    "weak_label": p.weak_label,
                    "strong_label": p.strong_label,
                    "status": p.status,
                }
                fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise PersistenceError(path, exc) from exc


def load_pairs(path) -> list[MessageClaimPair]:
    pairs = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                pairs.append(
                    MessageClaimPair(
                        message_id=obj["message_id"],
                        claim_id=obj["claim_id"],
                        score=float(obj["score"]),
                        weak_label=obj["weak_label"],
                        strong_label=obj.get("strong_label"),
                        status=obj.get("status", "pending"),
                    )
                )
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise PersistenceError(path, exc) from exc
    return pairs
