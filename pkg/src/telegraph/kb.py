"""Knowledge base of fact-check and news claims used as weak-label targets.

Input is line-delimited UTF-8 JSON with keys: text, verdict, source_name,
source_kind, url, published_at, claim_id. Newspaper-sourced claims default to
the factual verdict; fact-check records must carry an explicit verdict.
Exact-text duplicates are collapsed (first claim wins).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .errors import PersistenceError

VERDICTS = ("factual", "misinformation")
SOURCE_KINDS = ("fact_check", "newspaper")


@dataclass(frozen=True)
class Claim:
    claim_id: str
    text: str
    verdict: str
    source_name: str
    source_kind: str
    url: Optional[str] = None
    published_at: Optional[int] = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("claim text must be non-empty")
        if self.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {self.verdict!r}")
        if self.source_kind not in SOURCE_KINDS:
            raise ValueError(f"source_kind must be one of {SOURCE_KINDS}, got {self.source_kind!r}")


@dataclass
class KnowledgeBase:
    claims: list[Claim] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.claims)

    @property
    def is_empty(self) -> bool:
        return not self.claims

    def by_id(self) -> dict[str, Claim]:
        return {c.claim_id: c for c in self.claims}

    def source_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for c in self.claims:
            counts[c.source_name] = counts.get(c.source_name, 0) + 1
        return counts


def _claim_from_obj(obj: dict, fallback_id: str) -> Claim:
    if not isinstance(obj, dict):
        raise ValueError("claim record is not an object")
    text = obj.get("text")
    if not isinstance(text, str) or not text:
        raise ValueError("missing or empty text")
    source_kind = obj.get("source_kind")
    if source_kind not in SOURCE_KINDS:
        raise ValueError(f"missing or unknown source_kind: {source_kind!r}")
    verdict = obj.get("verdict")
    if verdict is None and source_kind == "newspaper":
        verdict = "factual"
    if verdict not in VERDICTS:
        raise ValueError(f"missing or unknown verdict: {verdict!r}")
    published_at = obj.get("published_at")
    if published_at is not None:
        published_at = int(published_at)
    return Claim(
        claim_id=str(obj.get("claim_id") or fallback_id),
        text=text,
        verdict=verdict,
        source_name=str(obj.get("source_name", "")),
        source_kind=source_kind,
        url=obj.get("url"),
        published_at=published_at,
    )


def load_claims(path) -> KnowledgeBase:
    """Load claims from a line-delimited export.

    Malformed lines are reported with their line numbers and skipped; a file
    with zero valid claims yields an empty (warning-state) knowledge base.
    """
    kb = KnowledgeBase()
    seen_ids: set[str] = set()
    seen_texts: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    claim = _claim_from_obj(obj, fallback_id=f"claim-{lineno}")
                except (ValueError, TypeError) as exc:
                    kb.errors.append(f"line {lineno}: {exc}")
                    continue
                if claim.claim_id in seen_ids:
                    kb.errors.append(f"line {lineno}: duplicate claim_id {claim.claim_id}")
                    continue
                if claim.text in seen_texts:
                    # exact-text duplicate: collapse, first claim kept
                    continue
                seen_ids.add(claim.claim_id)
                seen_texts[claim.text] = claim.claim_id
                kb.claims.append(claim)
    except OSError as exc:
        raise PersistenceError(path, exc) from exc
    return kb


def kb_stats(kb: KnowledgeBase) -> dict:
    """Totals per verdict and per source kind (all zero for an empty base)."""
    stats = {
        "total": len(kb.claims),
        "verdicts": {v: 0 for v in VERDICTS},
        "source_kinds": {k: 0 for k in SOURCE_KINDS},
        "sources": kb.source_counts(),
        "errors": len(kb.errors),
    }
    for c in kb.claims:
        stats["verdicts"][c.verdict] += 1
        stats["source_kinds"][c.source_kind] += 1
    return stats


def save_claims(kb: KnowledgeBase, path) -> None:
    """Write claims back out in canonical (claim_id-sorted) line-delimited form."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for c in sorted(kb.claims, key=lambda c: c.claim_id):
                obj = {
                    "claim_id": c.claim_id,
                    "text": c.text,
                    "verdict": c.verdict,
                    "source_name": c.source_name,
                    "source_kind": c.source_kind,
                }
                if c.url is not None:
                    obj["url"] = c.url
                if c.published_at is not None:
                    obj["published_at"] = c.published_at
                fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise PersistenceError(path, exc) from exc
