"""HTTP annotation API backing the human review queue.

Endpoints (JSON over plain HTTP, optional shared-token header):

    GET  /pairs?status=&page=&page_size=   list pairs, score-descending
    POST /pairs/{pair_id}/decision         adjudicate one pending pair
    GET  /stats                            pair store counters + weak precision

Reads are served concurrently; decisions are serialized through one writer
lock, persisted to the pair store, and appended to an append-only audit log
(one entry per state change, so replaying the log reconstructs the store).
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Optional
from urllib.parse import parse_qs, urlparse

from .kb import KnowledgeBase
from .weaklabel import (
    MessageClaimPair,
    apply_annotations,
    load_pairs,
    pair_store_stats,
    save_pairs,
)

MAX_PAGE_SIZE = 100
TOKEN_HEADER = "X-Annotation-Token"
TOKEN_ENV_VAR = "ANNOTATION_TOKEN"

DECISIONS = ("factual", "misinformation", "other", "reject")


@dataclass(frozen=True)
class AnnotationDecision:
    pair_id: str
    decision: str
    annotator: str = "anonymous"
    timestamp: Optional[float] = None

    def __post_init__(self):
        if self.decision not in DECISIONS:
            raise ValueError(f"decision must be one of {DECISIONS}")


class AnnotationStore:
    """Pair store with serialized writes and an append-only audit log."""

    def __init__(
        self,
        pairs: list[MessageClaimPair],
        store_path=None,
        audit_path=None,
        message_texts: Optional[dict[str, str]] = None,
        kb: Optional[KnowledgeBase] = None,
    ):
        self._pairs = list(pairs)
        self._store_path = Path(store_path) if store_path else None
        self._audit_path = Path(audit_path) if audit_path else None
        self._lock = threading.Lock()
        self.message_texts = message_texts or {}
        self.claims = kb.by_id() if kb is not None else {}

    @property
    def pairs(self) -> list[MessageClaimPair]:
        return list(self._pairs)

    def describe(self, pair: MessageClaimPair) -> dict:
        claim = self.claims.get(pair.claim_id)
        return {
            "pair_id": pair.pair_id,
            "message_id": pair.message_id,
            "claim_id": pair.claim_id,
            "score": pair.score,
            "weak_label": pair.weak_label,
            "strong_label": pair.strong_label,
            "status": pair.status,
            "message_text": self.message_texts.get(pair.message_id, ""),
            "claim_text": claim.text if claim else "",
            "claim_source": claim.source_name if claim else "",
            "claim_verdict": claim.verdict if claim else pair.weak_label,
            "claim_url": claim.url if claim else None,
        }

    def list_pairs(
        self,
        status: Optional[str] = None,
        min_score: Optional[float] = None,
        max_score: Optional[float] = None,
        page: int = 0,
        page_size: int = 20,
    ) -> dict:
        """Stable score-descending page; bounded page size."""
        if page < 0:
            raise ValueError("page must be >= 0")
        if not (1 <= page_size <= MAX_PAGE_SIZE):
            raise ValueError(f"page_size must be in 1..{MAX_PAGE_SIZE}")
        rows = sorted(self._pairs, key=lambda p: (-p.score, p.pair_id))
        if status is not None:
            rows = [p for p in rows if p.status == status]
        if min_score is not None:
            rows = [p for p in rows if p.score >= min_score]
        if max_score is not None:
            rows = [p for p in rows if p.score <= max_score]
        start = page * page_size
        return {
            "pairs": [self.describe(p) for p in rows[start : start + page_size]],
            "page": page,
            "page_size": page_size,
            "total": len(rows),
            "has_more": start + page_size < len(rows),
        }

    def stats(self) -> dict:
        return pair_store_stats(self._pairs)

    def submit(self, decision: AnnotationDecision) -> tuple[dict, bool]:
        """Apply one decision; returns (described pair, idempotent flag).

        Raises KeyError for unknown pairs and ConflictError when the pair was
        already adjudicated differently. Identical replays change nothing and
        produce no audit entry.
        """
        with self._lock:
            by_id = {p.pair_id: p for p in self._pairs}
            if decision.pair_id not in by_id:
                raise KeyError(decision.pair_id)
            outcome = apply_annotations(self._pairs, [(decision.pair_id, decision.decision)])
            if outcome.rejected_decisions:
                raise ConflictError(self.describe(by_id[decision.pair_id]))
            idempotent = outcome.idempotent > 0
            if not idempotent:
                self._pairs = outcome.pairs
                self._persist(decision)
            return self.describe({p.pair_id: p for p in self._pairs}[decision.pair_id]), idempotent

    def _persist(self, decision: AnnotationDecision) -> None:
        if self._store_path is not None:
            tmp = self._store_path.with_suffix(".tmp")
            save_pairs(self._pairs, tmp)
            os.replace(tmp, self._store_path)
        if self._audit_path is not None:
            entry = {
                "pair_id": decision.pair_id,
                "decision": decision.decision,
                "annotator": decision.annotator,
                "timestamp": decision.timestamp if decision.timestamp is not None else time.time(),
            }
            with open(self._audit_path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps(entry, ensure_ascii=False, separators=(",", ":")) + "\n")


class ConflictError(Exception):
    """Pair already adjudicated with a different outcome."""

    def __init__(self, current: dict):
        super().__init__(f"pair {current['pair_id']} already {current['status']}")
        self.current = current


def replay_audit(initial_pairs: list[MessageClaimPair], audit_path) -> list[MessageClaimPair]:
    """Reconstruct the pair store state by replaying the audit log in order."""
    decisions = []
    path = Path(audit_path)
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                entry = json.loads(line)
                decisions.append((entry["pair_id"], entry["decision"]))
    return apply_annotations(initial_pairs, decisions).pairs


def load_store(
    pairs_path,
    audit_path=None,
    message_texts: Optional[dict[str, str]] = None,
    kb: Optional[KnowledgeBase] = None,
) -> AnnotationStore:
    return AnnotationStore(
        load_pairs(pairs_path),
        store_path=pairs_path,
        audit_path=audit_path,
        message_texts=message_texts,
        kb=kb,
    )


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------


def _make_handler(store: AnnotationStore, token: Optional[str]):
    class Handler(BaseHTTPRequestHandler):
        server_version = "telegraph-annotation/1"

        def log_message(self, *args):
            pass

        def _send(self, code: int, payload: dict) -> None:
            body = json.dumps(payload, ensure_ascii=False).encode("utf-8")
            self.send_response(code)
            self.send_header("Content-Type", "application/json; charset=utf-8")
            self.send_header("Content-Length", str(len(body)))
            self._cors()
            self.end_headers()
            self.wfile.write(body)

        def _cors(self) -> None:
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", f"Content-Type, {TOKEN_HEADER}")

        def _authorized(self) -> bool:
            if token is None:
                return True
            return self.headers.get(TOKEN_HEADER) == token

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.end_headers()

        def do_GET(self):
            if not self._authorized():
                return self._send(401, {"error": "missing or invalid token"})
            url = urlparse(self.path)
            query = parse_qs(url.query)

            def q(name, cast=str, default=None):
                if name not in query:
                    return default
                return cast(query[name][0])

            try:
                if url.path == "/pairs":
                    result = store.list_pairs(
                        status=q("status"),
                        min_score=q("min_score", float),
                        max_score=q("max_score", float),
                        page=q("page", int, 0),
                        page_size=q("page_size", int, 20),
                    )
                    return self._send(200, result)
                if url.path == "/stats":
                    return self._send(200, store.stats())
            except (ValueError, TypeError) as exc:
                return self._send(400, {"error": str(exc)})
            return self._send(404, {"error": f"no such resource {url.path}"})

        def do_POST(self):
            if not self._authorized():
                return self._send(401, {"error": "missing or invalid token"})
            url = urlparse(self.path)
            parts = url.path.strip("/").split("/")
            if len(parts) != 3 or parts[0] != "pairs" or parts[2] != "decision":
                return self._send(404, {"error": f"no such resource {url.path}"})
            try:
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                decision = AnnotationDecision(
                    pair_id=parts[1],
                    decision=body.get("decision", ""),
                    annotator=str(body.get("annotator", "anonymous")),
                )
            except (ValueError, json.JSONDecodeError) as exc:
                return self._send(400, {"error": str(exc)})
            try:
                described, idempotent = store.submit(decision)
            except KeyError:
                return self._send(404, {"error": f"unknown pair {parts[1]}"})
            except ConflictError as exc:
                return self._send(409, {"error": str(exc), "pair": exc.current})
            return self._send(200, {"pair": described, "idempotent": idempotent})

    return Handler


def build_server(
    store: AnnotationStore, port: int = 0, token: Optional[str] = None
) -> ThreadingHTTPServer:
    """Bind the annotation server (port 0 picks a free port); not yet serving.

    Token defaults to the ANNOTATION_TOKEN environment variable; empty/unset
    means open access (single-annotator desk tool).
    """
    if token is None:
        token = os.environ.get(TOKEN_ENV_VAR) or None
    return ThreadingHTTPServer(("127.0.0.1", port), _make_handler(store, token))


def serve_forever(store: AnnotationStore, port: int, token: Optional[str] = None) -> None:
    server = build_server(store, port, token)
    try:
        server.serve_forever()
    finally:
        server.server_close()
