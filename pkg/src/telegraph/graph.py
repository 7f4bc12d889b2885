"""Typed property graph of channels and messages.

Two node classes (channels, messages) and two edge kinds:

* ``IS_PART_OF`` — message -> channel it was posted in (exactly one per message)
* ``FORWARDED`` — duplicate message -> the original message it was forwarded from

When a message is forwarded into another channel it is duplicated: the
duplicate node lives in the destination channel (via its own IS_PART_OF edge)
and carries ``origin_message_id`` pointing at the root original. Chains of
forwards are collapsed so duplicates always point at originals, never at
other duplicates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional

from .errors import GraphLookupError


class EdgeKind(str, Enum):
    IS_PART_OF = "IS_PART_OF"
    FORWARDED = "FORWARDED"


@dataclass(frozen=True)
class ChannelNode:
    channel_id: str
    name: str = ""
    description: str = ""
    subscriber_count: int = 0

    def __post_init__(self):
        if self.subscriber_count < 0:
            raise ValueError(f"subscriber_count must be >= 0, got {self.subscriber_count}")


@dataclass(frozen=True)
class MessageNode:
    message_id: str
    text: str = ""
    view_count: int = 0
    posted_at: int = 0
    origin_message_id: Optional[str] = None

    def __post_init__(self):
        if self.view_count < 0:
            raise ValueError(f"view_count must be >= 0, got {self.view_count}")

    @property
    def is_duplicate(self) -> bool:
        return self.origin_message_id is not None


Edge = tuple[str, EdgeKind, str]


@dataclass
class TelegraphGraph:
    """Immutable-after-build property graph; safe for concurrent readers."""

    channels: dict[str, ChannelNode] = field(default_factory=dict)
    messages: dict[str, MessageNode] = field(default_factory=dict)
    edges: set[Edge] = field(default_factory=set)

    def has_node(self, node_id: str) -> bool:
        return node_id in self.channels or node_id in self.messages

    def node_ids(self) -> list[str]:
        return sorted(self.channels) + sorted(self.messages)

    def channel_of(self, message_id: str) -> Optional[str]:
        """The channel a message is part of, or None if it has no edge."""
        for src, kind, dst in self.edges:
            if kind is EdgeKind.IS_PART_OF and src == message_id:
                return dst
        return None

    def edge_counts(self) -> dict[str, int]:
        counts = {kind.value: 0 for kind in EdgeKind}
        for _, kind, _ in self.edges:
            counts[kind.value] += 1
        return counts

    def validate(self) -> list[str]:
        """Check the structural invariants; returns a list of violations."""
        problems = []
        outgoing_part_of: dict[str, int] = {m: 0 for m in self.messages}
        for src, kind, dst in self.edges:
            if not self.has_node(src) or not self.has_node(dst):
                problems.append(f"dangling edge ({src}, {kind.value}, {dst})")
                continue
            if kind is EdgeKind.IS_PART_OF:
                if src not in self.messages or dst not in self.channels:
                    problems.append(f"IS_PART_OF must run message->channel: ({src}, {dst})")
                else:
                    outgoing_part_of[src] += 1
            else:
                if src not in self.messages or dst not in self.messages:
                    problems.append(f"FORWARDED must run message->message: ({src}, {dst})")
                    continue
                dup = self.messages[src]
                orig = self.messages[dst]
                if dup.origin_message_id != orig.message_id:
                    problems.append(f"FORWARDED edge {src}->{dst} does not match origin_message_id")
                if orig.origin_message_id is not None:
                    problems.append(f"FORWARDED target {dst} is itself a duplicate")
        for mid, n in outgoing_part_of.items():
            if n != 1:
                problems.append(f"message {mid} has {n} IS_PART_OF edges, expected 1")
        for m in self.messages.values():
            if m.origin_message_id is not None and m.origin_message_id not in self.messages:
                problems.append(f"origin_message_id {m.origin_message_id} of {m.message_id} unknown")
        return problems


@dataclass(frozen=True)
class IngestRecord:
    """Normalized message-export row (one per posted or forwarded message)."""

    message_id: str
    channel_id: str
    text: str = ""
    view_count: int = 0
    posted_at: int = 0
    forwarded_from_message_id: Optional[str] = None
    channel_name: str = ""
    channel_description: str = ""
    channel_subscriber_count: int = 0


# Documented key names for line-delimited ingest input; unknown keys ignored.
_RECORD_KEYS = {
    "message_id": str,
    "channel_id": str,
    "text": str,
    "view_count": int,
    "posted_at": int,
    "forwarded_from_message_id": str,
    "channel_name": str,
    "channel_description": str,
    "channel_subscriber_count": int,
}


def parse_record(obj: dict) -> IngestRecord:
    """Build an IngestRecord from a parsed line object.

    Raises ValueError on missing required keys or ill-typed values.
    """
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    for required in ("message_id", "channel_id"):
        if required not in obj or not isinstance(obj[required], str) or not obj[required]:
            raise ValueError(f"missing or empty {required}")
    kwargs = {}
    for key, typ in _RECORD_KEYS.items():
        if key not in obj or obj[key] is None:
            continue
        value = obj[key]
        if typ is int:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(f"{key} must be a number")
            value = int(value)
            if value < 0:
                raise ValueError(f"{key} must be >= 0")
        elif not isinstance(value, str):
            raise ValueError(f"{key} must be a string")
        kwargs[key] = value
    return IngestRecord(**kwargs)


def read_records(path) -> Iterator[tuple[int, dict | None, str | None]]:
    """Yield (line_number, parsed object or None, error or None) per input line."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line), None
            except json.JSONDecodeError as exc:
                yield lineno, None, f"invalid json: {exc}"


@dataclass
class IngestReport:
    """Per-build accounting: errors keep ingestion going, they never abort it."""

    total_records: int = 0
    accepted_messages: int = 0
    channels: int = 0
    resolved_forwards: int = 0
    unresolved_forwards: int = 0
    errors: list[str] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "total_records": self.total_records,
            "accepted_messages": self.accepted_messages,
            "channels": self.channels,
            "resolved_forwards": self.resolved_forwards,
            "unresolved_forwards": self.unresolved_forwards,
            "errors": list(self.errors),
        }


def build_graph(records: Iterable[IngestRecord | dict]) -> tuple[TelegraphGraph, IngestReport]:
    """Construct the property graph from an ingest stream.

    Each record yields one message node and one IS_PART_OF edge. A record
    whose forwarded_from_message_id resolves within the stream becomes a
    duplicate carrying origin_message_id (resolved transitively to the root
    original) plus one FORWARDED edge duplicate -> original. Unresolved or
    cyclic forward references leave the message as an original and are
    counted in the report. Malformed records and duplicate message ids get
    error entries; the first occurrence of an id wins.
    """
    report = IngestReport()
    accepted: dict[str, IngestRecord] = {}
    channels: dict[str, ChannelNode] = {}

    for item in records:
        report.total_records += 1
        try:
            rec = item if isinstance(item, IngestRecord) else parse_record(item)
        except ValueError as exc:
            report.errors.append(f"record {report.total_records}: {exc}")
            continue
        if rec.message_id in accepted:
            report.errors.append(
                f"record {report.total_records}: duplicate message_id {rec.message_id}"
            )
            continue
        accepted[rec.message_id] = rec
        if rec.channel_id not in channels:
            channels[rec.channel_id] = ChannelNode(
                channel_id=rec.channel_id,
                name=rec.channel_name,
                description=rec.channel_description,
                subscriber_count=rec.channel_subscriber_count,
            )

    # Resolve forward chains to the root original. A chain ends at a record
    # with no forward reference; unknown targets and cycles stay unresolved.
    origin_cache: dict[str, Optional[str]] = {}

    def resolve_origin(message_id: str) -> Optional[str]:
        chain = []
        current = message_id
        while True:
            if current in origin_cache:
                root = origin_cache[current]
                break
            chain.append(current)
            ref = accepted[current].forwarded_from_message_id
            if ref is None:
                root = current
                break
            if ref not in accepted or ref in chain or ref == current:
                root = None  # unresolved or cyclic
                break
            current = ref
        for mid in chain:
            origin_cache[mid] = root
        return root

    graph = TelegraphGraph(channels=channels)
    for mid in accepted:
        rec = accepted[mid]
        origin: Optional[str] = None
        if rec.forwarded_from_message_id is not None:
            root = resolve_origin(mid)
            if root is None or root == mid:
                report.unresolved_forwards += 1
            else:
                origin = root
                report.resolved_forwards += 1
        graph.messages[mid] = MessageNode(
            message_id=mid,
            text=rec.text,
            view_count=rec.view_count,
            posted_at=rec.posted_at,
            origin_message_id=origin,
        )
        graph.edges.add((mid, EdgeKind.IS_PART_OF, rec.channel_id))
        if origin is not None:
            graph.edges.add((mid, EdgeKind.FORWARDED, origin))

    report.accepted_messages = len(graph.messages)
    report.channels = len(graph.channels)
    return graph, report


def neighbors(graph: TelegraphGraph, node_id: str, kind: EdgeKind, direction: str = "both") -> list[str]:
    """Adjacent node ids along edges of the given kind/direction, sorted by id.

    direction: "out" follows stored edge direction from node_id, "in" reverses
    it, "both" unions the two.
    """
    if not graph.has_node(node_id):
        raise GraphLookupError(node_id)
    if direction not in ("in", "out", "both"):
        raise ValueError(f"direction must be in/out/both, got {direction!r}")
    found = set()
    for src, k, dst in graph.edges:
        if k is not kind:
            continue
        if direction in ("out", "both") and src == node_id:
            found.add(dst)
        if direction in ("in", "both") and dst == node_id:
            found.add(src)
    found.discard(node_id)
    return sorted(found)


class AdjacencyIndex:
    """Precomputed per-kind adjacency over an immutable graph.

    ``neighbors`` is O(edges) per call; model training and centrality need
    repeated lookups, so they build this index once.
    """

    def __init__(self, graph: TelegraphGraph):
        self.out: dict[EdgeKind, dict[str, list[str]]] = {k: {} for k in EdgeKind}
        self.inc: dict[EdgeKind, dict[str, list[str]]] = {k: {} for k in EdgeKind}
        for src, kind, dst in graph.edges:
            self.out[kind].setdefault(src, []).append(dst)
            self.inc[kind].setdefault(dst, []).append(src)
        for table in (self.out, self.inc):
            for kind in table:
                for node in table[kind]:
                    table[kind][node].sort()

    def of(self, node_id: str, kind: EdgeKind, direction: str = "both") -> list[str]:
        if direction == "out":
            return self.out[kind].get(node_id, [])
        if direction == "in":
            return self.inc[kind].get(node_id, [])
        merged = set(self.out[kind].get(node_id, ())) | set(self.inc[kind].get(node_id, ()))
        merged.discard(node_id)
        return sorted(merged)
