"""Canonical snapshot persistence for the property graph.

A snapshot is a directory of three line-delimited files (channels, messages,
edges) in canonical order plus a manifest with counts and a content hash.
Canonical order — nodes sorted by id, edges sorted by (kind, source, target),
fixed key order, compact separators — makes two saves of equal graphs
byte-identical, so snapshots can be diffed and hashed.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

from .errors import PersistenceError
from .graph import ChannelNode, EdgeKind, MessageNode, TelegraphGraph

FORMAT_ID = "telegraph-graph/1"

_FILES = ("channels.jsonl", "messages.jsonl", "edges.jsonl")


def _dump(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def _channel_line(ch: ChannelNode) -> str:
    return _dump(
        {
            "channel_id": ch.channel_id,
            "name": ch.name,
            "description": ch.description,
            "subscriber_count": ch.subscriber_count,
        }
    )


def _message_line(m: MessageNode) -> str:
    obj = {
        "message_id": m.message_id,
        "text": m.text,
        "view_count": m.view_count,
        "posted_at": m.posted_at,
    }
    if m.origin_message_id is not None:
        obj["origin_message_id"] = m.origin_message_id
    return _dump(obj)


def save_graph(graph: TelegraphGraph, path) -> dict:
    """Write a canonical snapshot; returns the manifest dict."""
    root = Path(path)
    try:
        root.mkdir(parents=True, exist_ok=True)
        channel_lines = [_channel_line(graph.channels[c]) for c in sorted(graph.channels)]
        message_lines = [_message_line(graph.messages[m]) for m in sorted(graph.messages)]
        edge_lines = [
            _dump({"source": s, "kind": k.value, "target": t})
            for k, s, t in sorted((k, s, t) for s, k, t in graph.edges)
        ]
        contents = {
            "channels.jsonl": "".join(line + "\n" for line in channel_lines),
            "messages.jsonl": "".join(line + "\n" for line in message_lines),
            "edges.jsonl": "".join(line + "\n" for line in edge_lines),
        }
        digest = hashlib.sha256()
        for name in _FILES:
            digest.update(contents[name].encode("utf-8"))
        manifest = {
            "format": FORMAT_ID,
            "counts": {
                "channels": len(graph.channels),
                "messages": len(graph.messages),
                **graph.edge_counts(),
            },
            "content_hash": digest.hexdigest(),
        }
        for name in _FILES:
            (root / name).write_text(contents[name], encoding="utf-8")
        (root / "manifest.json").write_text(
            json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        return manifest
    except OSError as exc:
        raise PersistenceError(path, exc) from exc


def load_graph(path) -> TelegraphGraph:
    """Load a snapshot directory back into a graph."""
    root = Path(path)
    graph = TelegraphGraph()
    try:
        for line in (root / "channels.jsonl").read_text(encoding="utf-8").splitlines():
            obj = json.loads(line)
            graph.channels[obj["channel_id"]] = ChannelNode(
                channel_id=obj["channel_id"],
                name=obj.get("name", ""),
                description=obj.get("description", ""),
                subscriber_count=int(obj.get("subscriber_count", 0)),
            )
        for line in (root / "messages.jsonl").read_text(encoding="utf-8").splitlines():
            obj = json.loads(line)
            graph.messages[obj["message_id"]] = MessageNode(
                message_id=obj["message_id"],
                text=obj.get("text", ""),
                view_count=int(obj.get("view_count", 0)),
                posted_at=int(obj.get("posted_at", 0)),
                origin_message_id=obj.get("origin_message_id"),
            )
        for line in (root / "edges.jsonl").read_text(encoding="utf-8").splitlines():
            obj = json.loads(line)
            graph.edges.add((obj["source"], EdgeKind(obj["kind"]), obj["target"]))
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise PersistenceError(path, exc) from exc
    return graph


def snapshot_hash(path) -> str:
    """Content hash over the snapshot's canonical files (matches the manifest)."""
    root = Path(path)
    digest = hashlib.sha256()
    try:
        for name in _FILES:
            digest.update((root / name).read_bytes())
    except OSError as exc:
        raise PersistenceError(path, exc) from exc
    return digest.hexdigest()


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def graphs_equal(a: TelegraphGraph, b: TelegraphGraph) -> bool:
    """Node/edge set equality."""
    return a.channels == b.channels and a.messages == b.messages and a.edges == b.edges
