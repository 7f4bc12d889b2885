"""Centrality measures over the message-forwarding graph.

Degree centrality counts all incident edges. Forward-degree centrality
restricts to forwarding relations projected onto channels: a forward credits
the origin message's channel with one outgoing count (content originator) and
the duplicate's channel with one ingoing count (amplifier). Betweenness uses
Brandes' single-source accumulation over the graph treated as undirected and
unweighted, with per-source checkpointing for long runs.
"""

from __future__ import annotations

import json
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .errors import PersistenceError
from .graph import AdjacencyIndex, EdgeKind, TelegraphGraph


@dataclass
class CentralityScores:
    measure: str
    scores: dict[str, float]
    in_scores: Optional[dict[str, float]] = None
    out_scores: Optional[dict[str, float]] = None
    edge_filter: str = "all"
    runtime_seconds: float = 0.0

    def top(self, k: int, names: Optional[dict[str, str]] = None) -> list[tuple[str, float]]:
        """Top-k node ids by score; ties broken by display name ascending."""
        names = names or {}
        ranked = sorted(
            self.scores.items(), key=lambda kv: (-kv[1], names.get(kv[0], kv[0]), kv[0])
        )
        return ranked[:k]


def degree_centrality(graph: TelegraphGraph) -> CentralityScores:
    """Incident edge count per node, all edge kinds, O(n + m)."""
    start = time.perf_counter()
    scores: dict[str, float] = {node: 0.0 for node in graph.node_ids()}
    for src, _, dst in graph.edges:
        if src in scores:
            scores[src] += 1.0
        if dst in scores:
            scores[dst] += 1.0
    return CentralityScores(
        measure="degree",
        scores=scores,
        runtime_seconds=time.perf_counter() - start,
    )


def forward_degree_centrality(graph: TelegraphGraph) -> CentralityScores:
    """Forwarding counts projected to channels, split into out and in.

    out = forwarded copies of content originating in the channel's messages;
    in = forwarded copies that landed in the channel. total = in + out.
    """
    start = time.perf_counter()
    index = AdjacencyIndex(graph)

    def channel_of(message_id: str) -> Optional[str]:
        owners = index.out[EdgeKind.IS_PART_OF].get(message_id, ())
        return owners[0] if owners else None

    out_scores = {c: 0.0 for c in graph.channels}
    in_scores = {c: 0.0 for c in graph.channels}
    for src, kind, dst in graph.edges:
        if kind is not EdgeKind.FORWARDED:
            continue
        origin_channel = channel_of(dst)
        duplicate_channel = channel_of(src)
        if origin_channel is not None:
            out_scores[origin_channel] += 1.0
        if duplicate_channel is not None:
            in_scores[duplicate_channel] += 1.0
    totals = {c: in_scores[c] + out_scores[c] for c in graph.channels}
    return CentralityScores(
        measure="forward_degree",
        scores=totals,
        in_scores=in_scores,
        out_scores=out_scores,
        edge_filter="FORWARDED",
        runtime_seconds=time.perf_counter() - start,
    )


def undirected_adjacency(graph: TelegraphGraph) -> dict[str, list[str]]:
    """Simple undirected adjacency over all edge kinds, neighbors sorted."""
    adj: dict[str, set[str]] = {node: set() for node in graph.node_ids()}
    for src, _, dst in graph.edges:
        if src == dst:
            continue
        if src in adj and dst in adj:
            adj[src].add(dst)
            adj[dst].add(src)
    return {node: sorted(peers) for node, peers in adj.items()}


def _single_source_dependencies(
    source: str, adj: dict[str, list[str]]
) -> dict[str, float]:
    """Brandes dependency accumulation for one source (unweighted BFS)."""
    sigma = {source: 1.0}
    dist = {source: 0}
    predecessors: dict[str, list[str]] = {}
    order: list[str] = []
    queue = deque([source])
    while queue:
        v = queue.popleft()
        order.append(v)
        for w in adj[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                queue.append(w)
            if dist[w] == dist[v] + 1:
                sigma[w] = sigma.get(w, 0.0) + sigma[v]
                predecessors.setdefault(w, []).append(v)
    delta = {v: 0.0 for v in order}
    for w in reversed(order):
        for v in predecessors.get(w, ()):
            delta[v] += (sigma[v] / sigma[w]) * (1.0 + delta[w])
    delta.pop(source, None)
    return delta


@dataclass
class BetweennessCheckpoint:
    completed_sources: int = 0
    partial: dict[str, float] = field(default_factory=dict)


def _load_checkpoint(path) -> BetweennessCheckpoint:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return BetweennessCheckpoint(
            completed_sources=int(obj["completed_sources"]),
            partial={k: float(v) for k, v in obj["partial"].items()},
        )
    except (OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        raise PersistenceError(path, exc) from exc


def _save_checkpoint(path, checkpoint: BetweennessCheckpoint) -> None:
    try:
        Path(path).write_text(
            json.dumps(
                {
                    "completed_sources": checkpoint.completed_sources,
                    "partial": checkpoint.partial,
                },
                sort_keys=True,
            ),
            encoding="utf-8",
        )
    except OSError as exc:
        raise PersistenceError(path, exc) from exc


def betweenness_centrality(
    graph: TelegraphGraph,
    progress: Optional[Callable[[int, int], None]] = None,
    checkpoint_path=None,
    checkpoint_every: int = 0,
    sources: Optional[Sequence[str]] = None,
) -> CentralityScores:
    """Exact betweenness via Brandes, graph treated as undirected/unweighted.

    Scores sum shortest-path fractions over unordered node pairs (endpoints
    excluded). Sources are processed in sorted order so partial sums are
    deterministic; with ``checkpoint_path`` set, per-source partial sums are
    persisted every ``checkpoint_every`` sources and an interrupted run
    resumes where it stopped. Passing an explicit ``sources`` subset computes
    a sampled approximation (off by default; exact mode uses every node).
    """
    start = time.perf_counter()
    adj = undirected_adjacency(graph)
    all_sources = sorted(adj) if sources is None else sorted(sources)
    checkpoint = BetweennessCheckpoint(partial={node: 0.0 for node in adj})
    if checkpoint_path is not None and Path(checkpoint_path).exists():
        checkpoint = _load_checkpoint(checkpoint_path)
    for i in range(checkpoint.completed_sources, len(all_sources)):
        delta = _single_source_dependencies(all_sources[i], adj)
        for node, value in delta.items():
            checkpoint.partial[node] += value
        checkpoint.completed_sources = i + 1
        if (
            checkpoint_path is not None
            and checkpoint_every > 0
            and (i + 1) % checkpoint_every == 0
        ):
            _save_checkpoint(checkpoint_path, checkpoint)
        if progress is not None:
            progress(i + 1, len(all_sources))
    if checkpoint_path is not None:
        _save_checkpoint(checkpoint_path, checkpoint)
    # each unordered pair was counted from both endpoints
    scores = {node: value / 2.0 for node, value in checkpoint.partial.items()}
    return CentralityScores(
        measure="betweenness",
        scores=scores,
        edge_filter="all",
        runtime_seconds=time.perf_counter() - start,
    )


# ---------------------------------------------------------------------------
# Reporting
# ---------------------------------------------------------------------------


def save_scores(result: CentralityScores, path) -> None:
    """Line-delimited (node id, score[, in, out]) sorted by descending score."""
    rows = sorted(result.scores.items(), key=lambda kv: (-kv[1], kv[0]))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for node, score in rows:
                obj: dict = {"node_id": node, "score": score}
                if result.in_scores is not None:
                    obj["in"] = result.in_scores.get(node, 0.0)
                if result.out_scores is not None:
                    obj["out"] = result.out_scores.get(node, 0.0)
                fh.write(json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n")
    except OSError as exc:
        raise PersistenceError(path, exc) from exc


def top_k_table(
    graph: TelegraphGraph, result: CentralityScores, k: int = 10
) -> str:
    """Plain-text top-k channel table (score columns first, then channel)."""
    names = {c.channel_id: c.name or c.channel_id for c in graph.channels.values()}
    channel_scores = {n: s for n, s in result.scores.items() if n in graph.channels}
    ranked = sorted(channel_scores.items(), key=lambda kv: (-kv[1], names[kv[0]], kv[0]))[:k]
    has_split = result.in_scores is not None and result.out_scores is not None
    if has_split:
        header = f"{'score':>12} {'out':>12} {'in':>12}  {'channel':<40} {'subscribers':>12}"
    else:
        header = f"{'score':>12}  {'channel':<40} {'subscribers':>12}"
    lines = [header, "-" * len(header)]
    for node, score in ranked:
        channel = graph.channels[node]
        if has_split:
            lines.append(
                f"{score:>12g} {result.out_scores[node]:>12g} {result.in_scores[node]:>12g}"
                f"  {names[node]:<40} {channel.subscriber_count:>12}"
            )
        else:
            lines.append(
                f"{score:>12g}  {names[node]:<40} {channel.subscriber_count:>12}"
            )
    return "\n".join(lines) + "\n"
