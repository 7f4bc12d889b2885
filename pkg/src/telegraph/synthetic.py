"""Planted synthetic benchmarks with known label-generating structure.

Three generators, one per experimental hypothesis:

* planted_structure_benchmark — channels form two communities, message labels
  follow the channel's community, text embeddings carry only a weak label
  signal under heavy noise, forwards stay mostly within a community. A model
  that pools neighborhood information can denoise; a text-only model cannot.
* text_only_benchmark — labels are drawn per message and written strongly
  into the embedding; channel membership and forwarding are label-free.
  Structure adds nothing, so graph and text models should tie.
* count_signal_benchmark — embeddings are pure noise and labels only move the
  view-count distribution, so the count feature slot is the whole signal.

All randomness is derived from the benchmark seed; generators emit ingest
records and run them through the real graph builder, so duplicates and
FORWARDED edges follow production semantics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import IngestRecord, TelegraphGraph, build_graph


@dataclass
class Benchmark:
    name: str
    graph: TelegraphGraph
    embeddings: dict[str, np.ndarray]
    labels: dict[str, int]  # original messages only; 1 = factual


def _channel_records(rng: np.random.Generator, n_channels: int) -> dict[str, dict]:
    meta = {}
    for c in range(n_channels):
        meta[f"ch{c:04d}"] = {
            "channel_name": f"channel {c:04d}",
            "channel_subscriber_count": int(rng.lognormal(6.0, 1.5)),
        }
    return meta


def _embed(rng: np.random.Generator, dimension: int, direction: np.ndarray, signal: float) -> np.ndarray:
    return signal * direction + rng.standard_normal(dimension)


def _assemble(
    name: str,
    rng: np.random.Generator,
    n_channels: int,
    n_messages: int,
    dimension: int,
    community_of_channel,
    label_of_message,
    forward_fraction: float,
    same_community_forward: float,
    text_signal: float,
    view_counts_from_label,
) -> Benchmark:
    channel_ids = [f"ch{c:04d}" for c in range(n_channels)]
    channel_meta = _channel_records(rng, n_channels)
    direction = rng.standard_normal(dimension)
    direction /= np.linalg.norm(direction)

    records: list[IngestRecord] = []
    labels: dict[str, int] = {}
    embeddings: dict[str, np.ndarray] = {}
    message_channel: dict[str, str] = {}

    for i in range(n_messages):
        message_id = f"m{i:05d}"
        channel_pos = int(rng.integers(0, n_channels))
        channel_id = channel_ids[channel_pos]
        label = label_of_message(rng, channel_pos)
        labels[message_id] = label
        message_channel[message_id] = channel_id
        sign = 1.0 if label == 1 else -1.0
        embeddings[message_id] = _embed(rng, dimension, sign * direction, text_signal)
        records.append(
            IngestRecord(
                message_id=message_id,
                channel_id=channel_id,
                text=f"synthetic message {i}",
                view_count=view_counts_from_label(rng, label),
                posted_at=1_600_000_000 + i,
                **channel_meta[channel_id],
            )
        )

    # forwarded duplicates: same text (same embedding), landing channel picked
    # inside or outside the origin's community
    channel_pos = {c: i for i, c in enumerate(channel_ids)}
    n_forwards = int(forward_fraction * n_messages)
    originals = [f"m{i:05d}" for i in range(n_messages)]
    for k in range(n_forwards):
        origin = originals[int(rng.integers(0, n_messages))]
        origin_pos = channel_pos[message_channel[origin]]
        community = community_of_channel(origin_pos)
        if rng.random() < same_community_forward:
            candidates = [
                c for c in range(n_channels) if community_of_channel(c) == community and c != origin_pos
            ]
        else:
            candidates = [c for c in range(n_channels) if community_of_channel(c) != community]
        if not candidates:
            continue
        destination = channel_ids[candidates[int(rng.integers(0, len(candidates)))]]
        duplicate_id = f"f{k:05d}"
        embeddings[duplicate_id] = embeddings[origin]
        records.append(
            IngestRecord(
                message_id=duplicate_id,
                channel_id=destination,
                text=f"forward of {origin}",
                view_count=view_counts_from_label(rng, labels[origin]),
                posted_at=1_600_500_000 + k,
                forwarded_from_message_id=origin,
                **channel_meta[destination],
            )
        )

    for channel_id in channel_ids:
        embeddings[channel_id] = rng.standard_normal(dimension)

    graph, report = build_graph(records)
    assert not report.errors, report.errors
    return Benchmark(name=name, graph=graph, embeddings=embeddings, labels=labels)


def planted_structure_benchmark(
    seed: int,
    n_channels: int = 200,
    n_messages: int = 2000,
    dimension: int = 16,
    text_signal: float = 0.5,
    label_flip: float = 0.02,
) -> Benchmark:
    """Structure-correlated labels under noisy text; graph models should win."""
    rng = np.random.default_rng([seed, 0xA11CE])

    def community(channel_pos: int) -> int:
        return channel_pos % 2

    def label(r: np.random.Generator, channel_pos: int) -> int:
        value = 1 if community(channel_pos) == 0 else 0
        if r.random() < label_flip:
            value = 1 - value
        return value

    def views(r: np.random.Generator, _label: int) -> int:
        return int(r.lognormal(4.0, 1.0))

    return _assemble(
        "planted_structure",
        rng,
        n_channels,
        n_messages,
        dimension,
        community,
        label,
        forward_fraction=0.5,
        same_community_forward=0.95,
        text_signal=text_signal,
        view_counts_from_label=views,
    )


def text_only_benchmark(
    seed: int,
    n_channels: int = 200,
    n_messages: int = 2000,
    dimension: int = 16,
    text_signal: float = 3.0,
) -> Benchmark:
    """Negative control: the label signal lives entirely in the text."""
    rng = np.random.default_rng([seed, 0xB0B])

    def community(channel_pos: int) -> int:
        return 0  # one community: structure carries no label information

    def label(r: np.random.Generator, _channel_pos: int) -> int:
        return int(r.random() < 0.5)

    def views(r: np.random.Generator, _label: int) -> int:
        return int(r.lognormal(4.0, 1.0))

    return _assemble(
        "text_only",
        rng,
        n_channels,
        n_messages,
        dimension,
        community,
        label,
        forward_fraction=0.3,
        same_community_forward=1.0,
        text_signal=text_signal,
        view_counts_from_label=views,
    )


def count_signal_benchmark(
    seed: int,
    n_channels: int = 200,
    n_messages: int = 2000,
    dimension: int = 16,
) -> Benchmark:
    """Labels move only the view-count distribution; embeddings are noise."""
    rng = np.random.default_rng([seed, 0xC0117])

    def community(channel_pos: int) -> int:
        return 0

    def label(r: np.random.Generator, _channel_pos: int) -> int:
        return int(r.random() < 0.5)

    def views(r: np.random.Generator, label_value: int) -> int:
        # factual messages get systematically fewer views
        mu = 3.0 if label_value == 1 else 6.0
        return int(r.lognormal(mu, 0.7))

    return _assemble(
        "count_signal",
        rng,
        n_channels,
        n_messages,
        dimension,
        community,
        label,
        forward_fraction=0.2,
        same_community_forward=1.0,
        text_signal=0.0,
        view_counts_from_label=views,
    )
