"""Pipeline stage orchestration over a resumable working directory.

Each stage reads the previous stage's artifacts from the workdir, writes its
own under ``workdir/<stage>/``, and drops a ``stage.json`` manifest (input
hashes, config echo, output hashes, timings). Primary artifacts are written
canonically, so re-running a stage with unchanged inputs reproduces them
byte-identically; only the manifest's timestamps differ.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from .annotation import load_store, serve_forever
from .centrality import (
    betweenness_centrality,
    degree_centrality,
    forward_degree_centrality,
    save_scores,
    top_k_table,
)
from .embedding import EmbeddingProviderConfig, RetryPolicy, embed_batch
from .errors import StageError
from .graph import TelegraphGraph, build_graph, read_records
from .graph_io import file_sha256, load_graph, save_graph
from .kb import kb_stats, load_claims, save_claims
from .metrics import evaluate_probabilities
from .sage import (
    GraphWiring,
    ModelConfig,
    SageModel,
    TextBaseline,
    TrainConfig,
    build_node_features,
    history_lines,
    train_model,
    train_text_baseline,
)
from .weaklabel import load_pairs, match_messages, save_pairs, select_training_labels

STAGES = (
    "ingest",
    "build-kb",
    "embed",
    "match",
    "train",
    "evaluate",
    "centrality",
    "serve-annotation",
)


@dataclass
class PipelineConfig:
    workdir: str
    messages_path: Optional[str] = None
    claims_path: Optional[str] = None
    threshold: float = 0.7
    include_counts: bool = True
    embedding: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    centrality: dict = field(default_factory=dict)
    annotation_port: int = 8799
    annotation_token: Optional[str] = None

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise StageError(f"cannot read config {path}: {exc}") from exc
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise StageError(f"unknown config keys: {sorted(unknown)}")
        if "workdir" not in obj:
            raise StageError("config must set workdir")
        return cls(**obj)

    def embedding_config(self) -> EmbeddingProviderConfig:
        kwargs = dict(self.embedding)
        retry = kwargs.pop("retry", None)
        if retry is not None:
            kwargs["retry"] = RetryPolicy(**retry)
        return EmbeddingProviderConfig(**kwargs)

    def model_config(self) -> ModelConfig:
        return ModelConfig(**self.model)

    def train_config(self) -> TrainConfig:
        return TrainConfig(**self.train)

    def stage_dir(self, stage: str) -> Path:
        return Path(self.workdir) / stage


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise StageError(
            f"missing artifact {path}; run the '{produced_by}' stage first"
        )
    return path


def _canonical_json(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def _write_manifest(
    stage: str,
    stage_dir: Path,
    config_echo: dict,
    inputs: dict[str, str],
    started: float,
) -> dict:
    outputs = {}
    for child in sorted(stage_dir.rglob("*")):
        if child.is_file() and child.name != "stage.json":
            outputs[str(child.relative_to(stage_dir))] = file_sha256(child)
    manifest = {
        "stage": stage,
        "inputs": inputs,
        "config": config_echo,
        "outputs": outputs,
        "started_at": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "finished_at": datetime.now(tz=timezone.utc).isoformat(),
        "duration_seconds": time.time() - started,
    }
    (stage_dir / "stage.json").write_text(_canonical_json(manifest), encoding="utf-8")
    return manifest


def _node_texts(graph: TelegraphGraph) -> dict[str, str]:
    texts = {m.message_id: m.text for m in graph.messages.values()}
    for c in graph.channels.values():
        texts[c.channel_id] = f"{c.name}\n\n{c.description}".strip()
    return texts


def _save_embeddings(vectors: dict[str, np.ndarray], path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node_id in sorted(vectors):
            fh.write(
                json.dumps(
                    {"id": node_id, "vector": [float(x) for x in vectors[node_id]]},
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
                + "\n"
            )


def _load_embeddings(path: Path) -> dict[str, np.ndarray]:
    vectors = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        obj = json.loads(line)
        vectors[obj["id"]] = np.asarray(obj["vector"], dtype=np.float64)
    return vectors


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_ingest(config: PipelineConfig) -> dict:
    started = time.time()
    if not config.messages_path:
        raise StageError("config.messages_path is required for the ingest stage")
    source = _require(Path(config.messages_path), "export preparation")
    stage_dir = config.stage_dir("ingest")
    stage_dir.mkdir(parents=True, exist_ok=True)

    parse_errors = []
    objects = []
    for lineno, obj, error in read_records(source):
        if error is not None:
            parse_errors.append(f"line {lineno}: {error}")
        else:
            objects.append(obj)
    graph, report = build_graph(objects)
    report.errors = parse_errors + report.errors
    report.total_records += len(parse_errors)
    save_graph(graph, stage_dir / "graph")
    (stage_dir / "ingest_report.json").write_text(
        _canonical_json(report.to_record()), encoding="utf-8"
    )
    return _write_manifest(
        "ingest",
        stage_dir,
        {"messages_path": str(source)},
        {str(source): file_sha256(source)},
        started,
    )


def stage_build_kb(config: PipelineConfig) -> dict:
    started = time.time()
    if not config.claims_path:
        raise StageError("config.claims_path is required for the build-kb stage")
    source = _require(Path(config.claims_path), "export preparation")
    stage_dir = config.stage_dir("build-kb")
    stage_dir.mkdir(parents=True, exist_ok=True)
    kb = load_claims(source)
    save_claims(kb, stage_dir / "kb.jsonl")
    (stage_dir / "kb_stats.json").write_text(_canonical_json(kb_stats(kb)), encoding="utf-8")
    (stage_dir / "kb_errors.json").write_text(_canonical_json(kb.errors), encoding="utf-8")
    return _write_manifest(
        "build-kb",
        stage_dir,
        {"claims_path": str(source)},
        {str(source): file_sha256(source)},
        started,
    )


def stage_embed(config: PipelineConfig) -> dict:
    started = time.time()
    graph_dir = _require(config.stage_dir("ingest") / "graph", "ingest")
    kb_path = _require(config.stage_dir("build-kb") / "kb.jsonl", "build-kb")
    stage_dir = config.stage_dir("embed")
    stage_dir.mkdir(parents=True, exist_ok=True)
    graph = load_graph(graph_dir)
    kb = load_claims(kb_path)
    texts = _node_texts(graph)
    for claim in kb.claims:
        texts[claim.claim_id] = claim.text
    ids = sorted(texts)
    provider = config.embedding_config()
    vectors = embed_batch(provider, [texts[i] for i in ids])
    _save_embeddings(dict(zip(ids, vectors)), stage_dir / "embeddings.jsonl")
    return _write_manifest(
        "embed",
        stage_dir,
        {"provider": {**config.embedding, "mode": provider.mode, "dimension": provider.dimension}},
        {
            "ingest/graph": file_sha256(graph_dir / "manifest.json"),
            "build-kb/kb.jsonl": file_sha256(kb_path),
        },
        started,
    )


def stage_match(config: PipelineConfig) -> dict:
    started = time.time()
    graph_dir = _require(config.stage_dir("ingest") / "graph", "ingest")
    kb_path = _require(config.stage_dir("build-kb") / "kb.jsonl", "build-kb")
    embeddings_path = _require(config.stage_dir("embed") / "embeddings.jsonl", "embed")
    stage_dir = config.stage_dir("match")
    stage_dir.mkdir(parents=True, exist_ok=True)
    graph = load_graph(graph_dir)
    kb = load_claims(kb_path)
    embeddings = _load_embeddings(embeddings_path)
    result = match_messages(
        sorted(graph.messages.values(), key=lambda m: m.message_id),
        kb,
        embeddings,
        threshold=config.threshold,
    )
    save_pairs(result.pairs, stage_dir / "pairs.jsonl")
    (stage_dir / "match_report.json").write_text(
        _canonical_json({"pairs": len(result.pairs), "errors": result.errors}),
        encoding="utf-8",
    )
    return _write_manifest(
        "match",
        stage_dir,
        {"threshold": config.threshold},
        {
            "ingest/graph": file_sha256(graph_dir / "manifest.json"),
            "build-kb/kb.jsonl": file_sha256(kb_path),
            "embed/embeddings.jsonl": file_sha256(embeddings_path),
        },
        started,
    )


def _load_training_inputs(config: PipelineConfig):
    graph_dir = _require(config.stage_dir("ingest") / "graph", "ingest")
    embeddings_path = _require(config.stage_dir("embed") / "embeddings.jsonl", "embed")
    pairs_path = _require(config.stage_dir("match") / "pairs.jsonl", "match")
    graph = load_graph(graph_dir)
    embeddings = _load_embeddings(embeddings_path)
    pairs = load_pairs(pairs_path)
    features = build_node_features(graph, embeddings, include_counts=config.include_counts)
    return graph, embeddings, pairs, features, (graph_dir, embeddings_path, pairs_path)


def stage_train(config: PipelineConfig) -> dict:
    started = time.time()
    graph, embeddings, pairs, features, inputs = _load_training_inputs(config)
    stage_dir = config.stage_dir("train")
    stage_dir.mkdir(parents=True, exist_ok=True)
    train_config = config.train_config()
    labels = select_training_labels(pairs, train_config.label_source)
    gnn = train_model(graph, features, labels, config.model_config(), train_config)
    message_embeddings = {m: embeddings[m] for m in labels if m in embeddings}
    text = train_text_baseline(message_embeddings, labels, train_config, graph=graph)
    gnn.model.save(stage_dir / "gnn.ckpt.json")
    text.model.save(stage_dir / "text.ckpt.json")
    (stage_dir / "gnn_history.jsonl").write_text(history_lines(gnn.history), encoding="utf-8")
    (stage_dir / "text_history.jsonl").write_text(history_lines(text.history), encoding="utf-8")
    (stage_dir / "splits.json").write_text(
        _canonical_json(
            {
                "gnn": asdict(gnn.splits),
                "text": asdict(text.splits),
                "labels": {m: int(v) for m, v in sorted(gnn.labels.items())},
            }
        ),
        encoding="utf-8",
    )
    graph_dir, embeddings_path, pairs_path = inputs
    return _write_manifest(
        "train",
        stage_dir,
        {"model": config.model, "train": config.train, "include_counts": config.include_counts},
        {
            "ingest/graph": file_sha256(graph_dir / "manifest.json"),
            "embed/embeddings.jsonl": file_sha256(embeddings_path),
            "match/pairs.jsonl": file_sha256(pairs_path),
        },
        started,
    )


def stage_evaluate(config: PipelineConfig) -> dict:
    started = time.time()
    graph, embeddings, pairs, features, inputs = _load_training_inputs(config)
    train_dir = config.stage_dir("train")
    gnn_path = _require(train_dir / "gnn.ckpt.json", "train")
    text_path = _require(train_dir / "text.ckpt.json", "train")
    splits_path = _require(train_dir / "splits.json", "train")
    stage_dir = config.stage_dir("evaluate")
    stage_dir.mkdir(parents=True, exist_ok=True)

    saved = json.loads(splits_path.read_text(encoding="utf-8"))
    labels = {m: int(v) for m, v in saved["labels"].items()}
    rows = []

    gnn = SageModel.load(gnn_path)
    wiring = GraphWiring(graph)
    test_ids = saved["gnn"]["test"]
    probs = gnn.predict_proba(wiring, features, test_ids, sample_seed=0)
    report = evaluate_probabilities(probs, [labels[m] for m in test_ids])
    rows.append({"model": "gnn", "split": "test", **report.to_record()})

    text = TextBaseline.load(text_path)
    text_test = saved["text"]["test"]
    x = np.stack([embeddings[m] for m in text_test])
    report = evaluate_probabilities(text.predict_proba(x), [labels[m] for m in text_test])
    rows.append({"model": "text", "split": "test", **report.to_record()})

    with open(stage_dir / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, separators=(",", ":"), sort_keys=True) + "\n")
    graph_dir, embeddings_path, pairs_path = inputs
    return _write_manifest(
        "evaluate",
        stage_dir,
        {"include_counts": config.include_counts},
        {
            "ingest/graph": file_sha256(graph_dir / "manifest.json"),
            "embed/embeddings.jsonl": file_sha256(embeddings_path),
            "train/gnn.ckpt.json": file_sha256(gnn_path),
            "train/text.ckpt.json": file_sha256(text_path),
        },
        started,
    )


def stage_centrality(config: PipelineConfig) -> dict:
    started = time.time()
    graph_dir = _require(config.stage_dir("ingest") / "graph", "ingest")
    stage_dir = config.stage_dir("centrality")
    stage_dir.mkdir(parents=True, exist_ok=True)
    graph = load_graph(graph_dir)
    options = dict(config.centrality)
    top_k = int(options.get("top_k", 10))

    degree = degree_centrality(graph)
    save_scores(degree, stage_dir / "degree.jsonl")
    (stage_dir / "degree_top.txt").write_text(top_k_table(graph, degree, top_k), encoding="utf-8")

    forward = forward_degree_centrality(graph)
    save_scores(forward, stage_dir / "forward_degree.jsonl")
    (stage_dir / "forward_degree_top.txt").write_text(
        top_k_table(graph, forward, top_k), encoding="utf-8"
    )

    if options.get("betweenness", True):
        between = betweenness_centrality(
            graph,
            checkpoint_path=stage_dir / "betweenness.checkpoint.json"
            if options.get("checkpoint_every")
            else None,
            checkpoint_every=int(options.get("checkpoint_every", 0)),
        )
        save_scores(between, stage_dir / "betweenness.jsonl")
        (stage_dir / "betweenness_top.txt").write_text(
            top_k_table(graph, between, top_k), encoding="utf-8"
        )
    return _write_manifest(
        "centrality",
        stage_dir,
        options,
        {"ingest/graph": file_sha256(graph_dir / "manifest.json")},
        started,
    )


def stage_serve_annotation(config: PipelineConfig) -> dict:
    pairs_path = _require(config.stage_dir("match") / "pairs.jsonl", "match")
    graph_dir = _require(config.stage_dir("ingest") / "graph", "ingest")
    kb_path = _require(config.stage_dir("build-kb") / "kb.jsonl", "build-kb")
    graph = load_graph(graph_dir)
    kb = load_claims(kb_path)
    stage_dir = config.stage_dir("serve-annotation")
    stage_dir.mkdir(parents=True, exist_ok=True)
    store = load_store(
        pairs_path,
        audit_path=stage_dir / "audit.jsonl",
        message_texts={m.message_id: m.text for m in graph.messages.values()},
        kb=kb,
    )
    serve_forever(store, config.annotation_port, config.annotation_token)
    return {"stage": "serve-annotation"}


_STAGE_FUNCTIONS = {
    "ingest": stage_ingest,
    "build-kb": stage_build_kb,
    "embed": stage_embed,
    "match": stage_match,
    "train": stage_train,
    "evaluate": stage_evaluate,
    "centrality": stage_centrality,
    "serve-annotation": stage_serve_annotation,
}


def run_stage(stage: str, config: PipelineConfig) -> dict:
    """Run one pipeline stage; stages are idempotent given identical inputs."""
    if stage not in _STAGE_FUNCTIONS:
        raise StageError(f"unknown stage {stage!r}; valid stages: {', '.join(STAGES)}")
    return _STAGE_FUNCTIONS[stage](config)


def run_all(config: PipelineConfig) -> list[dict]:
    """Run every batch stage in order (everything except serve-annotation)."""
    return [run_stage(stage, config) for stage in STAGES if stage != "serve-annotation"]
