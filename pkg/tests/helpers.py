"""Shared fixture builders for pipeline-level tests.

The fixture corpus is engineered for the deterministic test embedder: a
message that quotes a claim verbatim scores exactly 1.0 against it, anything
else lands far below the 0.7 threshold, so the weak-label pair set is fully
predictable.
"""

import json

FACTUAL_CLAIMS = [
    "the municipal water supply passed all quality inspections this year",
    "the regional hospital opened a new cardiology wing in march",
]
MISINFO_CLAIMS = [
    "drinking bleach cures seasonal influenza within two days",
    "the moon landing footage was filmed in a basement studio",
]


def write_messages_export(path, n_channels=8, forwards=6):
    """Channels each hold one factual-quoting, one misinfo-quoting and one
    noise message; a few cross-channel forwards duplicate quoting messages."""
    records = []
    quoting = []
    for c in range(n_channels):
        channel = {
            "channel_id": f"c{c}",
            "channel_name": f"Channel {c}",
            "channel_description": f"fixture channel number {c}",
            "channel_subscriber_count": 100 * (c + 1),
        }
        factual_text = FACTUAL_CLAIMS[c % len(FACTUAL_CLAIMS)]
        misinfo_text = MISINFO_CLAIMS[c % len(MISINFO_CLAIMS)]
        records.append(
            {
                "message_id": f"m{c}_fact",
                "text": factual_text,
                "view_count": 50 + c,
                "posted_at": 1_700_000_000 + 10 * c,
                **channel,
            }
        )
        records.append(
            {
                "message_id": f"m{c}_mis",
                "text": misinfo_text,
                "view_count": 500 + c,
                "posted_at": 1_700_000_100 + 10 * c,
                **channel,
            }
        )
        records.append(
            {
                "message_id": f"m{c}_noise",
                "text": f"completely unrelated chatter number {c}",
                "view_count": 5,
                "posted_at": 1_700_000_200 + 10 * c,
                **channel,
            }
        )
        quoting.append((f"m{c}_fact", factual_text))
        quoting.append((f"m{c}_mis", misinfo_text))
    for k in range(forwards):
        origin_id, text = quoting[k % len(quoting)]
        destination = (k + 3) % n_channels
        records.append(
            {
                "message_id": f"fwd{k}",
                "text": text,
                "view_count": 10 + k,
                "posted_at": 1_700_001_000 + k,
                "forwarded_from_message_id": origin_id,
                "channel_id": f"c{destination}",
                "channel_name": f"Channel {destination}",
                "channel_description": f"fixture channel number {destination}",
                "channel_subscriber_count": 100 * (destination + 1),
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return records


def write_claims_export(path):
    claims = []
    for i, text in enumerate(FACTUAL_CLAIMS):
        claims.append(
            {
                "claim_id": f"news{i}",
                "text": text,
                "source_name": "Zeit",
                "source_kind": "newspaper",
            }
        )
    for i, text in enumerate(MISINFO_CLAIMS):
        claims.append(
            {
                "claim_id": f"check{i}",
                "text": text,
                "verdict": "misinformation",
                "source_name": "CORRECTIV",
                "source_kind": "fact_check",
                "url": f"https://factcheck.test/{i}",
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        for claim in claims:
            fh.write(json.dumps(claim, ensure_ascii=False) + "\n")
    return claims


def pipeline_config_dict(workdir, messages_path, claims_path, seed=0):
    return {
        "workdir": str(workdir),
        "messages_path": str(messages_path),
        "claims_path": str(claims_path),
        "threshold": 0.7,
        "include_counts": True,
        "embedding": {"mode": "deterministic_test", "dimension": 16},
        "model": {
            "num_layers": 2,
            "aggregator": "mean",
            "hidden_dim": 8,
            "fanout": 5,
            "seed": seed,
        },
        "train": {
            "epochs": 5,
            "seed": seed,
            "split_mode": "channel",
            "label_source": "weak",
        },
        "centrality": {"betweenness": True, "top_k": 5},
    }


def write_pipeline_config(tmp_path, seed=0):
    messages_path = tmp_path / "messages.jsonl"
    claims_path = tmp_path / "claims.jsonl"
    write_messages_export(messages_path)
    write_claims_export(claims_path)
    workdir = tmp_path / "work"
    config = pipeline_config_dict(workdir, messages_path, claims_path, seed=seed)
    config_path = tmp_path / "pipeline.json"
    config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
    return config_path, config
