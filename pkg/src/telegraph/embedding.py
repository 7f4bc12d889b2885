"""Embedding provider: remote batch client plus a deterministic test embedder.

Production embeddings come from an external multilingual sentence-embedding
service (1024-dim by default) behind a single POST endpoint:

    POST <endpoint>  {"texts": [...]}  ->  {"vectors": [[...], ...], "dimension": D}

The deterministic mode is a pure function of the text bytes (hash-seeded
gaussian expansion, then L2 normalization) so tests get stable vectors with
no network and no model download.
"""

from __future__ import annotations

import hashlib
import json
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ProviderError, ShapeError, UndefinedSimilarityError

DEFAULT_DIMENSION = 1024


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 3
    backoff_seconds: float = 0.5


@dataclass(frozen=True)
class EmbeddingProviderConfig:
    mode: str = "deterministic_test"  # or "remote"
    endpoint: Optional[str] = None
    dimension: int = DEFAULT_DIMENSION
    batch_size: int = 32
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    normalize: bool = True
    token: Optional[str] = None
    timeout_seconds: float = 30.0

    def __post_init__(self):
        if self.mode not in ("remote", "deterministic_test"):
            raise ValueError(f"unknown provider mode {self.mode!r}")
        if self.mode == "remote" and not self.endpoint:
            raise ValueError("remote mode requires an endpoint")
        if self.dimension < 2:
            raise ValueError("dimension must be >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _deterministic_vector(text: str, dimension: int) -> np.ndarray:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "big")
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.standard_normal(dimension)


def _normalize_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    # a hash-expanded gaussian vector is all-zero with probability ~0; guard anyway
    norms[norms == 0.0] = 1.0
    return vectors / norms


def _post_batch(config: EmbeddingProviderConfig, texts: Sequence[str]) -> list[list[float]]:
    payload = json.dumps({"texts": list(texts)}).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if config.token:
        headers["Authorization"] = f"Bearer {config.token}"
    request = urllib.request.Request(config.endpoint, data=payload, headers=headers)
    last_error: Exception | None = None
    for attempt in range(config.retry.max_attempts):
        try:
            with urllib.request.urlopen(request, timeout=config.timeout_seconds) as response:
                body = json.loads(response.read().decode("utf-8"))
            vectors = body["vectors"]
            if len(vectors) != len(texts):
                raise ProviderError(
                    f"endpoint returned {len(vectors)} vectors for {len(texts)} texts",
                    range(len(texts)),
                )
            return vectors
        except ProviderError:
            raise
        except (urllib.error.URLError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
            last_error = exc
            if attempt + 1 < config.retry.max_attempts:
                time.sleep(config.retry.backoff_seconds * (2**attempt))
    raise ProviderError(
        f"embedding endpoint failed after {config.retry.max_attempts} attempts: {last_error}",
        range(len(texts)),
    )


def embed_batch(config: EmbeddingProviderConfig, texts: Sequence[str]) -> list[np.ndarray]:
    """Embed texts in order; one vector per input.

    Empty strings are embedded like any other text. In remote mode the input
    is chunked by config.batch_size and each chunk retried per the policy;
    a chunk that keeps failing raises ProviderError carrying the absolute
    indices of the failed texts.
    """
    if config.mode == "deterministic_test":
        out = np.empty((len(texts), config.dimension), dtype=np.float64)
        for i, text in enumerate(texts):
            out[i] = _deterministic_vector(text, config.dimension)
    else:
        rows: list[list[float]] = []
        for start in range(0, len(texts), config.batch_size):
            chunk = texts[start : start + config.batch_size]
            try:
                rows.extend(_post_batch(config, chunk))
            except ProviderError as exc:
                raise ProviderError(str(exc), [start + i for i in exc.failed_indices]) from exc
        out = np.asarray(rows, dtype=np.float64)
        if out.size and out.shape[1] != config.dimension:
            raise ProviderError(
                f"endpoint returned dimension {out.shape[1]}, configured {config.dimension}",
                range(len(texts)),
            )
        if not len(texts):
            out = np.empty((0, config.dimension), dtype=np.float64)
    if config.normalize and len(texts):
        out = _normalize_rows(out)
    return [out[i] for i in range(len(texts))]


def cosine_similarity(u: np.ndarray, v: np.ndarray) -> float:
    """dot(u,v) / (|u||v|), clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise UndefinedSimilarityError("cosine similarity undefined for a zero vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))
