"""Shared fixtures: seeded record factories and the canonical seed-42 corpus."""

from __future__ import annotations

import numpy as np
import pytest

from latte import EmbeddedRecord, Role, SynthSpec, build_index, gen_corpus

# Canonical corpus used by the acceptance suite; regression baselines in
# test_acceptance.py were measured against exactly this specification.
ACCEPTANCE_SPEC = SynthSpec(
    seed=42,
    doc_count=1000,
    query_count=50,
    dim=16,
    tokens_per_doc=(8, 12),
    tokens_per_query=(3, 6),
    attention_signal_strength=0.9,
    relevant_per_query=1,
)


def rand_record(
    rng: np.random.Generator,
    record_id: str,
    role: Role,
    m: int,
    dim: int,
    *,
    with_mask: bool = False,
    max_attention: float = 1.5,
) -> EmbeddedRecord:
    """Valid random record: unit rows, non-negative attention."""
    emb = rng.standard_normal((m, dim))
    emb /= np.linalg.norm(emb, axis=1, keepdims=True)
    attention = rng.uniform(0.0, max_attention, size=m)
    keep_mask = None
    if with_mask:
        keep_mask = rng.uniform(size=m) < 0.8
        if not keep_mask.any():
            keep_mask[int(rng.integers(m))] = True
    return EmbeddedRecord(
        id=record_id,
        role=role,
        token_embeddings=emb.astype(np.float32),
        attention=attention.astype(np.float32),
        content_len=int(rng.integers(1, m + 1)),
        keep_mask=keep_mask,
    )


def seeded_pairs(count: int = 200, dim: int = 8, seed: int = 1234):
    """Deterministic (query, document) pairs for property tests."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(count):
        n = int(rng.integers(2, 12))
        m = int(rng.integers(2, 24))
        query = rand_record(rng, f"pq{i}", Role.QUERY, n, dim)
        doc = rand_record(rng, f"pd{i}", Role.DOCUMENT, m, dim)
        pairs.append((query, doc))
    return pairs


@pytest.fixture(scope="session")
def seed42_corpus():
    return gen_corpus(ACCEPTANCE_SPEC)


@pytest.fixture(scope="session")
def seed42_index(seed42_corpus):
    docs, _, _ = seed42_corpus
    return build_index(docs)


@pytest.fixture(scope="session")
def seed42_centroid_index(seed42_corpus):
    docs, _, _ = seed42_corpus
    return build_index(docs, centroid_count=64, seed=0)
