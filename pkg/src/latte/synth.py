"""Synthetic corpora with planted relevance, plus an independent oracle.

The generator plants, for every query, one latent topic direction. The
query carries a high-attention token near its topic; its relevant
documents carry an equally-near token with full attention, while decoy
documents carry an equally-near token whose attention (like all filler
attention) is scaled by (1 - attention_signal_strength). Cosine geometry
therefore cannot separate relevant documents from decoys, attention can,
and the separation grows with the signal strength.

Randomness comes from NumPy's default generator (the PCG64 bit generator
seeded through SeedSequence), so identical seeds reproduce identical
corpora byte for byte; the draw order is documented in gen_corpus.

oracle_rank is a deliberately naive, loop-based reimplementation of the
scoring rule in pure Python float64 arithmetic. It shares no code with the
scoring module and exists solely to cross-check it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from operator import mul
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DimensionMismatchError,
    EmptyKeptTokensError,
    RoleMismatchError,
)
from .interchange import EmbeddedRecord, Qrels, Role
from .scoring import ScoringConfig

# Attention layout of generated corpora. Planted topic tokens in relevant
# documents carry _DOC_PLANTED_ATTENTION; every other document token
# (fillers everywhere, planted tokens of decoys) carries the same value
# scaled by (1 - strength), which makes strength 0 perfectly uniform.
# Filler tokens on both sides sit near a small shared background vocabulary
# so filler matches contribute almost identically to every document and the
# ranking signal rides on the planted topic tokens.
_QUERY_TOPIC_ATTENTION = 0.4
_QUERY_FILLER_ATTENTION = 0.1
_DOC_PLANTED_ATTENTION = 2.0
_QUERY_TOPIC_NOISE = 0.03
_DOC_PLANTED_NOISE = 0.05
_BACKGROUND_VOCAB = 4
_BACKGROUND_NOISE = 0.08


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic corpus."""

    seed: int
    doc_count: int
    query_count: int
    dim: int
    tokens_per_doc: tuple[int, int]
    tokens_per_query: tuple[int, int]
    attention_signal_strength: float = 0.9
    relevant_per_query: int = 1

    def __post_init__(self) -> None:
        if self.doc_count < 1 or self.query_count < 1:
            raise ConfigError("doc_count and query_count must be positive")
        if self.dim < 2:
            raise ConfigError(f"dim must be at least 2, got {self.dim}")
        for name, (lo, hi) in (
            ("tokens_per_doc", self.tokens_per_doc),
            ("tokens_per_query", self.tokens_per_query),
        ):
            if lo < 1 or hi < lo:
                raise ConfigError(f"{name} range ({lo}, {hi}) is invalid")
        if not (0.0 <= self.attention_signal_strength <= 1.0):
            raise ConfigError("attention_signal_strength must lie in [0, 1]")
        if self.relevant_per_query < 1:
            raise ConfigError("relevant_per_query must be positive")
        if self.relevant_per_query * self.query_count > self.doc_count:
            raise ConfigError("not enough documents for the requested relevant docs")
        if self.doc_count > 10**6 or self.query_count > 10**4:
            raise ConfigError("generator ids support up to 1e6 docs and 1e4 queries")


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


def _near(topic: np.ndarray, noise: float, rng: np.random.Generator) -> np.ndarray:
    vector = topic + noise * rng.standard_normal(topic.shape[0])
    return vector / np.linalg.norm(vector)


def gen_corpus(
    spec: SynthSpec,
) -> tuple[list[EmbeddedRecord], list[EmbeddedRecord], Qrels]:
    """Generate (documents, queries, qrels), deterministic per seed.

    Draw order: one topic matrix, one background vocabulary, then per query
    (token count, topic token, filler background picks and offsets,
    position permutation), then per document in id order (token count,
    planted token, filler background picks and offsets, position
    permutation). Documents 0 .. query_count*relevant_per_query-1 are the
    relevant ones (doc i belongs to query i // relevant_per_query); every
    later document is a decoy for query (i - relevant) % query_count.
    """
    rng = np.random.default_rng(spec.seed)
    topics = _unit_rows(rng.standard_normal((spec.query_count, spec.dim)))
    backgrounds = _unit_rows(rng.standard_normal((_BACKGROUND_VOCAB, spec.dim)))

    def filler_tokens(count: int) -> np.ndarray:
        picks = rng.integers(0, _BACKGROUND_VOCAB, size=count)
        tokens = np.empty((count, spec.dim))
        for t in range(count):
            tokens[t] = _near(backgrounds[picks[t]], _BACKGROUND_NOISE, rng)
        return tokens

    queries: list[EmbeddedRecord] = []
    for qi in range(spec.query_count):
        lo, hi = spec.tokens_per_query
        n = int(rng.integers(lo, hi + 1))
        tokens = np.empty((n, spec.dim))
        tokens[0] = _near(topics[qi], _QUERY_TOPIC_NOISE, rng)
        tokens[1:] = filler_tokens(n - 1)
        attention = np.full(n, _QUERY_FILLER_ATTENTION)
        attention[0] = _QUERY_TOPIC_ATTENTION
        order = rng.permutation(n)
        queries.append(
            EmbeddedRecord(
                id=f"q{qi:04d}",
                role=Role.QUERY,
                token_embeddings=tokens[order].astype(np.float32),
                attention=attention[order].astype(np.float32),
                content_len=n,
            )
        )

    relevant_total = spec.query_count * spec.relevant_per_query
    low_attention = _DOC_PLANTED_ATTENTION * (1.0 - spec.attention_signal_strength)
    documents: list[EmbeddedRecord] = []
    qrel_entries: dict[str, dict[str, int]] = {}
    for di in range(spec.doc_count):
        if di < relevant_total:
            query_of_doc = di // spec.relevant_per_query
            planted_attention = _DOC_PLANTED_ATTENTION
        else:
            query_of_doc = (di - relevant_total) % spec.query_count
            planted_attention = low_attention
        lo, hi = spec.tokens_per_doc
        m = int(rng.integers(lo, hi + 1))
        tokens = np.empty((m, spec.dim))
        tokens[0] = _near(topics[query_of_doc], _DOC_PLANTED_NOISE, rng)
        tokens[1:] = filler_tokens(m - 1)
        attention = np.full(m, low_attention)
        attention[0] = planted_attention
        order = rng.permutation(m)
        doc_id = f"d{di:06d}"
        documents.append(
            EmbeddedRecord(
                id=doc_id,
                role=Role.DOCUMENT,
                token_embeddings=tokens[order].astype(np.float32),
                attention=attention[order].astype(np.float32),
                content_len=m,
            )
        )
        if di < relevant_total:
            qrel_entries.setdefault(f"q{query_of_doc:04d}", {})[doc_id] = 1

    return documents, queries, Qrels(qrel_entries)


# --- independent oracle ------------------------------------------------------


def _kept_rows(record: EmbeddedRecord) -> tuple[list[list[float]], list[float]]:
    # tolist() widens float32 to Python float exactly.
    rows = record.token_embeddings.tolist()
    attention = record.attention.tolist()
    mask = record.keep_mask
    if mask is None:
        return rows, attention
    kept = [i for i in range(record.m) if bool(mask[i])]
    return [rows[i] for i in kept], [attention[i] for i in kept]


def oracle_rank(
    documents: Sequence[EmbeddedRecord],
    query: EmbeddedRecord,
    config: ScoringConfig,
) -> list[tuple[str, float]]:
    """Reference ranking of all documents, naive loops in pure float64.

    Per kept query token: walk every kept document token, take the clamped
    dot product (exactly summed with math.fsum), keep the first maximum,
    and multiply in the attention terms the mode asks for. Ties in the
    final ordering break by ascending doc id, as in the engine.
    """
    if query.role is not Role.QUERY:
        raise RoleMismatchError(f"record '{query.id}' is not a query")
    mode = config.mode.value
    use_query_attention = mode in ("query_only", "both")
    use_doc_attention = mode in ("doc_only", "both")
    q_rows, q_attention = _kept_rows(query)

    ranking: list[tuple[str, float]] = []
    for doc in documents:
        if doc.role is not Role.DOCUMENT:
            raise RoleMismatchError(f"record '{doc.id}' is not a document")
        if doc.dim != query.dim:
            raise DimensionMismatchError(
                f"query '{query.id}' dim {query.dim} != document '{doc.id}' dim {doc.dim}"
            )
        d_rows, d_attention = _kept_rows(doc)
        if not d_rows:
            raise EmptyKeptTokensError(f"document '{doc.id}' has no kept tokens")
        if config.delta_override is not None:
            delta_eff = config.delta_override
        else:
            delta_eff = min(1.0, doc.content_len / config.clip_len)
        contributions = []
        for q_row, q_att in zip(q_rows, q_attention):
            best = -math.inf
            best_j = -1
            for j, d_row in enumerate(d_rows):
                value = math.fsum(map(mul, q_row, d_row))
                if value > 1.0:
                    value = 1.0
                elif value < -1.0:
                    value = -1.0
                if value > best:
                    best = value
                    best_j = j
            q_mult = math.exp(q_att) if use_query_attention else 1.0
            d_mult = math.exp(delta_eff * d_attention[best_j]) if use_doc_attention else 1.0
            contributions.append(q_mult * best * d_mult)
        ranking.append((doc.id, math.fsum(contributions)))
    ranking.sort(key=lambda pair: (-pair[1], pair[0]))
    return ranking


# --- toy ranking fixture -----------------------------------------------------

# Hand-built dim-4 records mirroring a query whose surface phrasing overlaps
# one document while its intent matches another. The axes read roughly as
# (study-ness, motion, person, function word). Committed as literal float32
# data, never recomputed. Verified orderings (see tests): plain MaxSim ranks
# toy-d2 > toy-d3 > toy-d1 (phrase overlap wins), attention-weighted scoring
# with delta 1 ranks toy-d1 > toy-d2 > toy-d3 (the intent match is boosted,
# the low-attention "studying" match is demoted), and zeroing all attention
# restores the plain ordering.
_TOY_RECORDS: tuple[tuple[str, str, tuple[tuple[float, ...], ...], tuple[float, ...]], ...] = (
    (
        "toy-q",
        "query",
        (
            (0.0, 0.0, 0.8983843326568604, 0.4392101466655731),                        # who
            (0.0, 0.09950371831655502, 0.0, 0.9950371980667114),                       # is
            (0.0, 0.9805806875228882, 0.0, 0.1961161345243454),                        # going
            (0.0, 0.2873478829860687, 0.0, 0.9578262567520142),                        # to
            (0.9916555881500244, 0.11899867653846741, 0.0, 0.04958277940750122),       # study
        ),
        (0.4, 0.05, 0.05, 0.05, 2.0),
    ),
    (
        "toy-d1",
        "document",
        (
            (0.0, 0.2854683995246887, 0.9515613913536072, 0.11418736726045609),        # alice
            (0.0, 0.09950371831655502, 0.0, 0.9950371980667114),                       # is
            (0.0, 0.34919777512550354, 0.29931238293647766, 0.8879600167274475),       # walking
            (0.0, 0.2873478829860687, 0.0, 0.9578262567520142),                        # to
            (0.5598852634429932, 0.10179731994867325, 0.30539196729660034, 0.7634798884391785),  # school
        ),
        (0.5, 0.05, 0.3, 0.05, 1.8),
    ),
    (
        "toy-d2",
        "document",
        (
            (0.0, 0.0, 0.97072833776474, 0.24018020927906036),                         # bob
            (0.0, 0.09950371831655502, 0.0, 0.9950371980667114),                       # is
            (0.0, 0.9805806875228882, 0.0, 0.1961161345243454),                        # going
            (0.0, 0.2873478829860687, 0.0, 0.9578262567520142),                        # to
            (0.12052543461322784, 0.4519703686237335, 0.0, 0.8838531374931335),        # buy
            (0.15094637870788574, 0.0, 0.2515772879123688, 0.9559937715530396),        # apples
        ),
        (0.8, 0.05, 0.05, 0.05, 1.5, 1.5),
    ),
    (
        "toy-d3",
        "document",
        (
            (0.05852057412266731, 0.6437262892723083, 0.4096440076828003, 0.6437262892723083),   # only
            (0.9699599146842957, 0.2424899786710739, 0.0, 0.01939919963479042),        # studying
            (0.0, 0.6288281679153442, 0.45732957124710083, 0.6288281679153442),        # makes
            (0.0, 0.3884635865688324, 0.8689317107200623, 0.3066817820072174),         # jack
            (0.32879796624183655, 0.16439898312091827, 0.6575959324836731, 0.6575959324836731),  # dull
            (0.14348894357681274, 0.41850942373275757, 0.7174447178840637, 0.538083553314209),   # boy
        ),
        (0.3, 0.05, 0.05, 0.3, 0.6, 0.6),
    ),
)


def toy_fixture() -> tuple[EmbeddedRecord, EmbeddedRecord, EmbeddedRecord, EmbeddedRecord]:
    """The committed ranking fixture: (query, d1, d2, d3)."""
    records = []
    for rec_id, role, rows, attention in _TOY_RECORDS:
        records.append(
            EmbeddedRecord(
                id=rec_id,
                role=Role.QUERY if role == "query" else Role.DOCUMENT,
                token_embeddings=np.array(rows, dtype=np.float32),
                attention=np.array(attention, dtype=np.float32),
                content_len=len(rows),
            )
        )
    return tuple(records)  # type: ignore[return-value]
