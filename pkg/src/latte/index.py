"""Immutable retrieval index: exact top-k search plus centroid pruning.

The index keeps uncompressed float32 token embeddings in memory together
with per-document float64 views prepared once at build time, so every
search reuses the same arithmetic as score_pair and results are bitwise
reproducible under any worker count.

Candidate pruning is a deliberately simple two-stage scheme: documents are
first ranked by attention-free MaxSim against a spherical k-means centroid
table, then the top candidates are rescored exactly. Its only promise is
the measured recall against exact search.

On disk an index is a directory: ``docs.lir`` (LIRE records) plus an
optional ``centroids.bin`` sidecar:

    magic "LIC1" | K u32 | dim u32 | K*dim f32 centroids
    per document: token_count u32 | token_count u32 centroid assignments
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Sequence

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    DimensionMismatchError,
    DuplicateDocumentIdError,
    EmptyIndexError,
    FormatError,
    MissingCentroidTableError,
    RoleMismatchError,
    SearchError,
    TruncatedFileError,
)
from .interchange import EmbeddedRecord, Role, read_records, validate_record, write_records
from .scoring import (
    ScoringConfig,
    _doc_arrays,
    _match_components,
    _query_arrays,
    effective_delta,
)

CENTROID_MAGIC = b"LIC1"
_CENTROID_HEADER = struct.Struct("<4sII")
_U32 = struct.Struct("<I")

KMEANS_MAX_ITERATIONS = 25

DOCS_FILENAME = "docs.lir"
CENTROIDS_FILENAME = "centroids.bin"


@dataclass(frozen=True)
class CentroidTable:
    """Unit centroid vectors plus per-document per-token assignments."""

    centroids: np.ndarray                      # (K, dim) float32, unit rows
    assignments: tuple[np.ndarray, ...]        # one uint32 array per document

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])


@dataclass(frozen=True)
class SearchResult:
    """Top-k hits for one query, scores non-increasing, ties by doc_id."""

    query_id: str
    hits: tuple[tuple[str, float], ...]
    config: ScoringConfig


@dataclass
class _PreparedDoc:
    """Float64 views of one document, shared by every search."""

    doc_id: str
    emb: np.ndarray          # (kept, dim) float64
    att: np.ndarray          # (kept,) float64
    kept: np.ndarray         # kept token indices
    content_len: int


class RetrievalIndex:
    """Immutable collection of document records ready for search."""

    def __init__(
        self,
        documents: Sequence[EmbeddedRecord],
        centroid_table: CentroidTable | None,
    ):
        if not documents:
            raise EmptyIndexError("an index needs at least one document")
        dims = {d.dim for d in documents}
        if len(dims) != 1:
            raise DimensionMismatchError(f"documents carry mixed dims: {sorted(dims)}")
        ordinals: dict[str, int] = {}
        for position, doc in enumerate(documents):
            if doc.role is not Role.DOCUMENT:
                raise RoleMismatchError(f"record '{doc.id}' is not a document")
            validate_record(doc)
            if doc.id in ordinals:
                raise DuplicateDocumentIdError(f"duplicate document id '{doc.id}'")
            ordinals[doc.id] = position
        self._documents = tuple(documents)
        self._ordinals = ordinals
        self._dim = dims.pop()
        self._centroid_table = centroid_table
        self._prepared = []
        for doc in self._documents:
            kept, emb, att = _doc_arrays(doc)
            self._prepared.append(
                _PreparedDoc(
                    doc_id=doc.id,
                    emb=emb,
                    att=att,
                    kept=kept,
                    content_len=doc.content_len,
                )
            )
        if centroid_table is not None:
            self._centroids64 = centroid_table.centroids.astype(np.float64)
            self._kept_assignments = [
                np.unique(assign[prep.kept])
                for assign, prep in zip(centroid_table.assignments, self._prepared)
            ]

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def documents(self) -> tuple[EmbeddedRecord, ...]:
        return self._documents

    @property
    def centroid_table(self) -> CentroidTable | None:
        return self._centroid_table

    def __len__(self) -> int:
        return len(self._documents)

    def ordinal(self, doc_id: str) -> int:
        return self._ordinals[doc_id]

    def get(self, doc_id: str) -> EmbeddedRecord:
        return self._documents[self._ordinals[doc_id]]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._ordinals


def _total_tokens(docs: Sequence[EmbeddedRecord]) -> int:
    return sum(d.m for d in docs)


def _spherical_kmeans(points: np.ndarray, k: int, seed: int) -> np.ndarray:
    """Deterministic spherical k-means over unit vectors.

    Fixed cap of KMEANS_MAX_ITERATIONS assignment/update rounds; clusters
    that come out empty (or with a cancelling mean) are re-seeded from the
    point currently farthest from its own centroid, ties to the smallest
    point index. Returns unit float64 centroids.
    """
    n = points.shape[0]
    rng = np.random.default_rng(seed)
    centroids = points[np.sort(rng.choice(n, size=k, replace=False))].copy()
    for _ in range(KMEANS_MAX_ITERATIONS):
        sims = points @ centroids.T
        assign = sims.argmax(axis=1)
        own_sim = sims[np.arange(n), assign]
        counts = np.bincount(assign, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, points)
        norms = np.linalg.norm(sums, axis=1)
        needs_reseed = sorted(np.flatnonzero((counts == 0) | (norms == 0.0)).tolist())
        if needs_reseed:
            order = np.lexsort((np.arange(n), own_sim))  # farthest first, ties by index
            taken = 0
            for cluster in needs_reseed:
                centroids[cluster] = points[order[taken]]
                taken += 1
            healthy = [c for c in range(k) if c not in set(needs_reseed)]
            centroids[healthy] = sums[healthy] / norms[healthy, None]
        else:
            centroids = sums / norms[:, None]
    return centroids


def build_index(
    docs: Sequence[EmbeddedRecord],
    centroid_count: int | None = None,
    *,
    seed: int = 0,
) -> RetrievalIndex:
    """Build an index over document records, optionally with centroids.

    With centroid_count=K, spherical k-means over every document token
    produces the pruning table; the build is deterministic per seed.
    """
    table = None
    if centroid_count is not None:
        if centroid_count < 1:
            raise ConfigError(f"centroid_count must be positive, got {centroid_count}")
        total = _total_tokens(docs)
        if centroid_count > total:
            raise ConfigError(
                f"centroid_count {centroid_count} exceeds total token count {total}"
            )
        points = np.vstack([d.token_embeddings for d in docs]).astype(np.float64)
        centroids64 = _spherical_kmeans(points, centroid_count, seed)
        assign_all = (points @ centroids64.T).argmax(axis=1).astype(np.uint32)
        assignments = []
        offset = 0
        for doc in docs:
            assignments.append(assign_all[offset : offset + doc.m].copy())
            offset += doc.m
        table = CentroidTable(
            centroids=centroids64.astype(np.float32),
            assignments=tuple(assignments),
        )
    return RetrievalIndex(docs, table)


def _check_query(index: RetrievalIndex, query: EmbeddedRecord, k: int) -> None:
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    if query.role is not Role.QUERY:
        raise RoleMismatchError(f"record '{query.id}' is not a query")
    if query.dim != index.dim:
        raise DimensionMismatchError(
            f"query '{query.id}' dim {query.dim} != index dim {index.dim}"
        )


def _score_all(
    index: RetrievalIndex, query: EmbeddedRecord, config: ScoringConfig
) -> list[tuple[str, float]]:
    _, q_emb, q_mult = _query_arrays(query, config)
    scored = []
    for prep in index._prepared:
        delta_eff = effective_delta(prep.content_len, config)
        _, _, _, contributions = _match_components(
            q_emb, q_mult, prep.emb, prep.att, delta_eff, config.mode
        )
        scored.append((prep.doc_id, float(contributions.sum())))
    return scored


def _top_k(scored: list[tuple[str, float]], k: int) -> tuple[tuple[str, float], ...]:
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return tuple(scored[:k])


def search_exact(
    index: RetrievalIndex,
    query: EmbeddedRecord,
    k: int,
    config: ScoringConfig,
) -> SearchResult:
    """Exact top-k: score_pair against every document, deterministic order."""
    _check_query(index, query, k)
    scored = _score_all(index, query, config)
    return SearchResult(query_id=query.id, hits=_top_k(scored, k), config=config)


def search_pruned(
    index: RetrievalIndex,
    query: EmbeddedRecord,
    k: int,
    config: ScoringConfig,
    candidate_count: int,
) -> SearchResult:
    """Two-stage search: centroid MaxSim shortlist, then exact rescoring.

    Stage 1 ranks every document by attention-free MaxSim over the unique
    centroids of its kept tokens; stage 2 rescores the top candidate_count
    documents exactly. candidate_count = corpus size reproduces
    search_exact.
    """
    _check_query(index, query, k)
    if index.centroid_table is None:
        raise MissingCentroidTableError("index was built without centroids")
    if candidate_count < k:
        raise ConfigError(f"candidate_count {candidate_count} < k {k}")
    _, q_emb, q_mult = _query_arrays(query, config)
    sims = q_emb @ index._centroids64.T
    np.clip(sims, -1.0, 1.0, out=sims)
    stage1 = []
    for prep, cols in zip(index._prepared, index._kept_assignments):
        score = float(sims[:, cols].max(axis=1).sum()) if q_emb.shape[0] else 0.0
        stage1.append((prep.doc_id, score))
    stage1.sort(key=lambda pair: (-pair[1], pair[0]))
    shortlist = {doc_id for doc_id, _ in stage1[:candidate_count]}

    scored = []
    for prep in index._prepared:
        if prep.doc_id not in shortlist:
            continue
        delta_eff = effective_delta(prep.content_len, config)
        _, _, _, contributions = _match_components(
            q_emb, q_mult, prep.emb, prep.att, delta_eff, config.mode
        )
        scored.append((prep.doc_id, float(contributions.sum())))
    return SearchResult(query_id=query.id, hits=_top_k(scored, k), config=config)


def batch_search(
    index: RetrievalIndex,
    queries: Sequence[EmbeddedRecord],
    k: int,
    config: ScoringConfig,
    *,
    workers: int | None = None,
) -> list[SearchResult]:
    """search_exact over queries, results in input order.

    workers > 1 fans queries out across a thread pool; scores are bitwise
    identical to the serial path because each query's arithmetic is
    independent and deterministic.
    """

    def one(query: EmbeddedRecord) -> SearchResult:
        try:
            return search_exact(index, query, k, config)
        except Exception as exc:
            raise SearchError(f"query '{query.id}': {exc}") from exc

    if not queries:
        return []
    if workers is None or workers <= 1:
        return [one(q) for q in queries]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, queries))


# --- persistence -----------------------------------------------------------


def save_index(index: RetrievalIndex, directory: str | Path) -> None:
    """Write docs.lir plus, when present, the centroids.bin sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_records(index.documents, directory / DOCS_FILENAME)
    table = index.centroid_table
    if table is None:
        return
    with open(directory / CENTROIDS_FILENAME, "wb") as out:
        out.write(_CENTROID_HEADER.pack(CENTROID_MAGIC, table.k, index.dim))
        out.write(table.centroids.astype("<f4", copy=False).tobytes())
        for assign in table.assignments:
            out.write(_U32.pack(assign.size))
            out.write(assign.astype("<u4", copy=False).tobytes())


def _read_exact(stream: BinaryIO, n: int, context: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"unexpected end of centroid sidecar while reading {context}")
    return data


def load_index(directory: str | Path) -> RetrievalIndex:
    """Load an index directory written by save_index."""
    directory = Path(directory)
    docs = read_records(directory / DOCS_FILENAME)
    sidecar = directory / CENTROIDS_FILENAME
    table = None
    if sidecar.exists():
        with open(sidecar, "rb") as stream:
            header = stream.read(_CENTROID_HEADER.size)
            if len(header) < 4 or header[:4] != CENTROID_MAGIC:
                raise BadMagicError("centroid sidecar does not start with LIC1 magic")
            if len(header) != _CENTROID_HEADER.size:
                raise TruncatedFileError("unexpected end of centroid sidecar header")
            _, k, dim = _CENTROID_HEADER.unpack(header)
            if k < 1:
                raise FormatError("centroid sidecar declares zero centroids")
            if docs and dim != docs[0].dim:
                raise DimensionMismatchError(
                    f"centroid dim {dim} != document dim {docs[0].dim}"
                )
            raw = np.frombuffer(
                _read_exact(stream, k * dim * 4, "centroid vectors"), dtype="<f4"
            ).astype(np.float32, copy=True)
            centroids = raw.reshape(k, dim)
            norms = np.linalg.norm(centroids.astype(np.float64), axis=1)
            if (np.abs(norms - 1.0) > 1e-4).any():
                raise FormatError("centroid vectors are not unit-normalized")
            assignments = []
            for position, doc in enumerate(docs):
                (count,) = _U32.unpack(
                    _read_exact(stream, 4, f"token count of document {position}")
                )
                if count != doc.m:
                    raise FormatError(
                        f"document {position} ('{doc.id}') has {doc.m} tokens "
                        f"but sidecar lists {count}"
                    )
                assign = np.frombuffer(
                    _read_exact(stream, count * 4, f"assignments of document {position}"),
                    dtype="<u4",
                ).astype(np.uint32, copy=True)
                if (assign >= k).any():
                    raise FormatError(
                        f"document {position} ('{doc.id}') references a centroid >= {k}"
                    )
                assignments.append(assign)
            if stream.read(1):
                raise FormatError("bytes remain after the last document's assignments")
        table = CentroidTable(centroids=centroids, assignments=tuple(assignments))
    if not docs:
        raise EmptyIndexError(f"{directory / DOCS_FILENAME} holds no documents")
    return RetrievalIndex(docs, table)
