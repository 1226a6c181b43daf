"""Index build, exact/pruned search, batching and persistence tests."""

from __future__ import annotations

import numpy as np
import pytest

from latte import (
    AttentionMode,
    EmbeddedRecord,
    Role,
    ScoringConfig,
    SynthSpec,
    batch_search,
    build_index,
    gen_corpus,
    load_index,
    save_index,
    score_pair,
    search_exact,
    search_pruned,
)
from latte.errors import (
    BadMagicError,
    ConfigError,
    DimensionMismatchError,
    DuplicateDocumentIdError,
    EmptyIndexError,
    FormatError,
    MissingCentroidTableError,
    SearchError,
    TruncatedFileError,
)
from latte.index import CENTROIDS_FILENAME, DOCS_FILENAME
from latte.synth import oracle_rank

from conftest import rand_record


@pytest.fixture(scope="module")
def small_corpus():
    spec = SynthSpec(
        seed=7, doc_count=120, query_count=8, dim=16,
        tokens_per_doc=(6, 10), tokens_per_query=(3, 5),
        attention_signal_strength=0.9, relevant_per_query=1,
    )
    return gen_corpus(spec)


@pytest.fixture(scope="module")
def small_index(small_corpus):
    docs, _, _ = small_corpus
    return build_index(docs, centroid_count=16, seed=3)


class TestBuild:
    def test_three_docs_lookup(self):
        rng = np.random.default_rng(1)
        docs = [rand_record(rng, f"d{i}", Role.DOCUMENT, 4, 8) for i in range(3)]
        idx = build_index(docs)
        assert len(idx) == 3
        for doc in docs:
            assert doc.id in idx
            assert idx.get(doc.id) is docs[idx.ordinal(doc.id)]

    def test_duplicate_id_names_offender(self):
        rng = np.random.default_rng(2)
        docs = [
            rand_record(rng, "dup", Role.DOCUMENT, 4, 8),
            rand_record(rng, "dup", Role.DOCUMENT, 5, 8),
        ]
        with pytest.raises(DuplicateDocumentIdError, match="dup"):
            build_index(docs)

    def test_mixed_dim_rejected(self):
        rng = np.random.default_rng(3)
        docs = [
            rand_record(rng, "a", Role.DOCUMENT, 4, 8),
            rand_record(rng, "b", Role.DOCUMENT, 4, 16),
        ]
        with pytest.raises(DimensionMismatchError):
            build_index(docs)

    def test_empty_rejected(self):
        with pytest.raises(EmptyIndexError):
            build_index([])

    def test_centroid_count_bounds(self):
        rng = np.random.default_rng(4)
        docs = [rand_record(rng, f"d{i}", Role.DOCUMENT, 2, 4) for i in range(3)]
        with pytest.raises(ConfigError, match="exceeds total token count"):
            build_index(docs, centroid_count=7)
        idx = build_index(docs, centroid_count=6)
        assert idx.centroid_table.k == 6

    def test_kmeans_deterministic(self, small_corpus):
        docs, _, _ = small_corpus
        a = build_index(docs, centroid_count=16, seed=3).centroid_table
        b = build_index(docs, centroid_count=16, seed=3).centroid_table
        assert (a.centroids == b.centroids).all()
        assert all((x == y).all() for x, y in zip(a.assignments, b.assignments))

    def test_kmeans_deterministic_1000_docs(self, seed42_corpus, seed42_centroid_index):
        docs, _, _ = seed42_corpus
        rebuilt = build_index(docs, centroid_count=64, seed=0).centroid_table
        table = seed42_centroid_index.centroid_table
        assert (rebuilt.centroids == table.centroids).all()
        assert all(
            (x == y).all() for x, y in zip(rebuilt.assignments, table.assignments)
        )

    def test_centroids_unit_and_assignments_valid(self, small_index):
        table = small_index.centroid_table
        norms = np.linalg.norm(table.centroids.astype(np.float64), axis=1)
        assert np.abs(norms - 1.0).max() <= 1e-4
        for assign, doc in zip(table.assignments, small_index.documents):
            assert assign.shape == (doc.m,)
            assert (assign < table.k).all()


class TestSearchExact:
    def test_single_doc_derived_score(self):
        query = EmbeddedRecord(
            "q", Role.QUERY,
            np.array([[1, 0], [0, 1]], dtype=np.float32),
            np.array([0.5, 0.1], dtype=np.float32), 2,
        )
        doc = EmbeddedRecord(
            "d", Role.DOCUMENT,
            np.array([[1, 0], [0.6, 0.8]], dtype=np.float32),
            np.array([0.3, 0.2], dtype=np.float32), 2,
        )
        config = ScoringConfig(mode=AttentionMode.BOTH, delta_override=1.0)
        idx = build_index([doc])
        result = search_exact(idx, query, 1, config)
        assert result.hits[0][0] == "d"
        assert result.hits[0][1] == pytest.approx(3.3055, abs=1e-4)
        assert result.hits[0][1] == score_pair(query, doc, config)

    def test_k_larger_than_corpus(self, small_index, small_corpus):
        _, queries, _ = small_corpus
        result = search_exact(small_index, queries[0], 10_000, ScoringConfig())
        assert len(result.hits) == len(small_index)
        scores = [s for _, s in result.hits]
        assert all(a >= b for a, b in zip(scores, scores[1:]))

    def test_matches_oracle_all_modes(self, small_index, small_corpus):
        docs, queries, _ = small_corpus
        for mode in AttentionMode:
            for config in (
                ScoringConfig(mode=mode, delta_override=1.0),
                ScoringConfig(mode=mode, clip_len=150),
                ScoringConfig(mode=mode, clip_len=300),
            ):
                for query in queries:
                    got = search_exact(small_index, query, 10, config)
                    want = oracle_rank(docs, query, config)[:10]
                    assert [d for d, _ in got.hits] == [d for d, _ in want]
                    for (_, gs), (_, ws) in zip(got.hits, want):
                        assert gs == pytest.approx(ws, rel=1e-9)

    def test_scores_equal_score_pair_bitwise(self, small_index, small_corpus):
        docs, queries, _ = small_corpus
        config = ScoringConfig(mode=AttentionMode.BOTH, clip_len=9)
        result = search_exact(small_index, queries[1], 5, config)
        for doc_id, score in result.hits:
            assert score == score_pair(queries[1], small_index.get(doc_id), config)

    def test_tie_break_ascending_doc_id(self):
        row = np.array([[1.0, 0.0]], dtype=np.float32)
        att = np.array([0.0], dtype=np.float32)
        docs = [
            EmbeddedRecord("db", Role.DOCUMENT, row.copy(), att.copy(), 1),
            EmbeddedRecord("da", Role.DOCUMENT, row.copy(), att.copy(), 1),
        ]
        query = EmbeddedRecord("q", Role.QUERY, row.copy(), att.copy(), 1)
        result = search_exact(build_index(docs), query, 2, ScoringConfig())
        assert [d for d, _ in result.hits] == ["da", "db"]

    def test_k_validation_and_dim_check(self, small_index, small_corpus):
        _, queries, _ = small_corpus
        with pytest.raises(ConfigError):
            search_exact(small_index, queries[0], 0, ScoringConfig())
        rng = np.random.default_rng(5)
        other = rand_record(rng, "q8", Role.QUERY, 3, 8)
        with pytest.raises(DimensionMismatchError):
            search_exact(small_index, other, 5, ScoringConfig())


class TestSearchPruned:
    def test_full_candidates_equals_exact(self, small_index, small_corpus):
        _, queries, _ = small_corpus
        config = ScoringConfig(mode=AttentionMode.BOTH, delta_override=1.0)
        for query in queries:
            exact = search_exact(small_index, query, 10, config)
            pruned = search_pruned(small_index, query, 10, config, len(small_index))
            assert pruned.hits == exact.hits

    def test_requires_centroid_table(self, small_corpus):
        docs, queries, _ = small_corpus
        idx = build_index(docs)
        with pytest.raises(MissingCentroidTableError):
            search_pruned(idx, queries[0], 5, ScoringConfig(), 50)

    def test_candidate_count_validation(self, small_index, small_corpus):
        _, queries, _ = small_corpus
        with pytest.raises(ConfigError):
            search_pruned(small_index, queries[0], 10, ScoringConfig(), 5)

    def test_shortlist_recall_reasonable(self, small_index, small_corpus):
        _, queries, _ = small_corpus
        config = ScoringConfig()  # default mode=both, l=150
        overlaps = []
        for query in queries:
            exact = {d for d, _ in search_exact(small_index, query, 10, config).hits}
            pruned = {d for d, _ in search_pruned(small_index, query, 10, config, 40).hits}
            overlaps.append(len(exact & pruned) / 10)
        assert sum(overlaps) / len(overlaps) >= 0.9


class TestBatchSearch:
    def test_singleton_matches_exact(self, small_index, small_corpus):
        _, queries, _ = small_corpus
        config = ScoringConfig()
        (got,) = batch_search(small_index, queries[:1], 5, config)
        assert got == search_exact(small_index, queries[0], 5, config)

    def test_parallel_bitwise_identical(self, small_index, small_corpus):
        _, queries, _ = small_corpus
        config = ScoringConfig(mode=AttentionMode.BOTH, delta_override=1.0)
        serial = batch_search(small_index, queries, 10, config, workers=1)
        parallel = batch_search(small_index, queries, 10, config, workers=4)
        assert serial == parallel
        assert [r.query_id for r in parallel] == [q.id for q in queries]

    def test_empty_queries(self, small_index):
        assert batch_search(small_index, [], 5, ScoringConfig()) == []

    def test_error_carries_query_id(self, small_index):
        rng = np.random.default_rng(6)
        bad = rand_record(rng, "odd-dim", Role.QUERY, 3, 8)
        with pytest.raises(SearchError, match="odd-dim"):
            batch_search(small_index, [bad], 5, ScoringConfig())


class TestPersistence:
    def test_round_trip_no_centroids(self, tmp_path, small_corpus):
        docs, queries, _ = small_corpus
        idx = build_index(docs)
        save_index(idx, tmp_path / "plain")
        loaded = load_index(tmp_path / "plain")
        assert loaded.centroid_table is None
        config = ScoringConfig(mode=AttentionMode.BOTH, delta_override=1.0)
        for query in queries[:3]:
            assert (
                search_exact(loaded, query, 10, config).hits
                == search_exact(idx, query, 10, config).hits
            )

    def test_round_trip_with_centroids(self, tmp_path, small_index, small_corpus):
        _, queries, _ = small_corpus
        save_index(small_index, tmp_path / "cent")
        loaded = load_index(tmp_path / "cent")
        assert loaded.centroid_table is not None
        assert (loaded.centroid_table.centroids == small_index.centroid_table.centroids).all()
        assert all(
            (a == b).all()
            for a, b in zip(
                loaded.centroid_table.assignments, small_index.centroid_table.assignments
            )
        )
        config = ScoringConfig()
        for query in queries[:3]:
            assert (
                search_pruned(loaded, query, 5, config, 40).hits
                == search_pruned(small_index, query, 5, config, 40).hits
            )

    def test_sidecar_bad_magic(self, tmp_path, small_index):
        save_index(small_index, tmp_path / "bad")
        sidecar = tmp_path / "bad" / CENTROIDS_FILENAME
        data = bytearray(sidecar.read_bytes())
        data[:4] = b"NOPE"
        sidecar.write_bytes(bytes(data))
        with pytest.raises(BadMagicError):
            load_index(tmp_path / "bad")

    def test_sidecar_truncated(self, tmp_path, small_index):
        save_index(small_index, tmp_path / "trunc")
        sidecar = tmp_path / "trunc" / CENTROIDS_FILENAME
        sidecar.write_bytes(sidecar.read_bytes()[:-3])
        with pytest.raises(TruncatedFileError):
            load_index(tmp_path / "trunc")

    def test_sidecar_trailing_bytes(self, tmp_path, small_index):
        save_index(small_index, tmp_path / "trail")
        sidecar = tmp_path / "trail" / CENTROIDS_FILENAME
        sidecar.write_bytes(sidecar.read_bytes() + b"\x00")
        with pytest.raises(FormatError):
            load_index(tmp_path / "trail")

    def test_docs_file_is_lire(self, tmp_path, small_index):
        save_index(small_index, tmp_path / "lire")
        from latte import read_records

        docs = read_records(tmp_path / "lire" / DOCS_FILENAME)
        assert len(docs) == len(small_index)
