"""Rank-quality metrics over run files and qrels.

Recall@k, Success@k and nDCG@k, reported per query and as an unweighted
mean. nDCG uses the trec_eval gain convention 2^rel - 1 with a
log2(rank + 1) discount. Queries without a single positive judgment are
skipped rather than scored, and the skip tally is surfaced so it can never
silently shrink the denominator.

Reports serialize as UTF-8 TSV, one "metric <TAB> query_id <TAB> value"
line per query plus an ALL line holding the aggregate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import ConfigError, EvaluationError, MalformedLineError
from .interchange import (
    Qrels,
    RunEntry,
    TextPathOrIO,
    _text_sink,
    _text_source,
    run_entries_by_query,
)

AGGREGATE_KEY = "ALL"


@dataclass(frozen=True)
class MetricReport:
    """Per-query and aggregate metric values, all within [0, 1]."""

    per_query: dict[str, dict[str, float]]
    aggregate: dict[str, float]
    query_count: int
    skipped_query_ids: tuple[str, ...]


def recall_at_k(ranked_doc_ids: Sequence[str], relevant: set[str], k: int) -> float:
    """Fraction of the relevant set found in the top k."""
    if not relevant:
        raise EvaluationError("recall undefined for an empty relevant set")
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    hits = sum(1 for doc_id in ranked_doc_ids[:k] if doc_id in relevant)
    return hits / len(relevant)


def success_at_k(ranked_doc_ids: Sequence[str], relevant: set[str], k: int = 5) -> float:
    """1.0 if any relevant document appears in the top k, else 0.0."""
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    return 1.0 if any(doc_id in relevant for doc_id in ranked_doc_ids[:k]) else 0.0


def _dcg(gains: Sequence[float]) -> float:
    return sum(gain / math.log2(rank + 1) for rank, gain in enumerate(gains, start=1))


def ndcg_at_k(
    ranked_doc_ids: Sequence[str], relevance: Mapping[str, int], k: int = 10
) -> float:
    """DCG@k with gain 2^rel - 1, normalized by the ideal ordering's DCG@k."""
    if k < 1:
        raise ConfigError(f"k must be positive, got {k}")
    positive = [rel for rel in relevance.values() if rel > 0]
    if not positive:
        raise EvaluationError("nDCG undefined when every judged relevance is zero")
    gains = [float(2 ** relevance.get(doc_id, 0) - 1) for doc_id in ranked_doc_ids[:k]]
    ideal = [float(2 ** rel - 1) for rel in sorted(positive, reverse=True)[:k]]
    return _dcg(gains) / _dcg(ideal)


def parse_metric(spec: str) -> tuple[str, int]:
    """Turn 'recall@10' style text into (name, k)."""
    text = spec.strip().lower()
    name, at, k_text = text.partition("@")
    if name not in ("recall", "success", "ndcg"):
        raise ConfigError(f"unknown metric '{spec}' (use recall@k, success@k, ndcg@k)")
    if at != "@":
        k = {"success": 5, "ndcg": 10}.get(name)
        if k is None:
            raise ConfigError(f"metric '{spec}' needs an explicit @k")
        return name, k
    try:
        k = int(k_text)
    except ValueError:
        raise ConfigError(f"metric '{spec}' has a non-integer k") from None
    if k < 1:
        raise ConfigError(f"metric '{spec}' has non-positive k")
    return name, k


def _apply_metric(
    name: str, k: int, ranked: Sequence[str], graded: Mapping[str, int]
) -> float:
    relevant = {doc_id for doc_id, rel in graded.items() if rel > 0}
    if name == "recall":
        return recall_at_k(ranked, relevant, k)
    if name == "success":
        return success_at_k(ranked, relevant, k)
    return ndcg_at_k(ranked, graded, k)


def evaluate_run(
    run: Sequence[RunEntry], qrels: Qrels, metrics: Sequence[str]
) -> MetricReport:
    """Score each run query on each metric and aggregate by unweighted mean.

    Queries absent from the qrels, or judged with no positive relevance,
    are skipped and tallied. Output is independent of run line order
    within a query (the rank column governs).
    """
    if not metrics:
        raise ConfigError("at least one metric is required")
    parsed = [(f"{name}@{k}", name, k) for name, k in map(parse_metric, metrics)]
    by_query = run_entries_by_query(run)
    per_query: dict[str, dict[str, float]] = {}
    skipped: list[str] = []
    for query_id, ranked in by_query.items():
        graded = qrels.graded(query_id)
        if not any(rel > 0 for rel in graded.values()):
            skipped.append(query_id)
            continue
        per_query[query_id] = {
            label: _apply_metric(name, k, ranked, graded) for label, name, k in parsed
        }
    aggregate = {}
    if per_query:
        for label, _, _ in parsed:
            values = [row[label] for row in per_query.values()]
            aggregate[label] = sum(values) / len(values)
    return MetricReport(
        per_query=per_query,
        aggregate=aggregate,
        query_count=len(per_query),
        skipped_query_ids=tuple(skipped),
    )


# --- report files ----------------------------------------------------------


def write_report(report: MetricReport, destination: TextPathOrIO) -> None:
    """TSV report: per-query rows sorted by query id, then the ALL row."""
    with _text_sink(destination) as out:
        for label in report.aggregate:
            for query_id in sorted(report.per_query):
                out.write(f"{label}\t{query_id}\t{report.per_query[query_id][label]:.6f}\n")
            out.write(f"{label}\t{AGGREGATE_KEY}\t{report.aggregate[label]:.6f}\n")


def read_report(source: TextPathOrIO) -> MetricReport:
    """Parse a TSV report back into a MetricReport (values at file precision)."""
    per_query: dict[str, dict[str, float]] = {}
    aggregate: dict[str, float] = {}
    with _text_source(source) as stream:
        for line_no, raw in enumerate(stream, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedLineError(line_no, f"expected 3 fields, got {len(parts)}")
            label, query_id, value_text = parts
            try:
                value = float(value_text)
            except ValueError:
                raise MalformedLineError(line_no, f"bad metric value '{value_text}'") from None
            if query_id == AGGREGATE_KEY:
                aggregate[label] = value
            else:
                per_query.setdefault(query_id, {})[label] = value
    return MetricReport(
        per_query=per_query,
        aggregate=aggregate,
        query_count=len(per_query),
        skipped_query_ids=(),
    )


def weighted_average(reports: Sequence[MetricReport]) -> dict[str, float]:
    """Combine aggregates across reports, weighted by per-report query count.

    The weight of a report for a metric is the number of its per-query rows
    carrying that metric, so differently sized datasets contribute in
    proportion to their query counts.
    """
    totals: dict[str, float] = {}
    weights: dict[str, int] = {}
    for report in reports:
        for label, value in report.aggregate.items():
            count = sum(1 for row in report.per_query.values() if label in row)
            if count == 0:
                continue
            totals[label] = totals.get(label, 0.0) + value * count
            weights[label] = weights.get(label, 0) + count
    return {label: totals[label] / weights[label] for label in totals}
