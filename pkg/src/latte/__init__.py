"""Late-interaction passage retrieval with attention-weighted MaxSim."""

from .errors import LatteError
from .interchange import (
    EmbeddedRecord,
    Qrels,
    Role,
    RunEntry,
    normalize_embeddings,
    read_qrels,
    read_records,
    read_run,
    records_equal,
    write_qrels,
    write_records,
    write_run,
)
from .scoring import (
    AttentionMode,
    MatchDetail,
    ScoringConfig,
    cosine,
    delta,
    effective_delta,
    explain_pair,
    score_pair,
)
from .index import (
    CentroidTable,
    RetrievalIndex,
    SearchResult,
    batch_search,
    build_index,
    load_index,
    save_index,
    search_exact,
    search_pruned,
)
from .evaluation import (
    MetricReport,
    evaluate_run,
    ndcg_at_k,
    recall_at_k,
    success_at_k,
    weighted_average,
)
from .synth import SynthSpec, gen_corpus, oracle_rank, toy_fixture

__version__ = "0.1.0"

__all__ = [
    "AttentionMode",
    "CentroidTable",
    "EmbeddedRecord",
    "LatteError",
    "MatchDetail",
    "MetricReport",
    "Qrels",
    "RetrievalIndex",
    "Role",
    "RunEntry",
    "ScoringConfig",
    "SearchResult",
    "SynthSpec",
    "batch_search",
    "build_index",
    "cosine",
    "delta",
    "effective_delta",
    "evaluate_run",
    "explain_pair",
    "gen_corpus",
    "load_index",
    "ndcg_at_k",
    "normalize_embeddings",
    "oracle_rank",
    "read_qrels",
    "read_records",
    "read_run",
    "recall_at_k",
    "records_equal",
    "save_index",
    "score_pair",
    "search_exact",
    "search_pruned",
    "success_at_k",
    "toy_fixture",
    "write_qrels",
    "write_records",
    "write_run",
]
