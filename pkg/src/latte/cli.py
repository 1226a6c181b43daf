"""Command line entry point: latte <subcommand> [flags].

Subcommands: synth, index, search, score, eval, sweep. Every pipeline is
reproducible: identical flags and seeds produce byte-identical run files
and reports.

Exit codes:
    0  success
    2  usage error (unknown flag, bad flag value)
    3  missing input file or other I/O failure
    4  file format error (LIRE, qrels, run, report, centroid sidecar)
    5  invalid data or configuration (validation failures, bad combinations)
    1  unexpected internal error

A plain-text key=value config file can supply any long flag's value via
--config; explicit flags win on conflict.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import evaluation, index as index_mod, interchange, synth
from .errors import ConfigError, FormatError, LatteError
from .scoring import AttentionMode, ScoringConfig, effective_delta, explain_pair, score_pair

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_INVALID = 5
EXIT_INTERNAL = 1

_MODE_CHOICES = ("none", "query-only", "doc-only", "both")


def _mode_from_flag(value: str) -> AttentionMode:
    return AttentionMode(value.replace("-", "_"))


def _parse_span(value: str) -> tuple[int, int]:
    lo, sep, hi = value.partition(":")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got '{value}'")
    try:
        return int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers in LO:HI, got '{value}'") from None


def _parse_int_list(value: str) -> list[int]:
    try:
        return [int(part) for part in value.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{value}'") from None


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"config file line {line_no}: expected key=value")
            values[key.strip()] = value.strip()
    return values


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill argparse Namespace gaps from --config key=value pairs.

    Keys use the long flag spelling without dashes, e.g. ``mode=both`` or
    ``clip-len=200``. Values parse through the same converters as flags.
    """
    if not getattr(args, "config", None):
        return
    values = _load_config_file(args.config)
    actions = {action.dest: action for action in parser._actions}
    for key, text in values.items():
        dest = key.replace("-", "_")
        action = actions.get(dest)
        if action is None:
            raise ConfigError(f"config file key '{key}' is not a flag of this subcommand")
        if getattr(args, dest) is not None:
            continue  # explicit flag wins
        converter = action.type or str
        try:
            setattr(args, dest, converter(text))
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"config file key '{key}': {exc}") from None


def _value(args: argparse.Namespace, name: str, default):
    got = getattr(args, name)
    return default if got is None else got


def _scoring_config(args: argparse.Namespace) -> ScoringConfig:
    mode = _value(args, "mode", "both")
    return ScoringConfig(
        mode=_mode_from_flag(mode) if isinstance(mode, str) else mode,
        clip_len=int(_value(args, "clip_len", 150)),
        delta_override=getattr(args, "delta_override", None),
    )


def _single_record(records, record_id: str, what: str) -> interchange.EmbeddedRecord:
    for record in records:
        if record.id == record_id:
            return record
    raise ConfigError(f"{what} id '{record_id}' not found")


def _docs_path(path_text: str) -> Path:
    path = Path(path_text)
    if path.is_dir():
        return path / index_mod.DOCS_FILENAME
    return path


# --- subcommand bodies -------------------------------------------------------


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.toy:
        query, d1, d2, d3 = synth.toy_fixture()
        interchange.write_records([d1, d2, d3], args.out_docs)
        interchange.write_records([query], args.out_queries)
        if args.out_qrels:
            interchange.write_qrels(
                interchange.Qrels({query.id: {d1.id: 1}}), args.out_qrels
            )
        print("wrote toy fixture: 3 documents, 1 query")
        return EXIT_OK
    spec = synth.SynthSpec(
        seed=int(_value(args, "seed", 0)),
        doc_count=int(_value(args, "docs", 1000)),
        query_count=int(_value(args, "queries", 50)),
        dim=int(_value(args, "dim", 16)),
        tokens_per_doc=_value(args, "doc_tokens", (6, 12)),
        tokens_per_query=_value(args, "query_tokens", (3, 6)),
        attention_signal_strength=float(_value(args, "strength", 0.9)),
        relevant_per_query=int(_value(args, "relevant", 1)),
    )
    documents, queries, qrels = synth.gen_corpus(spec)
    interchange.write_records(documents, args.out_docs)
    interchange.write_records(queries, args.out_queries)
    if args.out_qrels:
        interchange.write_qrels(qrels, args.out_qrels)
    print(f"wrote {len(documents)} documents, {len(queries)} queries (seed {spec.seed})")
    return EXIT_OK


def _cmd_index(args: argparse.Namespace) -> int:
    docs = interchange.read_records(args.records)
    built = index_mod.build_index(
        docs,
        centroid_count=args.centroids,
        seed=int(_value(args, "kmeans_seed", 0)),
    )
    index_mod.save_index(built, args.out)
    extra = f", {args.centroids} centroids" if args.centroids else ""
    print(f"indexed {len(built)} documents into {args.out}{extra}")
    return EXIT_OK


def _cmd_search(args: argparse.Namespace) -> int:
    loaded = index_mod.load_index(args.index)
    queries = interchange.read_records(args.queries)
    config = _scoring_config(args)
    k = int(_value(args, "k", 10))
    tag = _value(args, "tag", "latte")
    if args.candidates is not None:
        results = [
            index_mod.search_pruned(loaded, q, k, config, args.candidates) for q in queries
        ]
    else:
        results = index_mod.batch_search(
            loaded, queries, k, config, workers=args.workers
        )
    entries = [
        interchange.RunEntry(res.query_id, doc_id, rank, score, tag)
        for res in results
        for rank, (doc_id, score) in enumerate(res.hits, start=1)
    ]
    interchange.write_run(entries, args.out)
    print(f"searched {len(queries)} queries, wrote {len(entries)} run lines to {args.out}")
    return EXIT_OK


def _cmd_score(args: argparse.Namespace) -> int:
    queries = interchange.read_records(args.queries)
    docs = interchange.read_records(_docs_path(args.docs))
    query = _single_record(queries, args.query_id, "query")
    doc = _single_record(docs, args.doc_id, "document")
    config = _scoring_config(args)
    score = score_pair(query, doc, config)
    details = explain_pair(query, doc, config)
    delta_eff = effective_delta(doc.content_len, config)
    print(f"query={query.id} doc={doc.id} mode={config.mode.value} delta={delta_eff!r}")
    print("q_token\td_token\tcosine\tq_mult\td_mult\tcontribution")
    for d in details:
        print(
            f"{d.query_token_index}\t{d.doc_token_index}\t{d.cosine:.6f}\t"
            f"{d.query_multiplier:.6f}\t{d.doc_multiplier:.6f}\t{d.contribution:.6f}"
        )
    print(f"score={score!r}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    run = interchange.read_run(args.run)
    qrels = interchange.read_qrels(args.qrels)
    report = evaluation.evaluate_run(run, qrels, args.metric)
    evaluation.write_report(report, args.out)
    for label, value in report.aggregate.items():
        print(f"{label}\t{evaluation.AGGREGATE_KEY}\t{value:.6f}")
    print(
        f"evaluated {report.query_count} queries "
        f"({len(report.skipped_query_ids)} skipped), report in {args.out}"
    )
    return EXIT_OK


def _cmd_sweep(args: argparse.Namespace) -> int:
    loaded = index_mod.load_index(args.index)
    queries = interchange.read_records(args.queries)
    qrels = interchange.read_qrels(args.qrels)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    k = int(_value(args, "k", 10))
    tag = _value(args, "tag", "latte")
    mode = _mode_from_flag(_value(args, "mode", "both"))
    for clip_len in args.sweep_l:
        config = ScoringConfig(mode=mode, clip_len=clip_len)
        results = index_mod.batch_search(loaded, queries, k, config, workers=args.workers)
        entries = [
            interchange.RunEntry(res.query_id, doc_id, rank, score, f"{tag}-l{clip_len}")
            for res in results
            for rank, (doc_id, score) in enumerate(res.hits, start=1)
        ]
        run_path = out_dir / f"run_l{clip_len}.txt"
        interchange.write_run(entries, run_path)
        report = evaluation.evaluate_run(entries, qrels, args.metric)
        report_path = out_dir / f"report_l{clip_len}.tsv"
        evaluation.write_report(report, report_path)
        summary = " ".join(
            f"{label}={value:.4f}" for label, value in report.aggregate.items()
        )
        print(f"l={clip_len}: {summary} -> {report_path}")
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latte",
        description="Late-interaction retrieval with attention-weighted MaxSim.",
        epilog=(
            "exit codes: 0 ok, 2 usage, 3 missing file or I/O, "
            "4 file format error, 5 invalid data or configuration, 1 internal"
        ),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common_scoring(p: argparse.ArgumentParser) -> None:
        p.add_argument("--mode", choices=_MODE_CHOICES, default=None,
                       help="attention inclusion mode (default both)")
        p.add_argument("--clip-len", type=int, default=None,
                       help="document length clipping value l (default 150)")
        p.add_argument("--delta-override", type=float, default=None,
                       help="fixed delta in (0,1], e.g. 1.0 for in-domain runs")

    p_synth = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    p_synth.add_argument("--config", default=None, help="key=value config file")
    p_synth.add_argument("--seed", type=int, default=None)
    p_synth.add_argument("--docs", type=int, default=None, help="document count")
    p_synth.add_argument("--queries", type=int, default=None, help="query count")
    p_synth.add_argument("--dim", type=int, default=None)
    p_synth.add_argument("--doc-tokens", type=_parse_span, default=None, metavar="LO:HI")
    p_synth.add_argument("--query-tokens", type=_parse_span, default=None, metavar="LO:HI")
    p_synth.add_argument("--strength", type=float, default=None,
                         help="attention signal strength in [0,1]")
    p_synth.add_argument("--relevant", type=int, default=None, help="relevant docs per query")
    p_synth.add_argument("--toy", action="store_true",
                         help="emit the hand-built ranking fixture instead")
    p_synth.add_argument("--out-docs", required=True)
    p_synth.add_argument("--out-queries", required=True)
    p_synth.add_argument("--out-qrels", default=None)
    p_synth.set_defaults(func=_cmd_synth)

    p_index = sub.add_parser("index", help="build an index directory from LIRE records")
    p_index.add_argument("--config", default=None, help="key=value config file")
    p_index.add_argument("--records", required=True, help="document LIRE file")
    p_index.add_argument("--out", required=True, help="index directory")
    p_index.add_argument("--centroids", type=int, default=None,
                         help="build a K-centroid pruning table")
    p_index.add_argument("--kmeans-seed", type=int, default=None)
    p_index.set_defaults(func=_cmd_index)

    p_search = sub.add_parser("search", help="top-k search, writes a TREC run file")
    p_search.add_argument("--config", default=None, help="key=value config file")
    p_search.add_argument("--index", required=True, help="index directory")
    p_search.add_argument("--queries", required=True, help="query LIRE file")
    p_search.add_argument("--k", type=int, default=None)
    add_common_scoring(p_search)
    p_search.add_argument("--candidates", type=int, default=None,
                          help="prune via centroids to this many candidates")
    p_search.add_argument("--workers", type=int, default=None)
    p_search.add_argument("--tag", default=None, help="run tag (default latte)")
    p_search.add_argument("--out", required=True, help="run file path")
    p_search.set_defaults(func=_cmd_search)

    p_score = sub.add_parser("score", help="score one query against one document")
    p_score.add_argument("--config", default=None, help="key=value config file")
    p_score.add_argument("--queries", required=True, help="query LIRE file")
    p_score.add_argument("--docs", required=True, help="document LIRE file or index dir")
    p_score.add_argument("--query-id", required=True)
    p_score.add_argument("--doc-id", required=True)
    add_common_scoring(p_score)
    p_score.set_defaults(func=_cmd_score)

    p_eval = sub.add_parser("eval", help="evaluate a run file against qrels")
    p_eval.add_argument("--config", default=None, help="key=value config file")
    p_eval.add_argument("--run", required=True)
    p_eval.add_argument("--qrels", required=True)
    p_eval.add_argument("--metric", action="append", required=True,
                        help="recall@k, success@k or ndcg@k; repeatable")
    p_eval.add_argument("--out", required=True, help="report TSV path")
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="repeat search+eval across clip lengths")
    p_sweep.add_argument("--config", default=None, help="key=value config file")
    p_sweep.add_argument("--index", required=True)
    p_sweep.add_argument("--queries", required=True)
    p_sweep.add_argument("--qrels", required=True)
    p_sweep.add_argument("--k", type=int, default=None)
    p_sweep.add_argument("--mode", choices=_MODE_CHOICES, default=None)
    p_sweep.add_argument("--sweep-l", type=_parse_int_list, required=True,
                         metavar="L1,L2,...", help="clip lengths to sweep")
    p_sweep.add_argument("--metric", action="append", required=True)
    p_sweep.add_argument("--workers", type=int, default=None)
    p_sweep.add_argument("--tag", default=None)
    p_sweep.add_argument("--out-dir", required=True)
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        sub_parser = None
        for action in parser._actions:
            if isinstance(action, argparse._SubParsersAction):
                sub_parser = action.choices[args.subcommand]
        if sub_parser is not None:
            _apply_config_file(args, sub_parser)
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"latte: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"latte: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FormatError as exc:
        print(f"latte: format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except LatteError as exc:
        print(f"latte: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # pragma: no cover - defensive
        print(f"latte: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    raise SystemExit(main())
