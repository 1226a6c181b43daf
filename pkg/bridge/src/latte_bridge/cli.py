"""Command line tool: latte-bridge --input texts.tsv --model M --role R --out file.lir

Exit codes: 0 ok, 2 usage error, 3 missing file or I/O failure,
5 invalid input or configuration.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .encode import POLICIES, BridgeConfig, BridgeError, encode_file

EXIT_OK = 0
EXIT_IO = 3
EXIT_INVALID = 5


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latte-bridge",
        description="Export transformer token embeddings and attention weights to LIRE.",
        epilog="exit codes: 0 ok, 2 usage, 3 missing file or I/O, 5 invalid input",
    )
    parser.add_argument("--input", required=True, help="UTF-8 TSV: id<TAB>text per line")
    parser.add_argument("--model", required=True, help="model directory or hub identifier")
    parser.add_argument("--role", required=True, choices=("query", "document"))
    parser.add_argument("--max-tokens", type=int, default=None,
                        help="token budget (default: 32 for queries, 300 for documents)")
    parser.add_argument("--policy", choices=POLICIES, default=POLICIES[0],
                        help="attention extraction policy")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--mark-special", action="store_true",
                        help="write keep_mask=False for CLS/SEP/PAD tokens")
    parser.add_argument("--out", required=True, help="output LIRE path")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = BridgeConfig(
            model=args.model,
            role=args.role,
            max_tokens=args.max_tokens,
            attention_policy=args.policy,
            batch_size=args.batch_size,
            mark_special=args.mark_special,
        )
        count = encode_file(args.input, args.out, config)
    except FileNotFoundError as exc:
        print(f"latte-bridge: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"latte-bridge: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BridgeError as exc:
        print(f"latte-bridge: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"encoded {count} {args.role} records into {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
