"""Transformer-to-LIRE export bridge."""

from .encode import (
    DOC_TOKEN_BUDGET,
    POLICIES,
    QUERY_TOKEN_BUDGET,
    BridgeConfig,
    BridgeError,
    encode_file,
    encode_texts,
    read_texts_tsv,
)
from .lire import BridgeRecord, write_lire

__version__ = "0.1.0"

__all__ = [
    "BridgeConfig",
    "BridgeError",
    "BridgeRecord",
    "DOC_TOKEN_BUDGET",
    "POLICIES",
    "QUERY_TOKEN_BUDGET",
    "encode_file",
    "encode_texts",
    "read_texts_tsv",
    "write_lire",
]
