"""Standalone LIRE writer.

The byte format is the bridge's only contract with the retrieval engine,
so it is implemented here independently rather than imported:

    header:  magic "LIR1" | format_version u32 = 1 | dim u32 | record_count u64
    record:  role u8 (0=query, 1=document)
             id_len u16 | id UTF-8 bytes
             m u32 | content_len u32 | mask_present u8
             [m bytes keep_mask, 0/1 per token, if mask_present]
             m*dim f32 embeddings row-major | m f32 attention

All multi-byte values little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"LIR1"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_RECORD_HEAD = struct.Struct("<BH")
_RECORD_SHAPE = struct.Struct("<IIB")

_ROLE_BYTES = {"query": 0, "document": 1}


@dataclass
class BridgeRecord:
    """One encoded text ready for serialization."""

    id: str
    role: str                       # "query" or "document"
    embeddings: np.ndarray          # (m, dim) float32, unit rows
    attention: np.ndarray           # (m,) float32, >= 0
    content_len: int
    keep_mask: np.ndarray | None = None


def write_lire(records: Sequence[BridgeRecord], destination: str | Path) -> int:
    """Serialize records; returns bytes written."""
    dims = {int(r.embeddings.shape[1]) for r in records}
    if len(dims) > 1:
        raise ValueError(f"records carry mixed dims: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    written = 0
    with open(destination, "wb") as out:
        written += out.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, len(records)))
        for record in records:
            emb = np.ascontiguousarray(record.embeddings, dtype=np.float32)
            att = np.ascontiguousarray(record.attention, dtype=np.float32)
            m = emb.shape[0]
            if att.shape != (m,):
                raise ValueError(f"record '{record.id}': attention length mismatch")
            if not (1 <= record.content_len <= m):
                raise ValueError(f"record '{record.id}': content_len outside [1, {m}]")
            id_bytes = record.id.encode("utf-8")
            mask_present = record.keep_mask is not None
            written += out.write(
                _RECORD_HEAD.pack(_ROLE_BYTES[record.role], len(id_bytes))
            )
            written += out.write(id_bytes)
            written += out.write(_RECORD_SHAPE.pack(m, record.content_len, int(mask_present)))
            if mask_present:
                written += out.write(
                    np.ascontiguousarray(record.keep_mask, dtype=bool)
                    .astype(np.uint8)
                    .tobytes()
                )
            written += out.write(emb.astype("<f4", copy=False).tobytes())
            written += out.write(att.astype("<f4", copy=False).tobytes())
    return written
