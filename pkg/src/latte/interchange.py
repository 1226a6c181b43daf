"""On-disk interchange formats: LIRE record files, qrels, and run files.

LIRE (Late-Interaction Record Exchange) is a little-endian binary format
holding per-token embeddings plus per-token attention weights:

    header:  magic "LIR1" | format_version u32 = 1 | dim u32 | record_count u64
    record:  role u8 (0=query, 1=document)
             id_len u16 | id UTF-8 bytes
             m u32 | content_len u32 | mask_present u8
             [m bytes keep_mask, one 0/1 byte per token, if mask_present]
             m*dim f32 embeddings, row-major
             m f32 attention weights

Embeddings are stored unit-normalized so cosine similarity reduces to a dot
product. Reading re-checks row norms: rows within 1e-4 of unit are returned
bit-identical (round trips are exact), rows off by more than 1e-4 but within
the 1e-2 ingestion gate are re-normalized, and anything worse is rejected as
a corrupted export.

Qrels are UTF-8 TSV lines "query_id<TAB>doc_id<TAB>relevance". Run files use
the six-column TREC convention "query_id Q0 doc_id rank score tag".
"""

from __future__ import annotations

import struct
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import BinaryIO, Iterator, Sequence, TextIO, Union

import numpy as np

from .errors import (
    BadMagicError,
    DuplicateEntryError,
    MalformedLineError,
    NonFiniteFloatError,
    NormToleranceError,
    RecordValidationError,
    RunValidationError,
    TrailingDataError,
    TruncatedFileError,
    UnsupportedVersionError,
)

MAGIC = b"LIR1"
FORMAT_VERSION = 1

DEFAULT_MAX_QUERY_TOKENS = 32
DEFAULT_MAX_DOC_TOKENS = 300

# Post-ingestion invariant: every row norm within 1e-4 of 1.
UNIT_NORM_TOLERANCE = 1e-4
# Pre-normalization gate on read: beyond this the export is considered corrupt.
NORM_REJECT_TOLERANCE = 1e-2

_HEADER = struct.Struct("<4sIIQ")
_RECORD_HEAD = struct.Struct("<BH")
_RECORD_SHAPE = struct.Struct("<IIB")

PathOrIO = Union[str, Path, BinaryIO]
TextPathOrIO = Union[str, Path, TextIO]


class Role(Enum):
    QUERY = "query"
    DOCUMENT = "document"


_ROLE_TO_BYTE = {Role.QUERY: 0, Role.DOCUMENT: 1}
_BYTE_TO_ROLE = {0: Role.QUERY, 1: Role.DOCUMENT}


@dataclass
class EmbeddedRecord:
    """One query or document: per-token embeddings and attention weights.

    Attributes:
        id: non-empty identifier, unique within a collection.
        role: whether the record is a query or a document.
        token_embeddings: (m, dim) float32, rows unit-normalized.
        attention: (m,) float32, finite and non-negative.
        content_len: number of content tokens (excluding pad/mask
            augmentation), 1 <= content_len <= m.
        keep_mask: optional (m,) bool, True = token participates in scoring.
            None means all tokens participate.
    """

    id: str
    role: Role
    token_embeddings: np.ndarray
    attention: np.ndarray
    content_len: int
    keep_mask: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.token_embeddings = np.ascontiguousarray(
            self.token_embeddings, dtype=np.float32
        )
        self.attention = np.ascontiguousarray(self.attention, dtype=np.float32)
        if self.keep_mask is not None:
            self.keep_mask = np.ascontiguousarray(self.keep_mask, dtype=bool)

    @property
    def m(self) -> int:
        return int(self.token_embeddings.shape[0])

    @property
    def dim(self) -> int:
        return int(self.token_embeddings.shape[1])

    def kept_indices(self) -> np.ndarray:
        """Indices of tokens participating in scoring, ascending."""
        if self.keep_mask is None:
            return np.arange(self.m)
        return np.flatnonzero(self.keep_mask)


def records_equal(a: EmbeddedRecord, b: EmbeddedRecord) -> bool:
    """Strict field-for-field equality, bit-exact on float payloads."""
    if (a.id, a.role, a.content_len) != (b.id, b.role, b.content_len):
        return False
    if a.token_embeddings.shape != b.token_embeddings.shape:
        return False
    if a.token_embeddings.tobytes() != b.token_embeddings.tobytes():
        return False
    if a.attention.tobytes() != b.attention.tobytes():
        return False
    if (a.keep_mask is None) != (b.keep_mask is None):
        return False
    if a.keep_mask is not None and not np.array_equal(a.keep_mask, b.keep_mask):
        return False
    return True


def validate_record(
    record: EmbeddedRecord,
    *,
    max_query_tokens: int = DEFAULT_MAX_QUERY_TOKENS,
    max_doc_tokens: int = DEFAULT_MAX_DOC_TOKENS,
) -> None:
    """Check every EmbeddedRecord invariant, raising RecordValidationError."""
    rid = record.id
    if not isinstance(rid, str) or not rid:
        raise RecordValidationError("record id must be a non-empty string")
    if len(rid.encode("utf-8")) > 0xFFFF:
        raise RecordValidationError(f"record '{rid[:32]}...': id exceeds 65535 bytes")
    if not isinstance(record.role, Role):
        raise RecordValidationError(f"record '{rid}': role must be a Role")
    emb = record.token_embeddings
    if emb.ndim != 2:
        raise RecordValidationError(f"record '{rid}': embeddings must be 2-D")
    m, dim = emb.shape
    if m < 1 or dim < 1:
        raise RecordValidationError(f"record '{rid}': needs at least one token and one dimension")
    if record.attention.shape != (m,):
        raise RecordValidationError(
            f"record '{rid}': attention length {record.attention.shape} != token count {m}"
        )
    if record.keep_mask is not None and record.keep_mask.shape != (m,):
        raise RecordValidationError(
            f"record '{rid}': keep_mask length != token count {m}"
        )
    if not np.isfinite(emb).all():
        raise RecordValidationError(f"record '{rid}': embeddings contain NaN or Inf")
    if not np.isfinite(record.attention).all():
        raise RecordValidationError(f"record '{rid}': attention contains NaN or Inf")
    if (record.attention < 0).any():
        row = int(np.flatnonzero(record.attention < 0)[0])
        raise RecordValidationError(f"record '{rid}': negative attention at token {row}")
    if not (1 <= record.content_len <= m):
        raise RecordValidationError(
            f"record '{rid}': content_len {record.content_len} outside [1, {m}]"
        )
    cap = max_query_tokens if record.role is Role.QUERY else max_doc_tokens
    if m > cap:
        raise RecordValidationError(
            f"record '{rid}': {record.role.value} has {m} tokens, cap is {cap}"
        )
    norms = np.linalg.norm(emb.astype(np.float64), axis=1)
    deviation = np.abs(norms - 1.0)
    if (deviation > UNIT_NORM_TOLERANCE).any():
        row = int(np.argmax(deviation))
        raise RecordValidationError(
            f"record '{rid}': embedding row {row} has norm {norms[row]:.6f}, "
            f"outside 1±{UNIT_NORM_TOLERANCE}"
        )


def normalize_embeddings(record: EmbeddedRecord) -> EmbeddedRecord:
    """Return a copy with every embedding row rescaled to unit norm.

    Attention, content_len, keep_mask and identity are untouched. Raises
    RecordValidationError for a zero-norm row, naming the row index.
    """
    emb64 = record.token_embeddings.astype(np.float64)
    norms = np.linalg.norm(emb64, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise RecordValidationError(
            f"record '{record.id}': zero-norm embedding row {int(zero[0])}"
        )
    normalized = (emb64 / norms[:, None]).astype(np.float32)
    return EmbeddedRecord(
        id=record.id,
        role=record.role,
        token_embeddings=normalized,
        attention=record.attention.copy(),
        content_len=record.content_len,
        keep_mask=None if record.keep_mask is None else record.keep_mask.copy(),
    )


@contextmanager
def _binary_sink(dest: PathOrIO) -> Iterator[BinaryIO]:
    if isinstance(dest, (str, Path)):
        with open(dest, "wb") as fh:
            yield fh
    else:
        yield dest


@contextmanager
def _binary_source(src: PathOrIO) -> Iterator[BinaryIO]:
    if isinstance(src, (str, Path)):
        with open(src, "rb") as fh:
            yield fh
    else:
        yield src


@contextmanager
def _text_sink(dest: TextPathOrIO) -> Iterator[TextIO]:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            yield fh
    else:
        yield dest


@contextmanager
def _text_source(src: TextPathOrIO) -> Iterator[TextIO]:
    if isinstance(src, (str, Path)):
        with open(src, "r", encoding="utf-8") as fh:
            yield fh
    else:
        yield src


def write_records(
    records: Sequence[EmbeddedRecord],
    destination: PathOrIO,
    *,
    max_query_tokens: int = DEFAULT_MAX_QUERY_TOKENS,
    max_doc_tokens: int = DEFAULT_MAX_DOC_TOKENS,
) -> int:
    """Serialize records to the LIRE format. Returns the byte count written.

    All records must share one dim and satisfy every invariant; violations
    are rejected with the offending record id. Output is deterministic,
    identical input produces identical bytes.
    """
    dims = {r.dim for r in records}
    if len(dims) > 1:
        raise RecordValidationError(f"mixed embedding dims in one file: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    for record in records:
        validate_record(
            record,
            max_query_tokens=max_query_tokens,
            max_doc_tokens=max_doc_tokens,
        )

    written = 0
    with _binary_sink(destination) as out:
        written += out.write(_HEADER.pack(MAGIC, FORMAT_VERSION, dim, len(records)))
        for record in records:
            id_bytes = record.id.encode("utf-8")
            mask_present = record.keep_mask is not None
            written += out.write(_RECORD_HEAD.pack(_ROLE_TO_BYTE[record.role], len(id_bytes)))
            written += out.write(id_bytes)
            written += out.write(
                _RECORD_SHAPE.pack(record.m, record.content_len, int(mask_present))
            )
            if mask_present:
                written += out.write(record.keep_mask.astype(np.uint8).tobytes())
            written += out.write(record.token_embeddings.astype("<f4", copy=False).tobytes())
            written += out.write(record.attention.astype("<f4", copy=False).tobytes())
    return written


def _read_exact(stream: BinaryIO, n: int, context: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise TruncatedFileError(f"unexpected end of stream while reading {context}")
    return data


def read_records(
    source: PathOrIO,
    *,
    max_query_tokens: int = DEFAULT_MAX_QUERY_TOKENS,
    max_doc_tokens: int = DEFAULT_MAX_DOC_TOKENS,
) -> list[EmbeddedRecord]:
    """Parse a LIRE stream back into validated, unit-normalized records."""
    with _binary_source(source) as stream:
        header = stream.read(_HEADER.size)
        if len(header) < 4 or header[:4] != MAGIC:
            raise BadMagicError("stream does not start with LIR1 magic")
        if len(header) != _HEADER.size:
            raise TruncatedFileError("unexpected end of stream while reading header")
        _, version, dim, count = _HEADER.unpack(header)
        if version != FORMAT_VERSION:
            raise UnsupportedVersionError(f"format version {version}, expected {FORMAT_VERSION}")
        if count > 0 and dim < 1:
            raise RecordValidationError("non-empty file declares dim 0")

        records: list[EmbeddedRecord] = []
        for idx in range(count):
            where = f"record {idx}"
            role_byte, id_len = _RECORD_HEAD.unpack(_read_exact(stream, _RECORD_HEAD.size, where))
            if role_byte not in _BYTE_TO_ROLE:
                raise RecordValidationError(f"{where}: unknown role byte {role_byte}")
            rec_id = _read_exact(stream, id_len, f"{where} id").decode("utf-8")
            where = f"record {idx} ('{rec_id}')"
            m, content_len, mask_present = _RECORD_SHAPE.unpack(
                _read_exact(stream, _RECORD_SHAPE.size, where)
            )
            if mask_present not in (0, 1):
                raise RecordValidationError(f"{where}: mask_present byte must be 0 or 1")
            keep_mask = None
            if mask_present:
                mask_bytes = np.frombuffer(
                    _read_exact(stream, m, f"{where} keep_mask"), dtype=np.uint8
                )
                if (mask_bytes > 1).any():
                    raise RecordValidationError(f"{where}: keep_mask bytes must be 0 or 1")
                keep_mask = mask_bytes.astype(bool)
            emb = np.frombuffer(
                _read_exact(stream, m * dim * 4, f"{where} embeddings"), dtype="<f4"
            ).astype(np.float32, copy=True)
            emb = emb.reshape(m, dim)
            if not np.isfinite(emb).all():
                raise NonFiniteFloatError(f"{where}: embeddings contain NaN or Inf")
            attention = np.frombuffer(
                _read_exact(stream, m * 4, f"{where} attention"), dtype="<f4"
            ).astype(np.float32, copy=True)
            if not np.isfinite(attention).all():
                raise NonFiniteFloatError(f"{where}: attention contains NaN or Inf")

            norms = np.linalg.norm(emb.astype(np.float64), axis=1)
            deviation = np.abs(norms - 1.0)
            bad = np.flatnonzero(deviation > NORM_REJECT_TOLERANCE)
            if bad.size:
                row = int(bad[0])
                raise NormToleranceError(
                    f"{where}: embedding row {row} has norm {norms[row]:.6f}, "
                    f"outside the 1±{NORM_REJECT_TOLERANCE} ingestion gate"
                )
            # Rows already inside the post-ingestion tolerance stay bit-identical
            # so read(write(R)) round-trips exactly; only drifted rows rescale.
            drifted = np.flatnonzero(deviation > UNIT_NORM_TOLERANCE)
            if drifted.size:
                emb64 = emb[drifted].astype(np.float64)
                emb[drifted] = (emb64 / norms[drifted][:, None]).astype(np.float32)

            record = EmbeddedRecord(
                id=rec_id,
                role=_BYTE_TO_ROLE[role_byte],
                token_embeddings=emb,
                attention=attention,
                content_len=content_len,
                keep_mask=keep_mask,
            )
            try:
                validate_record(
                    record,
                    max_query_tokens=max_query_tokens,
                    max_doc_tokens=max_doc_tokens,
                )
            except RecordValidationError as exc:
                raise RecordValidationError(f"{where}: {exc}") from None
            records.append(record)

        if stream.read(1):
            raise TrailingDataError(f"bytes remain after the declared {count} records")
    return records


# --- qrels ---------------------------------------------------------------


@dataclass
class Qrels:
    """Relevance judgments: query_id -> doc_id -> non-negative grade."""

    entries: dict[str, dict[str, int]]

    def graded(self, query_id: str) -> dict[str, int]:
        return self.entries.get(query_id, {})

    def relevant(self, query_id: str, min_relevance: int = 1) -> set[str]:
        return {
            doc_id
            for doc_id, rel in self.entries.get(query_id, {}).items()
            if rel >= min_relevance
        }

    def __len__(self) -> int:
        return sum(len(docs) for docs in self.entries.values())


def read_qrels(source: TextPathOrIO) -> Qrels:
    """Parse TSV qrels; duplicate (query, doc) pairs are rejected."""
    entries: dict[str, dict[str, int]] = {}
    with _text_source(source) as stream:
        for line_no, raw in enumerate(stream, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise MalformedLineError(line_no, f"expected 3 tab-separated fields, got {len(parts)}")
            query_id, doc_id, rel_text = parts
            if not query_id or not doc_id:
                raise MalformedLineError(line_no, "empty query_id or doc_id")
            try:
                rel = int(rel_text)
            except ValueError:
                raise MalformedLineError(line_no, f"relevance '{rel_text}' is not an integer") from None
            if rel < 0:
                raise MalformedLineError(line_no, f"relevance {rel} is negative")
            per_query = entries.setdefault(query_id, {})
            if doc_id in per_query:
                raise DuplicateEntryError(
                    f"line {line_no}: duplicate qrel entry ({query_id}, {doc_id})"
                )
            per_query[doc_id] = rel
    return Qrels(entries)


def write_qrels(qrels: Qrels, destination: TextPathOrIO) -> None:
    """Write qrels as TSV in entry order."""
    with _text_sink(destination) as out:
        for query_id, docs in qrels.entries.items():
            for doc_id, rel in docs.items():
                _require_plain_token(query_id, "query_id")
                _require_plain_token(doc_id, "doc_id")
                out.write(f"{query_id}\t{doc_id}\t{rel}\n")


# --- run files -----------------------------------------------------------


@dataclass(frozen=True)
class RunEntry:
    """One ranked hit in TREC run convention."""

    query_id: str
    doc_id: str
    rank: int
    score: float
    tag: str


def _require_plain_token(value: str, what: str) -> None:
    if not value or any(ch.isspace() for ch in value):
        raise RunValidationError(f"{what} '{value}' is empty or contains whitespace")


def _validate_run_group(query_id: str, group: list[RunEntry]) -> None:
    ordered = sorted(group, key=lambda e: e.rank)
    ranks = [e.rank for e in ordered]
    if ranks != list(range(1, len(ordered) + 1)):
        raise RunValidationError(f"query '{query_id}': ranks are not exactly 1..{len(ordered)}")
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.score > prev.score:
            raise RunValidationError(
                f"query '{query_id}': score increases from rank {prev.rank} to {cur.rank}"
            )
        if cur.score == prev.score and cur.doc_id < prev.doc_id:
            raise RunValidationError(
                f"query '{query_id}': tied scores not in ascending doc_id order "
                f"at rank {cur.rank}"
            )


def write_run(entries: Sequence[RunEntry], destination: TextPathOrIO) -> None:
    """Write a TREC run file; validates per-query rank/score invariants.

    Scores are written with repr() so read_run(write_run(E)) is bit-exact.
    """
    groups: dict[str, list[RunEntry]] = {}
    for entry in entries:
        _require_plain_token(entry.query_id, "query_id")
        _require_plain_token(entry.doc_id, "doc_id")
        _require_plain_token(entry.tag, "tag")
        if entry.rank < 1:
            raise RunValidationError(f"rank {entry.rank} is not positive")
        groups.setdefault(entry.query_id, []).append(entry)
    for query_id, group in groups.items():
        seen = {e.doc_id for e in group}
        if len(seen) != len(group):
            raise RunValidationError(f"query '{query_id}': duplicate doc_id in run")
        _validate_run_group(query_id, group)
    with _text_sink(destination) as out:
        for entry in entries:
            out.write(
                f"{entry.query_id} Q0 {entry.doc_id} {entry.rank} {entry.score!r} {entry.tag}\n"
            )


def read_run(source: TextPathOrIO) -> list[RunEntry]:
    """Parse a TREC run file, preserving line order."""
    entries: list[RunEntry] = []
    groups: dict[str, list[RunEntry]] = {}
    with _text_source(source) as stream:
        for line_no, raw in enumerate(stream, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise MalformedLineError(line_no, f"expected 6 columns, got {len(parts)}")
            query_id, q0, doc_id, rank_text, score_text, tag = parts
            if q0 != "Q0":
                raise MalformedLineError(line_no, f"second column must be Q0, got '{q0}'")
            try:
                rank = int(rank_text)
                score = float(score_text)
            except ValueError:
                raise MalformedLineError(line_no, "rank or score is not numeric") from None
            if rank < 1:
                raise MalformedLineError(line_no, f"rank {rank} is not positive")
            entry = RunEntry(query_id, doc_id, rank, score, tag)
            group = groups.setdefault(query_id, [])
            if any(e.doc_id == doc_id for e in group):
                raise DuplicateEntryError(
                    f"line {line_no}: duplicate doc '{doc_id}' for query '{query_id}'"
                )
            group.append(entry)
            entries.append(entry)
    for query_id, group in groups.items():
        _validate_run_group(query_id, group)
    return entries


def run_entries_by_query(entries: Sequence[RunEntry]) -> dict[str, list[str]]:
    """Group a run into query_id -> doc_ids ordered by rank."""
    grouped: dict[str, list[RunEntry]] = {}
    for entry in entries:
        grouped.setdefault(entry.query_id, []).append(entry)
    return {
        qid: [e.doc_id for e in sorted(group, key=lambda e: e.rank)]
        for qid, group in grouped.items()
    }
