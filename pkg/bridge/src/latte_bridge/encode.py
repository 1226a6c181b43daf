"""Offline export of token embeddings and attention weights.

Runs a bidirectional transformer encoder over texts and emits one record
per input: final-layer token states normalized to unit vectors, plus a
per-token attention weight under one of two policies.

cls_to_token_last_layer_mean_heads (default)
    Last-layer attention from the sequence-start classification token to
    each token, averaged over heads. Being one softmax row, it sums to 1
    across the sequence's real positions.

received_attention_sum
    Total last-layer attention received by each token, summed over real
    source positions and heads, then normalized to sum to 1.

Queries are padded to their token budget with mask tokens that attend and
embed like real tokens (they participate in matching); documents are
truncated to their budget and never padded. content_len counts the
pre-padding tokens, special tokens included.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .lire import BridgeRecord, write_lire

QUERY_TOKEN_BUDGET = 32
DOC_TOKEN_BUDGET = 300

POLICIES = ("cls_to_token_last_layer_mean_heads", "received_attention_sum")


class BridgeError(Exception):
    """Invalid input or configuration for the bridge."""


@dataclass(frozen=True)
class BridgeConfig:
    """Export settings for one encoding run."""

    model: str
    role: str                              # "query" or "document"
    max_tokens: int | None = None          # None = budget for the role
    attention_policy: str = POLICIES[0]
    batch_size: int = 16
    mark_special: bool = False             # keep_mask=False on CLS/SEP/PAD

    def __post_init__(self) -> None:
        if self.role not in ("query", "document"):
            raise BridgeError(f"role must be query or document, got '{self.role}'")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise BridgeError(f"max_tokens must be positive, got {self.max_tokens}")
        if self.attention_policy not in POLICIES:
            raise BridgeError(
                f"unknown attention policy '{self.attention_policy}', pick one of {POLICIES}"
            )
        if self.batch_size < 1:
            raise BridgeError(f"batch_size must be positive, got {self.batch_size}")

    @property
    def budget(self) -> int:
        if self.max_tokens is not None:
            return self.max_tokens
        return QUERY_TOKEN_BUDGET if self.role == "query" else DOC_TOKEN_BUDGET


def _load(config: BridgeConfig):
    from transformers import AutoModel, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(config.model)
    # eager attention keeps per-head matrices available
    model = AutoModel.from_pretrained(config.model, attn_implementation="eager")
    model.eval()
    if config.role == "query" and tokenizer.mask_token_id is None:
        raise BridgeError("tokenizer lacks a mask token, cannot pad queries")
    return tokenizer, model


def _attention_vector(
    attentions: torch.Tensor, source_mask: torch.Tensor, policy: str
) -> torch.Tensor:
    """(heads, S, S) last-layer attention -> per-token weights over S."""
    if policy == "cls_to_token_last_layer_mean_heads":
        return attentions.mean(dim=0)[0, :]
    received = (attentions * source_mask[None, :, None]).sum(dim=(0, 1))
    total = received.sum()
    if float(total) <= 0.0:
        raise BridgeError("received attention summed to zero")
    return received / total


def encode_texts(
    texts: Sequence[tuple[str, str]],
    config: BridgeConfig,
) -> list[BridgeRecord]:
    """Encode (id, text) pairs into records ready for LIRE serialization."""
    tokenizer, model = _load(config)
    records: list[BridgeRecord] = []
    for start in range(0, len(texts), config.batch_size):
        batch = texts[start : start + config.batch_size]
        records.extend(_encode_batch(batch, tokenizer, model, config))
    return records


def _encode_batch(batch, tokenizer, model, config: BridgeConfig) -> list[BridgeRecord]:
    ids = [record_id for record_id, _ in batch]
    budget = config.budget
    encoded = tokenizer(
        [text for _, text in batch],
        truncation=True,
        max_length=budget,
        padding="max_length" if config.role == "query" else "longest",
        return_tensors="pt",
    )
    input_ids = encoded["input_ids"]
    attention_mask = encoded["attention_mask"]
    content_lens = attention_mask.sum(dim=1).tolist()
    special_ids = {tokenizer.cls_token_id, tokenizer.sep_token_id, tokenizer.pad_token_id}

    n_content_specials = []
    for row, length in zip(input_ids, content_lens):
        specials = sum(1 for t in row[:length].tolist() if t in special_ids)
        n_content_specials.append(specials)
        if length - specials <= 0:
            record_id = ids[len(n_content_specials) - 1]
            raise BridgeError(f"input '{record_id}' produced zero content tokens")

    if config.role == "query":
        # query augmentation: the pad positions become attending mask tokens
        pad_positions = attention_mask == 0
        input_ids = input_ids.masked_fill(pad_positions, tokenizer.mask_token_id)
        attention_mask = torch.ones_like(attention_mask)

    with torch.no_grad():
        output = model(
            input_ids=input_ids,
            attention_mask=attention_mask,
            output_attentions=True,
        )
    hidden = output.last_hidden_state          # (B, S, H)
    last_attention = output.attentions[-1]     # (B, heads, S, S)

    records = []
    for b, (record_id, _) in enumerate(batch):
        content_len = int(content_lens[b])
        stored = budget if config.role == "query" else content_len
        states = hidden[b, :stored].to(torch.float64).numpy()
        norms = np.linalg.norm(states, axis=1)
        if (norms == 0.0).any():
            raise BridgeError(f"input '{record_id}' produced a zero-norm token state")
        embeddings = (states / norms[:, None]).astype(np.float32)

        weights = _attention_vector(
            last_attention[b], attention_mask[b].to(last_attention.dtype),
            config.attention_policy,
        )
        attention = weights[:stored].to(torch.float64).numpy()
        attention = np.clip(attention, 0.0, None).astype(np.float32)

        keep_mask = None
        if config.mark_special:
            row = input_ids[b, :stored].tolist()
            # mask-token query padding stays kept; CLS/SEP/PAD are marked out
            keep_mask = np.array([t not in special_ids for t in row], dtype=bool)

        records.append(
            BridgeRecord(
                id=record_id,
                role=config.role,
                embeddings=embeddings,
                attention=attention,
                content_len=content_len,
                keep_mask=keep_mask,
            )
        )
    return records


def read_texts_tsv(source: str | Path) -> list[tuple[str, str]]:
    """Parse an "id<TAB>text" file, rejecting malformed or duplicate lines."""
    texts: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(source, "r", encoding="utf-8") as stream:
        for line_no, raw in enumerate(stream, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                continue
            record_id, sep, text = line.partition("\t")
            if not sep or not record_id:
                raise BridgeError(f"line {line_no}: expected 'id<TAB>text'")
            if record_id in seen:
                raise BridgeError(f"line {line_no}: duplicate id '{record_id}'")
            seen.add(record_id)
            texts.append((record_id, text))
    return texts


def encode_file(
    source: str | Path, destination: str | Path, config: BridgeConfig
) -> int:
    """TSV in, LIRE out; returns the record count."""
    texts = read_texts_tsv(source)
    records = encode_texts(texts, config)
    write_lire(records, destination)
    return len(records)
