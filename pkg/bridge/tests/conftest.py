"""Fixtures: a tiny deterministic encoder on disk plus a 20-sentence sample."""

from __future__ import annotations

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
WORDS = [
    "the", "a", "cat", "dog", "bird", "fox", "sat", "ran", "flew", "slept",
    "on", "under", "over", "near", "mat", "tree", "roof", "river", "house",
    "garden", "red", "blue", "old", "small", "child", "reads", "book",
    "sings", "song", "walks", "path", "morning", "evening", "quiet", "fast",
]

SENTENCES = [
    "the cat sat on the mat",
    "a dog ran under the tree",
    "the bird flew over the roof",
    "a fox slept near the river",
    "the child reads a book in the garden" ,
    "the old dog walks the path",
    "a small bird sings a song",
    "the red cat slept on the roof",
    "a blue bird flew near the house",
    "the child sings a quiet song",
    "the fast fox ran over the path",
    "a cat walks near the garden",
    "the dog sat under the tree in the morning",
    "a bird slept on the mat",
    "the old fox reads a book",
    "a child ran near the river in the evening",
    "the quiet cat sat near the house",
    "a dog sings a song on the path",
    "the small child walks the garden",
    "a red fox flew over the river",
]


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory) -> str:
    """A seeded 2-layer bidirectional encoder saved to disk."""
    vocab = {token: index for index, token in enumerate(SPECIALS + WORDS)}
    tokenizer = BertTokenizerFast(vocab=vocab, do_lower_case=True)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=64,
        max_position_embeddings=512,
        attn_implementation="eager",
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.eval()
    target = tmp_path_factory.mktemp("tiny-encoder")
    model.save_pretrained(target)
    tokenizer.save_pretrained(target)
    return str(target)


@pytest.fixture()
def sample_tsv(tmp_path):
    path = tmp_path / "sample.tsv"
    path.write_text(
        "".join(f"s{i:02d}\t{text}\n" for i, text in enumerate(SENTENCES)),
        encoding="utf-8",
    )
    return path
