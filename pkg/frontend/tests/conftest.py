"""Local checkpoint fixtures.

Tests run against small randomly initialized checkpoints written to a temp
directory, so no network or model hub is involved.  The wordpiece vocabulary
puts the usual specials at ids 0..4 and includes a few real words so
tokenization exercises subword splitting.
"""

import json

import pytest

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
WORDS = [
    "hello",
    "world",
    "##ing",
    "the",
    "a",
    "of",
    "dense",
    "lexical",
    "retrieval",
    "vector",
    "text",
    "token",
    "##s",
    "pool",
    "match",
]


def write_tokenizer_files(directory, vocab_size: int) -> None:
    tokens = SPECIALS + WORDS
    tokens += [f"tok{i}" for i in range(len(tokens), vocab_size)]
    assert len(tokens) == vocab_size
    (directory / "vocab.txt").write_text("\n".join(tokens) + "\n", encoding="utf-8")
    # constructor-based tokenizers ignore vocab_file here; from_pretrained on
    # a directory with an explicit tokenizer_class is the reliable path
    (directory / "tokenizer_config.json").write_text(
        json.dumps({"tokenizer_class": "BertTokenizer", "do_lower_case": True}),
        encoding="utf-8",
    )


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    """One-layer BERT-base-shaped masked-LM checkpoint (768 x 30522)."""
    import torch
    from transformers import BertConfig, BertForMaskedLM

    directory = tmp_path_factory.mktemp("mlm-checkpoint")
    config = BertConfig(
        vocab_size=30522,
        hidden_size=768,
        num_hidden_layers=1,
        num_attention_heads=12,
        intermediate_size=512,
    )
    torch.manual_seed(0)
    model = BertForMaskedLM(config)
    model.eval()
    model.save_pretrained(directory)
    write_tokenizer_files(directory, config.vocab_size)
    return str(directory)


@pytest.fixture(scope="session")
def headless_checkpoint(tmp_path_factory):
    """Encoder-only checkpoint with no masked-LM head (small on purpose)."""
    import torch
    from transformers import BertConfig, BertModel

    directory = tmp_path_factory.mktemp("headless-checkpoint")
    config = BertConfig(
        vocab_size=1000,
        hidden_size=64,
        num_hidden_layers=1,
        num_attention_heads=4,
        intermediate_size=128,
    )
    torch.manual_seed(0)
    BertModel(config).save_pretrained(directory)
    write_tokenizer_files(directory, config.vocab_size)
    return str(directory)


@pytest.fixture()
def corpus_file(tmp_path):
    """Ten documents built from in-vocabulary words plus one unknown token."""
    docs = [
        {"id": "d0", "text": "hello world"},
        {"id": "d1", "text": "the dense vector pool"},
        {"id": "d2", "text": "worlding"},
        {"id": "d3", "text": "lexical retrieval of text"},
        {"id": "d4", "text": "hello zzzqx world"},
        {"id": "d5", "text": "a token match"},
        {"id": "d6", "text": "tokens pooling"},
        {"id": "d7", "text": "the the the"},
        {"id": "d8", "text": "dense lexical vector retrieval"},
        {"id": "d9", "text": "hello hello world world"},
    ]
    path = tmp_path / "corpus.jsonl"
    path.write_text("".join(json.dumps(d) + "\n" for d in docs), encoding="utf-8")
    return str(path)
