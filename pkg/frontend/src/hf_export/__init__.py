"""Exports BERT-family MLM heads and token embeddings into interchange files."""

from .errors import FormatError, MissingHeadError, ValidationError
from .export import ALLOWED_MAX_LEN, export_embeddings, export_heads
from .formats import (
    DocumentEmbedding,
    EmbeddingDump,
    TextDocument,
    read_text_corpus,
    write_embedding_dump,
    write_tensors,
)

__all__ = [
    "ALLOWED_MAX_LEN",
    "DocumentEmbedding",
    "EmbeddingDump",
    "FormatError",
    "MissingHeadError",
    "TextDocument",
    "ValidationError",
    "export_embeddings",
    "export_heads",
    "read_text_corpus",
    "write_embedding_dump",
    "write_tensors",
]
