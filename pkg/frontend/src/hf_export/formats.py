"""Writers for the interchange files the encoding pipeline consumes.

The byte layouts are the pipeline's external contract, so they are written
here with explicit struct packing rather than borrowed from the consumer:

TensorContainer (named f32 tensors)
    magic "AGGT", u32 version=1, u32 tensor_count, then per tensor:
    u32 name_len, name UTF-8, u32 rank, u64 dims[rank], f32 data row-major.

EmbeddingDump (per-document contextualized token embeddings)
    magic "AGGE", u32 version=1, u32 d_model, u32 vocab_size,
    u32 producer_len, producer UTF-8, u64 doc_count, then per document:
    u32 id_len, id UTF-8, u32 token_count, i32 token_ids, u8 special_mask,
    [token_count x d_model] f32 embeddings, [d_model] f32 cls embedding.

All integers and floats are little-endian.  The text corpus consumed by the
embedding exporter is JSONL with exactly {"id": str, "text": str} per line.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ValidationError

TENSOR_MAGIC = b"AGGT"
EMBED_MAGIC = b"AGGE"
TENSOR_VERSION = 1
EMBED_VERSION = 1


def _name_bytes(name: str, what: str) -> bytes:
    raw = name.encode("utf-8")
    if not raw:
        raise ValidationError(f"{what}: name must be non-empty")
    return raw


def write_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors as f32; insertion order is preserved on disk."""
    chunks = [TENSOR_MAGIC, struct.pack("<II", TENSOR_VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.asarray(value, dtype="<f4")
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"tensor {name!r} has non-finite entries")
        raw = _name_bytes(name, "tensor")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape) if arr.ndim else b"")
        chunks.append(arr.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


@dataclass
class DocumentEmbedding:
    """One document's per-position embeddings plus its CLS summary."""

    doc_id: str
    token_ids: np.ndarray  # [token_count] int
    special_mask: np.ndarray  # [token_count] bool, True for CLS/SEP/pad
    embeddings: np.ndarray  # [token_count x d_model] float
    cls_embedding: np.ndarray  # [d_model] float


@dataclass
class EmbeddingDump:
    """A set of document embeddings with the producing model's dimensions."""

    d_model: int
    vocab_size: int
    producer: str
    records: list[DocumentEmbedding]


def write_embedding_dump(path, dump: EmbeddingDump) -> None:
    d_model = int(dump.d_model)
    if d_model < 1:
        raise ValidationError("d_model must be >= 1")
    producer = dump.producer.encode("utf-8")
    chunks = [
        EMBED_MAGIC,
        struct.pack("<IIII", EMBED_VERSION, d_model, int(dump.vocab_size), len(producer)),
        producer,
        struct.pack("<Q", len(dump.records)),
    ]
    seen: set[str] = set()
    for rec in dump.records:
        ids = np.asarray(rec.token_ids, dtype="<i4").reshape(-1)
        mask = np.asarray(rec.special_mask, dtype=bool).reshape(-1)
        emb = np.ascontiguousarray(np.asarray(rec.embeddings), dtype="<f4")
        cls = np.ascontiguousarray(np.asarray(rec.cls_embedding), dtype="<f4").reshape(-1)
        if rec.doc_id in seen:
            raise ValidationError(f"duplicate document id {rec.doc_id!r}")
        seen.add(rec.doc_id)
        if ids.size < 1:
            raise ValidationError(f"document {rec.doc_id!r} has no tokens")
        if emb.shape != (ids.size, d_model) or mask.size != ids.size or cls.size != d_model:
            raise ValidationError(f"document {rec.doc_id!r} has inconsistent shapes")
        raw = _name_bytes(rec.doc_id, "embedding dump")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", ids.size))
        chunks.append(ids.tobytes())
        chunks.append(mask.astype("u1").tobytes())
        chunks.append(emb.tobytes())
        chunks.append(cls.tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


@dataclass
class TextDocument:
    """One raw-text corpus entry."""

    doc_id: str
    text: str


def read_text_corpus(path) -> list[TextDocument]:
    """Read JSONL with exactly {"id": str, "text": str} per line.

    Blank lines are skipped; ids must be unique.  Empty text is kept here so
    the exporter can count the skips it reports.
    """
    docs: list[TextDocument] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"text corpus line {lineno}: invalid JSON ({e})") from e
            if not isinstance(obj, dict) or set(obj) != {"id", "text"}:
                raise FormatError(f'text corpus line {lineno}: expected keys {{"id", "text"}}')
            doc_id, text = obj["id"], obj["text"]
            if not isinstance(doc_id, str) or not doc_id:
                raise FormatError(f"text corpus line {lineno}: id must be a non-empty string")
            if not isinstance(text, str):
                raise FormatError(f"text corpus line {lineno}: text must be a string")
            if doc_id in seen:
                raise FormatError(f"text corpus line {lineno}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            docs.append(TextDocument(doc_id, text))
    return docs
