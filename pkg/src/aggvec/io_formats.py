"""On-disk interchange formats shared by every pipeline stage.

Binary formats are little-endian and round-trip bit-exactly:

TensorContainer (named f32 tensors, e.g. heads and checkpoints)
    magic "AGGT", u32 version=1, u32 tensor_count, then per tensor:
    u32 name_len, name UTF-8, u32 rank, u64 dims[rank], f32 data row-major.

EmbeddingDump (per-document contextualized token embeddings)
    magic "AGGE", u32 version=1, u32 d_model, u32 vocab_size,
    u32 producer_len, producer UTF-8, u64 doc_count, then per document:
    u32 id_len, id UTF-8, u32 token_count, i32 token_ids, u8 special_mask,
    [token_count x d_model] f32 embeddings, [d_model] f32 cls embedding.

Index vector file (also used for encoded vector sets)
    magic "AGIX", u32 version=1, u32 dim, u64 count, 32-byte partition
    fingerprint, then per record: u32 id_len, id UTF-8, dim x f32.

Text formats: partition JSON (explicit arrays plus the generator recipe),
corpus/queries JSONL ({"id": str, "token_ids": [int]} per line), training
JSONL ({"query": [int], "positive": str, "negatives": [str]} per line).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    FormatError,
    SizeMismatchError,
    TruncatedFileError,
    UnsupportedVersionError,
    ValidationError,
)
from .lexical import TokenEmbeddingSequence
from .pruning import SlicePartition
from .training import TrainingExample

TENSOR_MAGIC = b"AGGT"
EMBED_MAGIC = b"AGGE"
INDEX_MAGIC = b"AGIX"
TENSOR_VERSION = 1
EMBED_VERSION = 1
INDEX_VERSION = 1
FINGERPRINT_LEN = 32

# caps keep a corrupt header from provoking a giant allocation
_MAX_NAME = 1 << 16
_MAX_RANK = 8


class _Reader:
    """Bounds-checked cursor over a fully loaded file."""

    def __init__(self, data: bytes, what: str):
        self.data = data
        self.off = 0
        self.what = what

    def take(self, n: int) -> memoryview:
        if self.off + n > len(self.data):
            raise TruncatedFileError(
                f"{self.what}: needed {n} bytes at offset {self.off}, file has {len(self.data)}"
            )
        out = memoryview(self.data)[self.off : self.off + n]
        self.off += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def text(self, n: int) -> str:
        try:
            return bytes(self.take(n)).decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError(f"{self.what}: invalid UTF-8 string") from e

    def f32_array(self, shape: tuple[int, ...]) -> np.ndarray:
        count = 1
        for s in shape:
            count *= s
        raw = self.take(4 * count)
        return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()

    def expect_end(self) -> None:
        if self.off != len(self.data):
            raise SizeMismatchError(
                f"{self.what}: {len(self.data) - self.off} trailing bytes after declared payload"
            )

    def expect_magic(self, magic: bytes) -> None:
        got = bytes(self.take(len(magic)))
        if got != magic:
            raise BadMagicError(f"{self.what}: magic {got!r}, expected {magic!r}")

    def expect_version(self, version: int) -> None:
        got = self.u32()
        if got != version:
            raise UnsupportedVersionError(f"{self.what}: version {got}, expected {version}")


def _load(path, what: str) -> _Reader:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except FileNotFoundError:
        raise
    return _Reader(data, what)


def _name_bytes(name: str, what: str) -> bytes:
    raw = name.encode("utf-8")
    if not 0 < len(raw) < _MAX_NAME:
        raise ValidationError(f"{what}: name length {len(raw)} outside (0, {_MAX_NAME})")
    return raw


# ---------------------------------------------------------------------------
# TensorContainer


def write_tensors(path, tensors: dict[str, np.ndarray]) -> None:
    """Write named tensors as f32; insertion order is preserved on disk."""
    chunks = [TENSOR_MAGIC, struct.pack("<II", TENSOR_VERSION, len(tensors))]
    for name, value in tensors.items():
        # asarray, not ascontiguousarray: the latter promotes 0-d to shape (1,)
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


def read_tensors(path) -> dict[str, np.ndarray]:
    r = _load(path, "tensor container")
    r.expect_magic(TENSOR_MAGIC)
    r.expect_version(TENSOR_VERSION)
    count = r.u32()
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.text(r.u32())
        if name in out:
            raise FormatError(f"tensor container: duplicate tensor name {name!r}")
        rank = r.u32()
        if rank > _MAX_RANK:
            raise FormatError(f"tensor container: rank {rank} exceeds cap {_MAX_RANK}")
        dims = tuple(r.u64() for _ in range(rank))
        out[name] = r.f32_array(dims)
    r.expect_end()
    return out


# ---------------------------------------------------------------------------
# EmbeddingDump


@dataclass(frozen=True)
class EmbeddingRecord:
    """One document's contextualized token embeddings plus its CLS vector."""

    doc_id: str
    token_ids: np.ndarray  # [L] int
    special_mask: np.ndarray  # [L] bool; True rows are excluded from pooling
    embeddings: np.ndarray  # [L, d_model] f32
    cls_embedding: np.ndarray  # [d_model] f32

    def sequence(self) -> TokenEmbeddingSequence:
        return TokenEmbeddingSequence(
            embeddings=np.asarray(self.embeddings, dtype=np.float64),
            token_ids=np.asarray(self.token_ids, dtype=np.int64),
            special_mask=np.asarray(self.special_mask, dtype=bool),
            cls_embedding=np.asarray(self.cls_embedding, dtype=np.float64),
        )


@dataclass
class EmbeddingDump:
    d_model: int
    vocab_size: int
    producer: str
    records: list[EmbeddingRecord]


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
    for rec in dump.records:
        ids = np.asarray(rec.token_ids, dtype="<i4").reshape(-1)
        mask = np.asarray(rec.special_mask, dtype=bool).reshape(-1)
        emb = np.ascontiguousarray(np.asarray(rec.embeddings), dtype="<f4")
        cls = np.ascontiguousarray(np.asarray(rec.cls_embedding), dtype="<f4").reshape(-1)
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


def read_embedding_dump(path) -> EmbeddingDump:
    r = _load(path, "embedding dump")
    r.expect_magic(EMBED_MAGIC)
    r.expect_version(EMBED_VERSION)
    d_model = r.u32()
    vocab_size = r.u32()
    producer = r.text(r.u32())
    count = r.u64()
    records = []
    seen: set[str] = set()
    for _ in range(count):
        doc_id = r.text(r.u32())
        if doc_id in seen:
            raise FormatError(f"embedding dump: duplicate document id {doc_id!r}")
        seen.add(doc_id)
        length = r.u32()
        if length < 1:
            raise SizeMismatchError(f"embedding dump: document {doc_id!r} declares 0 tokens")
        token_ids = np.frombuffer(r.take(4 * length), dtype="<i4").astype(np.int64)
        mask = np.frombuffer(r.take(length), dtype="u1").astype(bool)
        emb = r.f32_array((length, d_model))
        cls = r.f32_array((d_model,))
        records.append(EmbeddingRecord(doc_id, token_ids, mask, emb, cls))
    r.expect_end()
    return EmbeddingDump(d_model=d_model, vocab_size=vocab_size, producer=producer, records=records)


# ---------------------------------------------------------------------------
# index / encoded-vector file


def write_index_file(path, dim: int, fingerprint: bytes, ids: list[str], matrix: np.ndarray) -> None:
    if len(fingerprint) != FINGERPRINT_LEN:
        raise ValidationError(f"fingerprint must be {FINGERPRINT_LEN} bytes, got {len(fingerprint)}")
    mat = np.ascontiguousarray(np.asarray(matrix), dtype="<f4")
    if mat.ndim != 2 or mat.shape != (len(ids), dim):
        raise ValidationError(f"matrix shape {mat.shape} != ({len(ids)}, {dim})")
    chunks = [
        INDEX_MAGIC,
        struct.pack("<II", INDEX_VERSION, int(dim)),
        struct.pack("<Q", len(ids)),
        bytes(fingerprint),
    ]
    for i, ext_id in enumerate(ids):
        raw = _name_bytes(ext_id, "index file")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(mat[i].tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def read_index_file(path) -> tuple[int, bytes, list[str], np.ndarray]:
    r = _load(path, "index file")
    r.expect_magic(INDEX_MAGIC)
    r.expect_version(INDEX_VERSION)
    dim = r.u32()
    count = r.u64()
    fingerprint = bytes(r.take(FINGERPRINT_LEN))
    ids: list[str] = []
    rows = np.empty((count, dim), dtype=np.float32)
    seen: set[str] = set()
    for i in range(count):
        ext_id = r.text(r.u32())
        if ext_id in seen:
            raise FormatError(f"index file: duplicate id {ext_id!r}")
        seen.add(ext_id)
        ids.append(ext_id)
        rows[i] = r.f32_array((dim,))
    r.expect_end()
    return dim, fingerprint, ids, rows


# ---------------------------------------------------------------------------
# partition JSON


def write_partition(path, part: SlicePartition) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(part.to_json_dict(), f, indent=2)
        f.write("\n")


def read_partition(path) -> SlicePartition:
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"partition file: invalid JSON ({e})") from e
    return SlicePartition.from_json_dict(payload)


# ---------------------------------------------------------------------------
# JSONL corpora and training data


def _jsonl_records(path, what: str):
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{what}: line {lineno} is not valid JSON ({e})") from e
            if not isinstance(rec, dict):
                raise FormatError(f"{what}: line {lineno} is not a JSON object")
            yield lineno, rec


def _int_list(value, what: str) -> list[int]:
    if not isinstance(value, list) or not all(isinstance(t, int) for t in value):
        raise FormatError(f"{what} must be a list of integers")
    return list(value)


def read_corpus(path) -> dict[str, list[int]]:
    """Corpus (or queries) JSONL -> ordered {id: token_ids}."""
    out: dict[str, list[int]] = {}
    for lineno, rec in _jsonl_records(path, "corpus"):
        if set(rec) != {"id", "token_ids"}:
            raise FormatError(f"corpus: line {lineno} needs exactly 'id' and 'token_ids'")
        doc_id = rec["id"]
        if not isinstance(doc_id, str):
            raise FormatError(f"corpus: line {lineno} id must be a string")
        if doc_id in out:
            raise FormatError(f"corpus: duplicate id {doc_id!r} at line {lineno}")
        out[doc_id] = _int_list(rec["token_ids"], f"corpus: line {lineno} token_ids")
    return out


def write_corpus(path, corpus: dict[str, list[int]]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for doc_id, token_ids in corpus.items():
            f.write(json.dumps({"id": doc_id, "token_ids": list(map(int, token_ids))}))
            f.write("\n")


def read_training(path) -> list[TrainingExample]:
    out = []
    for lineno, rec in _jsonl_records(path, "training data"):
        if set(rec) != {"query", "positive", "negatives"}:
            raise FormatError(
                f"training data: line {lineno} needs exactly 'query', 'positive', 'negatives'"
            )
        query = _int_list(rec["query"], f"training data: line {lineno} query")
        positive = rec["positive"]
        negatives = rec["negatives"]
        if not isinstance(positive, str):
            raise FormatError(f"training data: line {lineno} positive must be a string")
        if not isinstance(negatives, list) or not all(isinstance(n, str) for n in negatives):
            raise FormatError(f"training data: line {lineno} negatives must be a list of strings")
        out.append(TrainingExample(tuple(query), positive, tuple(negatives)))
    return out


def write_training(path, examples: list[TrainingExample]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for ex in examples:
            f.write(
                json.dumps(
                    {
                        "query": list(map(int, ex.query_ids)),
                        "positive": ex.positive_id,
                        "negatives": list(ex.negative_ids),
                    }
                )
            )
            f.write("\n")


# ---------------------------------------------------------------------------
# toy-encoder checkpoints (stored in the tensor container; f32 on disk)

_META_MAX_LEN = "meta.max_len"
_META_SEED = "meta.seed"


def save_toy_encoder(path, enc) -> None:
    tensors = dict(enc.params)
    tensors[_META_MAX_LEN] = np.float32(enc.max_len)
    tensors[_META_SEED] = np.float32(enc.seed)
    write_tensors(path, tensors)


def load_toy_encoder(path):
    from .encoder import ToyEncoder  # local import to avoid a cycle

    tensors = read_tensors(path)
    try:
        max_len = int(tensors.pop(_META_MAX_LEN))
        seed = int(tensors.pop(_META_SEED))
    except KeyError as e:
        raise FormatError(f"checkpoint missing metadata tensor {e.args[0]!r}") from e
    return ToyEncoder(tensors, max_len=max_len, seed=seed)
