"""Exact inner-product flat index with deterministic top-k search.

Scoring is exhaustive: every stored vector is scored against the query, so
results equal a brute-force sort by construction.  Vectors are stored in
single precision; dot products accumulate in double precision.  Ties are
broken by ascending external id so rankings are platform-stable.
"""

from __future__ import annotations

import numpy as np

from .encoder import ConcatEmbedding
from .errors import ValidationError
from .io_formats import FINGERPRINT_LEN, read_index_file, write_index_file

UNPARTITIONED = b"\x00" * FINGERPRINT_LEN


def _as_vector(query) -> np.ndarray:
    if isinstance(query, ConcatEmbedding):
        return query.vector(np.float32).astype(np.float64)
    arr = np.asarray(query, dtype=np.float64).reshape(-1)
    return arr


class FlatIndex:
    """Immutable id->vector store; search returns exact dot-product rankings."""

    def __init__(self, dim: int, ids: list[str], matrix: np.ndarray, fingerprint: bytes = UNPARTITIONED):
        if len(fingerprint) != FINGERPRINT_LEN:
            raise ValidationError(f"fingerprint must be {FINGERPRINT_LEN} bytes")
        if matrix.shape != (len(ids), dim):
            raise ValidationError(f"matrix shape {matrix.shape} != ({len(ids)}, {dim})")
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate external ids")
        self.dim = int(dim)
        self.ids = list(ids)
        self.matrix = np.ascontiguousarray(matrix, dtype=np.float32)
        self.fingerprint = bytes(fingerprint)
        # rank of each id in lexicographic order, for integer tie-breaking
        self._id_rank = np.argsort(np.argsort(np.asarray(self.ids, dtype=object), kind="stable"))
        self._matrix64 = self.matrix.astype(np.float64)

    @property
    def count(self) -> int:
        return len(self.ids)

    @classmethod
    def build(cls, embeddings, fingerprint: bytes = UNPARTITIONED) -> "FlatIndex":
        """Build from (external_id, ConcatEmbedding-or-vector) pairs."""
        items = list(embeddings)
        if not items:
            return cls(0, [], np.zeros((0, 0), dtype=np.float32), fingerprint)
        ids = []
        rows = []
        dim = None
        for ext_id, emb in items:
            vec = _as_vector(emb).astype(np.float32)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValidationError(
                    f"vector for id {ext_id!r} has dim {vec.size}, expected {dim}"
                )
            ids.append(str(ext_id))
            rows.append(vec)
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate external ids")
        return cls(dim, ids, np.stack(rows), fingerprint)

    def search(self, query, k: int) -> list[tuple[str, float]]:
        """Top-k by descending dot product; ties broken by ascending id."""
        if k < 1:
            raise ValidationError("k must be >= 1")
        if self.count == 0:
            return []
        q = _as_vector(query)
        if q.size != self.dim:
            raise ValidationError(f"query dim {q.size} != index dim {self.dim}")
        scores = self._matrix64 @ q
        k = min(k, self.count)
        if k < self.count:
            # keep every candidate tied with the k-th score so the id
            # tie-break cannot be cut off by the partial selection
            kth = np.partition(scores, self.count - k)[self.count - k]
            cand = np.flatnonzero(scores >= kth)
        else:
            cand = np.arange(self.count)
        order = np.lexsort((self._id_rank[cand], -scores[cand]))
        top = cand[order[:k]]
        return [(self.ids[i], float(scores[i])) for i in top]

    def save(self, path) -> None:
        write_index_file(path, self.dim, self.fingerprint, self.ids, self.matrix)

    @classmethod
    def load(cls, path) -> "FlatIndex":
        dim, fingerprint, ids, matrix = read_index_file(path)
        return cls(dim, ids, matrix, fingerprint)


def check_fingerprints(index_fp: bytes, queries_fp: bytes) -> None:
    """Refuse to search queries encoded under a different vocabulary partition.

    A zero fingerprint means "no partition recorded" and matches anything.
    """
    if index_fp == UNPARTITIONED or queries_fp == UNPARTITIONED:
        return
    if index_fp != queries_fp:
        raise ValidationError(
            "partition fingerprint mismatch between index and queries "
            f"({index_fp.hex()[:16]}... vs {queries_fp.hex()[:16]}...)"
        )
