"""Vocabulary-space lexical representations of token sequences.

Each contextualized token embedding is projected through a masked-LM head
into a probability distribution over the wordpiece vocabulary, scaled by a
learned scalar term weight, and the per-vocabulary-entry maximum over token
positions becomes a single nonnegative lexical vector for the sequence.

All heads are immutable after construction and every operation here is a
pure function, so concurrent callers need no synchronization.  Arithmetic
accumulates in float64; results are returned in the dtype of the embedding
input (float32 inputs keep float32 storage).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptySequenceError, ValidationError


class PoolingVariant(enum.Enum):
    """How token distributions and term weights enter the pooling step.

    FULL uses the masked-LM projection and learned term weights.
    UNIT_WEIGHT keeps the projection but forces every term weight to one.
    NO_MLM replaces each projection with the one-hot indicator of the
    token id, keeping the learned term weights.
    """

    FULL = "full"
    UNIT_WEIGHT = "unit_weight"
    NO_MLM = "no_mlm"


def _as_float_matrix(a, name: str) -> np.ndarray:
    arr = np.asarray(a)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class MlmHead:
    """Linear projector from model space to the wordpiece vocabulary."""

    projection: np.ndarray  # [d_model, vocab_size]
    bias: np.ndarray  # [vocab_size]

    def __post_init__(self):
        proj = _as_float_matrix(self.projection, "projection")
        bias = np.asarray(self.bias, dtype=proj.dtype).reshape(-1)
        if not np.all(np.isfinite(bias)):
            raise ValidationError("bias contains non-finite entries")
        if proj.shape[1] != bias.shape[0]:
            raise ValidationError(
                f"projection columns ({proj.shape[1]}) != bias length ({bias.shape[0]})"
            )
        if proj.shape[1] == 0:
            raise ValidationError("vocab_size must be positive")
        object.__setattr__(self, "projection", proj)
        object.__setattr__(self, "bias", bias)

    @property
    def d_model(self) -> int:
        return self.projection.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.projection.shape[1]


@dataclass(frozen=True)
class TermWeightHead:
    """Scalar term-importance head: weight vector plus bias."""

    weight: np.ndarray  # [d_model]
    bias: float

    def __post_init__(self):
        w = np.asarray(self.weight, dtype=np.float64).reshape(-1)
        b = float(self.bias)
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise ValidationError("term-weight head has non-finite entries")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def d_model(self) -> int:
        return self.weight.shape[0]


@dataclass
class TokenEmbeddingSequence:
    """Per-token contextualized embeddings plus the sequence-level vector.

    ``special_mask`` marks positions excluded from lexical pooling
    (CLS / SEP / padding).  The CLS embedding is carried separately so the
    sequence-level path never mixes with the lexical one.
    """

    embeddings: np.ndarray  # [seq_len, d_model]
    token_ids: np.ndarray  # [seq_len]
    special_mask: np.ndarray  # [seq_len] bool
    cls_embedding: np.ndarray  # [d_model]

    def __post_init__(self):
        self.embeddings = _as_float_matrix(self.embeddings, "embeddings")
        self.token_ids = np.asarray(self.token_ids, dtype=np.int64).reshape(-1)
        self.special_mask = np.asarray(self.special_mask, dtype=bool).reshape(-1)
        self.cls_embedding = np.asarray(self.cls_embedding).reshape(-1)
        n = self.embeddings.shape[0]
        if n == 0:
            raise ValidationError("sequence must contain at least one position")
        if self.token_ids.shape[0] != n or self.special_mask.shape[0] != n:
            raise ValidationError("token_ids/special_mask length != embedding rows")
        if np.any(self.token_ids < 0):
            raise ValidationError("token ids must be nonnegative")
        if self.cls_embedding.shape[0] != self.embeddings.shape[1]:
            raise ValidationError("cls embedding dimension != d_model")

    @property
    def seq_len(self) -> int:
        return self.embeddings.shape[0]

    @property
    def d_model(self) -> int:
        return self.embeddings.shape[1]


@dataclass(frozen=True)
class LexicalVector:
    """Nonnegative vocabulary-sized term-weight vector."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values).reshape(-1)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("lexical vector has non-finite entries")
        if vals.size and float(vals.min()) < 0:
            raise ValidationError("lexical vector entries must be nonnegative")
        object.__setattr__(self, "values", vals)

    @property
    def vocab_size(self) -> int:
        return self.values.shape[0]


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-logit subtraction, accumulated in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def mlm_project(e: np.ndarray, head: MlmHead) -> np.ndarray:
    """Project one embedding to a probability distribution over the vocabulary."""
    return mlm_project_rows(np.asarray(e).reshape(1, -1), head)[0]


def mlm_project_rows(embeddings: np.ndarray, head: MlmHead) -> np.ndarray:
    """Vectorized mlm_project over rows; returns [rows, vocab_size]."""
    emb = np.asarray(embeddings)
    if emb.ndim != 2 or emb.shape[1] != head.d_model:
        raise ValidationError(
            f"embedding dimension {emb.shape} does not match head d_model {head.d_model}"
        )
    logits = emb.astype(np.float64) @ head.projection.astype(np.float64)
    logits += head.bias.astype(np.float64)
    probs = softmax_rows(logits)
    if np.issubdtype(emb.dtype, np.floating):
        return probs.astype(emb.dtype)
    return probs


def term_weight(e: np.ndarray, head: TermWeightHead) -> float:
    """Nonnegative scalar importance |e . weight + bias| for one embedding."""
    return float(term_weight_rows(np.asarray(e).reshape(1, -1), head)[0])


def term_weight_rows(embeddings: np.ndarray, head: TermWeightHead) -> np.ndarray:
    emb = np.asarray(embeddings)
    if emb.ndim != 2 or emb.shape[1] != head.d_model:
        raise ValidationError(
            f"embedding dimension {emb.shape} does not match head d_model {head.d_model}"
        )
    raw = emb.astype(np.float64) @ head.weight + head.bias
    return np.abs(raw)


def weighted_max_pool(
    seq: TokenEmbeddingSequence,
    mlm: MlmHead | None,
    tw: TermWeightHead | None,
    variant: PoolingVariant = PoolingVariant.FULL,
    *,
    vocab_size: int | None = None,
) -> LexicalVector:
    """Pool a token sequence into one lexical vector.

    Every non-special position i contributes w_i * p_i elementwise, and each
    vocabulary entry keeps the maximum contribution over positions.  The
    variant controls whether p_i comes from the masked-LM projection or a
    token-id indicator, and whether w_i is learned or forced to one.

    ``vocab_size`` is only consulted for NO_MLM when no head is supplied.
    """
    keep = ~seq.special_mask
    if not keep.any():
        raise EmptySequenceError("all positions are special; nothing to pool")
    emb = seq.embeddings[keep]
    ids = seq.token_ids[keep]

    if variant is PoolingVariant.UNIT_WEIGHT:
        weights = np.ones(emb.shape[0], dtype=np.float64)
    else:
        if tw is None:
            raise ValidationError(f"variant {variant.value} requires a term-weight head")
        weights = term_weight_rows(emb, tw)

    if variant is PoolingVariant.NO_MLM:
        size = vocab_size if vocab_size is not None else (mlm.vocab_size if mlm else None)
        if size is None:
            raise ValidationError("NO_MLM pooling needs vocab_size or an MLM head")
        if int(ids.max()) >= size:
            raise ValidationError("token id out of vocabulary range")
        values = np.zeros(size, dtype=np.float64)
        np.maximum.at(values, ids, weights)
    else:
        if mlm is None:
            raise ValidationError(f"variant {variant.value} requires an MLM head")
        probs = mlm_project_rows(emb, mlm).astype(np.float64)
        values = (weights[:, None] * probs).max(axis=0)

    if np.issubdtype(seq.embeddings.dtype, np.floating):
        values = values.astype(seq.embeddings.dtype)
    return LexicalVector(values)
