"""Concatenated retrieval embeddings and a small trainable encoder.

``encode`` is the pipeline's join point: project the CLS embedding down,
pool token embeddings into the vocabulary-sized lexical vector, prune it to
d dimensions, and concatenate the two parts.  The inner product of two
concatenated embeddings decomposes exactly into the CLS and aggregate block
dot products, which scoring and training rely on.

ToyEncoder is a desk-scale stand-in for a transformer: token + position
embeddings, one context-mixing layer, and a summary vector in place of a
CLS token.  It exists so training and gradient claims are testable without
a pretrained checkpoint; it is not a language model.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .lexical import (
    LexicalVector,
    MlmHead,
    PoolingVariant,
    TermWeightHead,
    TokenEmbeddingSequence,
    weighted_max_pool,
)
from .pruning import (
    AggKind,
    AggVector,
    PruningKind,
    SlicePartition,
    prune_full,
    prune_linear,
    prune_semi,
    prune_semi_mean,
)


class EmbeddingSource(enum.Enum):
    """Where the aggregate part of the embedding comes from."""

    LEXICAL = "lexical"  # pooled lexical vector, then pruned
    AVERAGE = "average"  # mean of non-special token embeddings, dense projection
    REPBERT = "repbert"  # mean over all embeddings including CLS, no projection


@dataclass(frozen=True)
class ClsProjection:
    """Linear map taking the CLS embedding to the low-dimensional dense part."""

    weight: np.ndarray  # [d_model, d_cls]
    bias: np.ndarray  # [d_cls]

    def __post_init__(self):
        w = np.asarray(self.weight)
        b = np.asarray(self.bias).reshape(-1)
        if w.ndim != 2 or w.shape[1] < 1:
            raise ValidationError(f"projection weight must be [d_model, d_cls], got {w.shape}")
        if b.shape != (w.shape[1],):
            raise ValidationError("projection bias length must equal d_cls")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValidationError("projection parameters must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "bias", b)

    @property
    def d_model(self) -> int:
        return self.weight.shape[0]

    @property
    def d_cls(self) -> int:
        return self.weight.shape[1]


def project_cls(cls_embedding: np.ndarray, proj: ClsProjection, *, use_bias: bool = True) -> np.ndarray:
    e = np.asarray(cls_embedding).reshape(-1)
    if e.shape[0] != proj.d_model:
        raise ValidationError(
            f"cls embedding length {e.shape[0]} does not match projection d_model {proj.d_model}"
        )
    out = e.astype(np.float64) @ proj.weight.astype(np.float64)
    if use_bias:
        out = out + proj.bias
    return out.astype(e.dtype) if e.dtype.kind == "f" else out


@dataclass(frozen=True)
class ConcatEmbedding:
    """Projected CLS vector joined with the pruned aggregate; the retrieval unit."""

    cls_part: np.ndarray
    agg_part: AggVector

    def __post_init__(self):
        c = np.asarray(self.cls_part).reshape(-1)
        if not np.all(np.isfinite(c)):
            raise ValidationError("cls part has non-finite entries")
        object.__setattr__(self, "cls_part", c)

    @property
    def d_cls(self) -> int:
        return self.cls_part.shape[0]

    @property
    def d_agg(self) -> int:
        return self.agg_part.dim

    @property
    def dim(self) -> int:
        return self.d_cls + self.d_agg

    def vector(self, dtype=np.float32) -> np.ndarray:
        return np.concatenate([self.cls_part, self.agg_part.values]).astype(dtype)


def similarity_parts(q: ConcatEmbedding, p: ConcatEmbedding) -> tuple[float, float]:
    """(CLS block dot product, aggregate block dot product)."""
    if q.d_cls != p.d_cls or q.d_agg != p.d_agg:
        raise ValidationError(
            f"embedding shapes differ: ({q.d_cls},{q.d_agg}) vs ({p.d_cls},{p.d_agg})"
        )
    sim_cls = float(q.cls_part.astype(np.float64) @ p.cls_part.astype(np.float64))
    sim_agg = float(q.agg_part.values.astype(np.float64) @ p.agg_part.values.astype(np.float64))
    return sim_cls, sim_agg


def similarity(q: ConcatEmbedding, p: ConcatEmbedding) -> float:
    """Inner product of the concatenated vectors; equals the sum of the block dots."""
    sim_cls, sim_agg = similarity_parts(q, p)
    return sim_cls + sim_agg


@dataclass(frozen=True)
class EncoderConfig:
    d_cls: int = 128
    d_agg: int = 640
    max_query_len: int = 32
    max_passage_len: int = 128
    pooling_variant: PoolingVariant = PoolingVariant.FULL
    pruning_kind: PruningKind = PruningKind.FULL
    include_cls: bool = True
    source: EmbeddingSource = EmbeddingSource.LEXICAL
    cls_bias: bool = True

    def __post_init__(self):
        if self.d_cls < 0 or self.d_agg < 0:
            raise ValidationError("dimensions must be nonnegative")
        if self.d_cls == 0 and self.d_agg == 0 and self.source is not EmbeddingSource.REPBERT:
            raise ValidationError("embedding would be empty: d_cls = d_agg = 0")
        if self.max_query_len < 1 or self.max_passage_len < 1:
            raise ValidationError("maximum lengths must be >= 1")

    @property
    def dim(self) -> int:
        return self.d_cls + self.d_agg

    def to_json_dict(self) -> dict:
        return {
            "d_cls": self.d_cls,
            "d_agg": self.d_agg,
            "max_query_len": self.max_query_len,
            "max_passage_len": self.max_passage_len,
            "pooling_variant": self.pooling_variant.value,
            "pruning_kind": self.pruning_kind.value,
            "include_cls": self.include_cls,
            "source": self.source.value,
            "cls_bias": self.cls_bias,
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "EncoderConfig":
        kwargs = dict(obj)
        if "pooling_variant" in kwargs:
            kwargs["pooling_variant"] = PoolingVariant(kwargs["pooling_variant"])
        if "pruning_kind" in kwargs:
            kwargs["pruning_kind"] = PruningKind(kwargs["pruning_kind"])
        if "source" in kwargs:
            kwargs["source"] = EmbeddingSource(kwargs["source"])
        unknown = set(kwargs) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValidationError(f"unknown config fields: {sorted(unknown)}")
        return cls(**kwargs)


@dataclass(frozen=True)
class EncoderHeads:
    """Parameter bundle consumed by ``encode``.

    lexical_proj maps the vocabulary-sized vector to d_agg (LINEAR pruning);
    dense_proj maps the d_model-sized mean embedding to d_agg (AVERAGE source).
    """

    mlm: MlmHead | None = None
    tw: TermWeightHead | None = None
    cls_proj: ClsProjection | None = None
    lexical_proj: np.ndarray | None = None
    dense_proj: np.ndarray | None = None


def _mean_embedding(seq: TokenEmbeddingSequence, include_cls_row: bool) -> np.ndarray:
    keep = ~seq.special_mask
    if not np.any(keep) and not include_cls_row:
        raise ValidationError("no non-special positions to average")
    rows = seq.embeddings[keep]
    if include_cls_row:
        rows = np.concatenate([seq.cls_embedding[None, :], rows], axis=0)
    return rows.astype(np.float64).mean(axis=0)


def encode(
    seq: TokenEmbeddingSequence,
    heads: EncoderHeads,
    part: SlicePartition | None,
    cfg: EncoderConfig,
) -> ConcatEmbedding:
    """Produce the retrieval embedding for one encoded sequence."""
    if cfg.source is EmbeddingSource.REPBERT:
        # mean over every contextualized embedding, CLS row included; the
        # d_model-dimensional mean IS the embedding (no split, no projection)
        mean = _mean_embedding(seq, include_cls_row=True)
        return ConcatEmbedding(np.zeros(0), AggVector(mean, AggKind.FULL))

    if cfg.include_cls and cfg.d_cls > 0:
        if heads.cls_proj is None:
            raise ValidationError("config requests a CLS part but no projection was given")
        if heads.cls_proj.d_cls != cfg.d_cls:
            raise ValidationError(
                f"projection d_cls {heads.cls_proj.d_cls} != config d_cls {cfg.d_cls}"
            )
        cls_part = project_cls(seq.cls_embedding, heads.cls_proj, use_bias=cfg.cls_bias)
    else:
        cls_part = np.zeros(0)

    if cfg.d_agg == 0:
        return ConcatEmbedding(cls_part, AggVector(np.zeros(0), AggKind.FULL))

    if cfg.source is EmbeddingSource.AVERAGE:
        if heads.dense_proj is None:
            raise ValidationError("AVERAGE source requires a dense projection")
        proj = np.asarray(heads.dense_proj, dtype=np.float64)
        if proj.ndim != 2 or proj.shape != (seq.d_model, cfg.d_agg):
            raise ValidationError(
                f"dense projection shape {proj.shape} != ({seq.d_model}, {cfg.d_agg})"
            )
        mean = _mean_embedding(seq, include_cls_row=False)
        return ConcatEmbedding(cls_part, AggVector(mean @ proj, AggKind.FULL))

    v = weighted_max_pool(seq, heads.mlm, heads.tw, cfg.pooling_variant)
    if cfg.pruning_kind is PruningKind.LINEAR:
        if heads.lexical_proj is None:
            raise ValidationError("LINEAR pruning requires a lexical projection")
        if heads.lexical_proj.shape != (v.vocab_size, cfg.d_agg):
            raise ValidationError(
                f"lexical projection shape {heads.lexical_proj.shape} != ({v.vocab_size}, {cfg.d_agg})"
            )
        return ConcatEmbedding(cls_part, AggVector(prune_linear(v, heads.lexical_proj), AggKind.FULL))

    if part is None:
        raise ValidationError("slice-based pruning requires a partition")
    if part.d != cfg.d_agg:
        raise ValidationError(f"partition d {part.d} != config d_agg {cfg.d_agg}")
    if part.vocab_size != v.vocab_size:
        raise ValidationError(
            f"partition vocab_size {part.vocab_size} != lexical vector size {v.vocab_size}"
        )
    if cfg.pruning_kind is PruningKind.SEMI:
        agg, _ = prune_semi(v, part)
    elif cfg.pruning_kind is PruningKind.MEAN:
        agg = prune_semi_mean(v, part)
    else:
        agg = prune_full(v, part)
    return ConcatEmbedding(cls_part, agg)


# ---------------------------------------------------------------------------
# toy encoder


_PARAM_SHAPES_DOC = """
emb        [toy_vocab, d_model]   token embedding table
pos        [max_len, d_model]     position embeddings
mix.weight [2*d_model, d_model]   context mixing layer (input: token ++ mean)
mix.bias   [d_model]
sum.weight [d_model, d_model]     summary layer standing in for CLS
sum.bias   [d_model]
mlm.weight [d_model, toy_vocab]
mlm.bias   [toy_vocab]
tw.weight  [d_model]
tw.bias    []
cls.weight [d_model, d_cls]
cls.bias   [d_cls]
lexical_proj [toy_vocab, d_agg]   only when pruning LINEAR
"""


class ToyEncoder:
    """Tiny deterministic encoder: embeddings, one mixing layer, a summary head.

    Parameters live in a flat name->array dict (float64) so the training
    module can treat them uniformly; see _PARAM_SHAPES_DOC for shapes.

    The forward pass sees GAIN * params, not the stored values.  Stored
    parameters keep the small seeded init range; without the gain the lexical
    score is a product of four near-zero factors whose gradients are too weak
    for plain SGD to train in a few hundred steps.
    """

    GAIN = 14.0

    def __init__(self, params: dict[str, np.ndarray], max_len: int, seed: int = 0):
        required = {
            "emb", "pos", "mix.weight", "mix.bias", "sum.weight", "sum.bias",
            "mlm.weight", "mlm.bias", "tw.weight", "tw.bias", "cls.weight", "cls.bias",
        }
        missing = required - set(params)
        if missing:
            raise ValidationError(f"missing parameters: {sorted(missing)}")
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}
        self.max_len = int(max_len)
        self.seed = int(seed)
        emb = self.params["emb"]
        self.toy_vocab, self.d_model = emb.shape
        if self.params["pos"].shape[0] < self.max_len:
            raise ValidationError("position table shorter than max_len")

    @classmethod
    def create(
        cls,
        toy_vocab: int,
        d_model: int,
        d_cls: int,
        *,
        max_len: int = 32,
        d_agg: int | None = None,
        with_lexical_proj: bool = False,
        seed: int = 0,
    ) -> "ToyEncoder":
        rng = np.random.default_rng(seed)

        def u(*shape):
            return rng.uniform(-0.05, 0.05, size=shape)

        params = {
            "emb": u(toy_vocab, d_model),
            "pos": u(max_len, d_model),
            "mix.weight": u(2 * d_model, d_model),
            "mix.bias": u(d_model),
            "sum.weight": u(d_model, d_model),
            "sum.bias": u(d_model),
            "mlm.weight": u(d_model, toy_vocab),
            "mlm.bias": u(toy_vocab),
            "tw.weight": u(d_model),
            "tw.bias": u(),
            "cls.weight": u(d_model, d_cls),
            "cls.bias": u(d_cls),
        }
        if with_lexical_proj:
            if d_agg is None:
                raise ValidationError("lexical projection needs d_agg")
            params["lexical_proj"] = u(toy_vocab, d_agg)
        return cls(params, max_len=max_len, seed=seed)

    def effective(self) -> dict[str, np.ndarray]:
        """Parameters as the forward pass uses them (stored values times GAIN)."""
        return {k: self.GAIN * v for k, v in self.params.items()}

    # head views over the effective parameters
    @property
    def mlm_head(self) -> MlmHead:
        return MlmHead(self.GAIN * self.params["mlm.weight"], self.GAIN * self.params["mlm.bias"])

    @property
    def tw_head(self) -> TermWeightHead:
        return TermWeightHead(
            self.GAIN * self.params["tw.weight"], self.GAIN * float(self.params["tw.bias"])
        )

    @property
    def cls_proj(self) -> ClsProjection:
        return ClsProjection(self.GAIN * self.params["cls.weight"], self.GAIN * self.params["cls.bias"])

    def heads(self) -> EncoderHeads:
        proj = self.params.get("lexical_proj")
        return EncoderHeads(
            mlm=self.mlm_head,
            tw=self.tw_head,
            cls_proj=self.cls_proj,
            lexical_proj=None if proj is None else self.GAIN * proj,
        )

    def copy(self) -> "ToyEncoder":
        return ToyEncoder(
            {k: v.copy() for k, v in self.params.items()}, max_len=self.max_len, seed=self.seed
        )


def toy_forward(enc: ToyEncoder, token_ids) -> TokenEmbeddingSequence:
    """Run the toy encoder; returns contextualized embeddings plus a summary vector."""
    ids = np.asarray(token_ids, dtype=np.int64).reshape(-1)
    if ids.size < 1:
        raise ValidationError("empty token sequence")
    if ids.size > enc.max_len:
        raise ValidationError(f"sequence length {ids.size} exceeds max_len {enc.max_len}")
    if ids.min() < 0 or ids.max() >= enc.toy_vocab:
        raise ValidationError("token id out of range for toy vocabulary")
    p = enc.effective()
    x = p["emb"][ids] + p["pos"][: ids.size]  # [L, d_model]
    g = x.mean(axis=0)  # context summary
    u = np.concatenate([x, np.broadcast_to(g, x.shape)], axis=1)  # [L, 2*d_model]
    # residual mixing keeps activations at input scale, so gradients stay
    # usable under the small uniform init
    h = x + np.tanh(u @ p["mix.weight"] + p["mix.bias"])  # contextualized positions
    cls_raw = g + np.tanh(g @ p["sum.weight"] + p["sum.bias"])
    return TokenEmbeddingSequence(
        embeddings=h,
        token_ids=ids,
        special_mask=np.zeros(ids.size, dtype=bool),
        cls_embedding=cls_raw,
    )


def toy_encode(enc: ToyEncoder, token_ids, part: SlicePartition | None, cfg: EncoderConfig) -> ConcatEmbedding:
    return encode(toy_forward(enc, token_ids), enc.heads(), part, cfg)
