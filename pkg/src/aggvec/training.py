"""Contrastive training of the toy encoder with in-batch negatives.

Each query is scored against every positive and negative passage in its
batch.  Three NLL losses share that candidate set but score it differently:
the concatenated embedding, the aggregate part alone, and the CLS part
alone; the total is L + lambda1 * L_agg + lambda2 * L_cls.

Gradients are analytic (hand-derived backward pass over the whole pipeline)
so they can be validated against central finite differences.  Max pooling
routes its subgradient to the argmax position, ties to the tie-break
winner; everything runs in float64.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoder import ConcatEmbedding, EncoderConfig, ToyEncoder
from .errors import ValidationError
from .lexical import PoolingVariant, softmax_rows
from .pruning import PruningKind, SlicePartition


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.5  # weight of the aggregate-only loss
    lambda2: float = 0.5  # weight of the CLS-only loss

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValidationError("loss weights must be nonnegative")


@dataclass(frozen=True)
class TrainingExample:
    query_ids: tuple[int, ...]
    positive_id: str
    negative_ids: tuple[str, ...]


@dataclass(frozen=True)
class TrainingBatch:
    """Queries with one positive passage each and a uniform negative count."""

    queries: list  # list of token-id sequences
    positive_ids: list  # one doc id per query
    negative_ids: list  # per query, list of doc ids (uniform length)

    def __post_init__(self):
        b = len(self.queries)
        if b < 1:
            raise ValidationError("batch must contain at least one query")
        if len(self.positive_ids) != b or len(self.negative_ids) != b:
            raise ValidationError("positives/negatives must align with queries")
        counts = {len(n) for n in self.negative_ids}
        if len(counts) > 1:
            raise ValidationError(f"negative count must be uniform within a batch, got {counts}")

    @property
    def num_queries(self) -> int:
        return len(self.queries)

    @property
    def negatives_per_query(self) -> int:
        return len(self.negative_ids[0])


def nll_loss(pos_score: float, neg_scores) -> float:
    """-log softmax probability of the positive among positive + negatives."""
    neg = np.asarray(neg_scores, dtype=np.float64).reshape(-1)
    scores = np.concatenate([[float(pos_score)], neg])
    if not np.all(np.isfinite(scores)):
        raise ValidationError("scores must be finite")
    m = scores.max()
    return float(m + np.log(np.exp(scores - m).sum()) - pos_score)


# ---------------------------------------------------------------------------
# forward with caches


class _SeqCache:
    """Everything the backward pass needs about one encoded sequence."""

    __slots__ = (
        "ids", "x", "g", "t_mix", "h", "t_sum", "cls_raw", "a", "w", "probs",
        "v", "win_row", "agg", "agg_ids", "cls_part",
    )


def _forward_cached(enc: ToyEncoder, token_ids, part, cfg: EncoderConfig) -> _SeqCache:
    p = enc.effective()
    if cfg.d_agg == 0:
        pass  # CLS-only embedding; pooling and pruning are skipped entirely
    elif cfg.pruning_kind is PruningKind.LINEAR:
        if "lexical_proj" not in p:
            raise ValidationError("LINEAR pruning requires a lexical_proj parameter")
    elif part is None:
        raise ValidationError("slice-based pruning requires a partition")
    elif part.vocab_size != enc.toy_vocab or part.d != cfg.d_agg:
        raise ValidationError(
            f"partition ({part.vocab_size}, {part.d}) does not match "
            f"(toy_vocab {enc.toy_vocab}, d_agg {cfg.d_agg})"
        )
    ids = np.asarray(token_ids, dtype=np.int64).reshape(-1)
    if ids.size < 1 or ids.size > enc.max_len:
        raise ValidationError(f"sequence length {ids.size} outside [1, {enc.max_len}]")
    if ids.min() < 0 or ids.max() >= enc.toy_vocab:
        raise ValidationError("token id out of range for toy vocabulary")
    c = _SeqCache()
    c.ids = ids
    c.x = p["emb"][ids] + p["pos"][: ids.size]
    c.g = c.x.mean(axis=0)
    u = np.concatenate([c.x, np.broadcast_to(c.g, c.x.shape)], axis=1)
    c.t_mix = np.tanh(u @ p["mix.weight"] + p["mix.bias"])
    c.h = c.x + c.t_mix
    c.t_sum = np.tanh(c.g @ p["sum.weight"] + p["sum.bias"])
    c.cls_raw = c.g + c.t_sum

    # term weights w_i = |h_i . tw + b|
    if cfg.d_agg == 0:
        c.a = c.w = c.probs = c.v = c.win_row = c.agg_ids = None
        c.agg = np.zeros(0)
        if cfg.include_cls and cfg.d_cls > 0:
            c.cls_part = c.cls_raw @ p["cls.weight"]
            if cfg.cls_bias:
                c.cls_part = c.cls_part + p["cls.bias"]
        else:
            c.cls_part = np.zeros(0)
        return c

    c.a = c.h @ p["tw.weight"] + p["tw.bias"]
    if not np.all(np.isfinite(c.a)):
        raise ValidationError("non-finite activations (training diverged; reduce lr)")
    if cfg.pooling_variant is PoolingVariant.UNIT_WEIGHT:
        c.w = np.ones_like(c.a)
    else:
        c.w = np.abs(c.a)

    vocab = enc.toy_vocab
    if cfg.pooling_variant is PoolingVariant.NO_MLM:
        c.probs = None
        contrib = np.full((ids.size, vocab), -np.inf)
        contrib[np.arange(ids.size), ids] = c.w
    else:
        c.probs = softmax_rows(c.h @ p["mlm.weight"] + p["mlm.bias"])
        contrib = c.w[:, None] * c.probs
    c.win_row = contrib.argmax(axis=0)  # first (lowest) row wins ties
    c.v = contrib[c.win_row, np.arange(vocab)]
    if cfg.pooling_variant is PoolingVariant.NO_MLM:
        c.v = np.where(np.isneginf(c.v), 0.0, c.v)

    if cfg.pruning_kind is PruningKind.LINEAR:
        c.agg = c.v @ p["lexical_proj"]
        c.agg_ids = None
    elif cfg.pruning_kind is PruningKind.MEAN:
        ordered = c.v[part._order]
        c.agg = np.add.reduceat(ordered, part._starts) / part._sizes
        c.agg_ids = None
    else:
        ordered = c.v[part._order]
        maxima = np.maximum.reduceat(ordered, part._starts)
        expanded = np.repeat(maxima, part._sizes)
        cand = np.where(ordered == expanded, part._order, np.int64(part.vocab_size))
        c.agg_ids = np.minimum.reduceat(cand, part._starts)
        if cfg.pruning_kind is PruningKind.FULL:
            c.agg = maxima * part.sign_of[c.agg_ids]
        else:
            c.agg = maxima

    if cfg.include_cls and cfg.d_cls > 0:
        c.cls_part = c.cls_raw @ p["cls.weight"]
        if cfg.cls_bias:
            c.cls_part = c.cls_part + p["cls.bias"]
    else:
        c.cls_part = np.zeros(0)
    return c


def _backward_seq(
    enc: ToyEncoder,
    part: SlicePartition | None,
    cfg: EncoderConfig,
    c: _SeqCache,
    d_cls_part: np.ndarray,
    d_agg: np.ndarray,
    grads: dict[str, np.ndarray],
) -> None:
    """Accumulate d(loss)/d(effective params) for one cached sequence."""
    p = enc.effective()
    L = c.ids.size
    vocab = enc.toy_vocab
    dh = np.zeros_like(c.h)
    d_cls_raw = np.zeros_like(c.cls_raw)

    if c.cls_part.size:
        grads["cls.weight"] += np.outer(c.cls_raw, d_cls_part)
        if cfg.cls_bias:
            grads["cls.bias"] += d_cls_part
        d_cls_raw += p["cls.weight"] @ d_cls_part

    # pruning backward: d_agg -> d_v
    if c.v is None:
        d_w = None  # no aggregate part; only the CLS path carries gradient
    else:
        if cfg.pruning_kind is PruningKind.LINEAR:
            grads["lexical_proj"] += np.outer(c.v, d_agg)
            d_v = p["lexical_proj"] @ d_agg
        elif cfg.pruning_kind is PruningKind.MEAN:
            d_v = (d_agg / part._sizes)[part.slice_of]
        elif cfg.pruning_kind is PruningKind.FULL:
            d_v = np.zeros(vocab)
            d_v[c.agg_ids] = d_agg * part.sign_of[c.agg_ids]
        else:  # SEMI
            d_v = np.zeros(vocab)
            d_v[c.agg_ids] = d_agg
        d_w = np.zeros(L)

    if d_w is not None:
        # max pooling backward: route each term's gradient to its winning row
        cols = np.arange(vocab)
        if cfg.pooling_variant is PoolingVariant.NO_MLM:
            # v[t] = w at the winning row holding token t; zero elsewhere
            held = c.v > 0  # terms actually present
            np.add.at(d_w, c.win_row[held], d_v[held])
        else:
            np.add.at(d_w, c.win_row, d_v * c.probs[c.win_row, cols])
            d_probs = np.zeros_like(c.probs)
            np.add.at(d_probs, (c.win_row, cols), d_v * c.w[c.win_row])
            # softmax backward, then the MLM linear layer
            inner = (d_probs * c.probs).sum(axis=1, keepdims=True)
            d_logits = c.probs * (d_probs - inner)
            grads["mlm.weight"] += c.h.T @ d_logits
            grads["mlm.bias"] += d_logits.sum(axis=0)
            dh += d_logits @ p["mlm.weight"].T

        if cfg.pooling_variant is not PoolingVariant.UNIT_WEIGHT:
            d_a = d_w * np.sign(c.a)
            grads["tw.weight"] += c.h.T @ d_a
            grads["tw.bias"] += d_a.sum()
            dh += np.outer(d_a, p["tw.weight"])

    # mixing layer (residual) and summary backward
    d_mix_z = dh * (1.0 - c.t_mix * c.t_mix)
    u = np.concatenate([c.x, np.broadcast_to(c.g, c.x.shape)], axis=1)
    grads["mix.weight"] += u.T @ d_mix_z
    grads["mix.bias"] += d_mix_z.sum(axis=0)
    d_u = d_mix_z @ p["mix.weight"].T
    dx = dh + d_u[:, : enc.d_model]  # dh flows straight through the residual
    dg = d_u[:, enc.d_model :].sum(axis=0)

    d_sum_z = d_cls_raw * (1.0 - c.t_sum * c.t_sum)
    grads["sum.weight"] += np.outer(c.g, d_sum_z)
    grads["sum.bias"] += d_sum_z
    dg += p["sum.weight"] @ d_sum_z + d_cls_raw

    dx += dg / L  # g = mean(x)
    np.add.at(grads["emb"], c.ids, dx)
    grads["pos"][:L] += dx


# ---------------------------------------------------------------------------
# batch loss and gradients


def _score_matrices(q_caches, d_caches, col_of_doc):
    """Similarity matrices [B, C] for the three channels."""
    q_cls = np.stack([c.cls_part for c in q_caches])
    q_agg = np.stack([c.agg for c in q_caches])
    d_cls = np.stack([d_caches[u].cls_part for u in col_of_doc])
    d_agg = np.stack([d_caches[u].agg for u in col_of_doc])
    sim_cls = q_cls @ d_cls.T if q_cls.shape[1] else np.zeros((len(q_caches), len(col_of_doc)))
    sim_agg = q_agg @ d_agg.T if q_agg.shape[1] else np.zeros((len(q_caches), len(col_of_doc)))
    return sim_cls, sim_agg


def _nll_rows(scores: np.ndarray, pos_col: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean NLL over rows and its gradient d(mean NLL)/d(scores)."""
    b = scores.shape[0]
    if not np.all(np.isfinite(scores)):
        raise ValidationError("non-finite similarity scores (training diverged; reduce lr)")
    rows = np.arange(b)
    m = scores.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(scores - m).sum(axis=1))
    loss = float((lse - scores[rows, pos_col]).mean())
    grad = np.exp(scores - lse[:, None])
    grad[rows, pos_col] -= 1.0
    return loss, grad / b


def _encode_batch(batch: TrainingBatch, corpus, enc, part, cfg):
    """Caches for queries and unique docs, plus the candidate column layout.

    Candidate columns: every query's positive (in query order), then every
    query's negatives (query-major).  Query i's positive sits at column i.
    """
    doc_cols: list[str] = list(batch.positive_ids)
    for negs in batch.negative_ids:
        doc_cols.extend(negs)
    unique_ids: list[str] = []
    index_of: dict[str, int] = {}
    for did in doc_cols:
        if did not in index_of:
            index_of[did] = len(unique_ids)
            unique_ids.append(did)
    missing = [d for d in unique_ids if d not in corpus]
    if missing:
        raise ValidationError(f"batch references unknown documents: {missing[:5]}")
    q_caches = [_forward_cached(enc, q, part, cfg) for q in batch.queries]
    d_caches = [_forward_cached(enc, corpus[did], part, cfg) for did in unique_ids]
    col_of_doc = np.array([index_of[d] for d in doc_cols], dtype=np.int64)
    return q_caches, d_caches, col_of_doc


def batch_loss(
    batch: TrainingBatch,
    corpus: dict,
    enc: ToyEncoder,
    part: SlicePartition | None,
    cfg: EncoderConfig,
    weights: LossWeights = LossWeights(),
) -> tuple[float, float, float, float]:
    """(total, l_concat, l_agg, l_cls) on one batch with in-batch negatives."""
    q_caches, d_caches, col_of_doc = _encode_batch(batch, corpus, enc, part, cfg)
    sim_cls, sim_agg = _score_matrices(q_caches, d_caches, col_of_doc)
    pos = np.arange(batch.num_queries)
    l_concat, _ = _nll_rows(sim_cls + sim_agg, pos)
    l_agg, _ = _nll_rows(sim_agg, pos)
    l_cls, _ = _nll_rows(sim_cls, pos)
    total = l_concat + weights.lambda1 * l_agg + weights.lambda2 * l_cls
    return total, l_concat, l_agg, l_cls


def zero_grads(enc: ToyEncoder) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in enc.params.items()}


def gradients(
    batch: TrainingBatch,
    corpus: dict,
    enc: ToyEncoder,
    part: SlicePartition | None,
    cfg: EncoderConfig,
    weights: LossWeights = LossWeights(),
) -> tuple[tuple[float, float, float, float], dict[str, np.ndarray]]:
    """Batch losses plus analytic gradients of the total w.r.t. every parameter."""
    q_caches, d_caches, col_of_doc = _encode_batch(batch, corpus, enc, part, cfg)
    sim_cls, sim_agg = _score_matrices(q_caches, d_caches, col_of_doc)
    pos = np.arange(batch.num_queries)

    l_concat, g_concat = _nll_rows(sim_cls + sim_agg, pos)
    l_agg, g_agg = _nll_rows(sim_agg, pos)
    l_cls, g_cls = _nll_rows(sim_cls, pos)
    total = l_concat + weights.lambda1 * l_agg + weights.lambda2 * l_cls

    # d(total)/d(sim) per channel; the concat channel feeds both parts
    d_sim_cls = g_concat + weights.lambda2 * g_cls  # [B, C]
    d_sim_agg = g_concat + weights.lambda1 * g_agg

    q_cls = np.stack([c.cls_part for c in q_caches])
    q_agg = np.stack([c.agg for c in q_caches])
    d_cls_mat = np.stack([d_caches[u].cls_part for u in col_of_doc])
    d_agg_mat = np.stack([d_caches[u].agg for u in col_of_doc])

    grads = zero_grads(enc)
    for i, qc in enumerate(q_caches):
        d_cls_q = d_sim_cls[i] @ d_cls_mat if q_cls.shape[1] else np.zeros(0)
        d_agg_q = d_sim_agg[i] @ d_agg_mat
        _backward_seq(enc, part, cfg, qc, d_cls_q, d_agg_q, grads)

    n_unique = len(d_caches)
    d_cls_docs = np.zeros((n_unique, q_cls.shape[1]))
    d_agg_docs = np.zeros((n_unique, q_agg.shape[1]))
    # scatter column gradients back onto unique docs (a doc may fill many columns)
    np.add.at(d_cls_docs, col_of_doc, d_sim_cls.T @ q_cls)
    np.add.at(d_agg_docs, col_of_doc, d_sim_agg.T @ q_agg)
    for u, dc in enumerate(d_caches):
        _backward_seq(enc, part, cfg, dc, d_cls_docs[u], d_agg_docs[u], grads)

    # accumulated grads are w.r.t. effective params; chain through effective = GAIN * stored
    for name in grads:
        grads[name] *= enc.GAIN
    return (total, l_concat, l_agg, l_cls), grads


# ---------------------------------------------------------------------------
# optimizer loop


@dataclass
class TrainResult:
    encoder: ToyEncoder
    trace: list = field(default_factory=list)  # (step, total, l_concat, l_agg, l_cls)


def train(
    examples: list[TrainingExample],
    corpus: dict,
    enc: ToyEncoder,
    part: SlicePartition | None,
    cfg: EncoderConfig,
    *,
    steps: int,
    batch_size: int = 8,
    lr: float = 1e-4,
    momentum: float = 0.0,
    seed: int = 0,
    weights: LossWeights = LossWeights(),
) -> TrainResult:
    """Plain SGD (optional momentum) over shuffled mini-batches; deterministic per seed."""
    if not examples:
        raise ValidationError("training set is empty")
    if steps < 0 or batch_size < 1:
        raise ValidationError("steps must be >= 0 and batch_size >= 1")
    enc = enc.copy()
    rng = np.random.default_rng(seed)
    velocity = zero_grads(enc)
    trace = []
    order: list[int] = []
    for step in range(steps):
        take: list[int] = []
        while len(take) < batch_size:
            if not order:
                order = rng.permutation(len(examples)).tolist()
            take.append(order.pop())
        chosen = [examples[i] for i in take]
        k = min(len(e.negative_ids) for e in chosen)
        batch = TrainingBatch(
            queries=[list(e.query_ids) for e in chosen],
            positive_ids=[e.positive_id for e in chosen],
            negative_ids=[list(e.negative_ids[:k]) for e in chosen],
        )
        (total, l_concat, l_agg, l_cls), grads = gradients(batch, corpus, enc, part, cfg, weights)
        for name, g in grads.items():
            if momentum:
                velocity[name] = momentum * velocity[name] + g
                enc.params[name] -= lr * velocity[name]
            else:
                enc.params[name] -= lr * g
        trace.append((step, total, l_concat, l_agg, l_cls))
    return TrainResult(encoder=enc, trace=trace)
