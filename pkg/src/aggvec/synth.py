"""Synthetic lexical-overlap retrieval task generator.

Documents are sets of distinct token ids; each query samples a subset of one
document's tokens, so that document is the unique best lexical match and is
the query's only relevant document.  Hard negatives are the highest-overlap
other documents.  The generator emits a training split plus a held-out query
split with qrels, all reproducible from one seed via the package PRNG.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

from .errors import ValidationError
from .evaluation import Qrels, write_qrels
from .io_formats import write_corpus, write_training
from .rng import Xoshiro256StarStar
from .training import TrainingExample

DEFAULT_VOCAB = 128
DEFAULT_DOC_LEN = 16
DEFAULT_QUERY_LEN = (8, 12)
DEFAULT_NEGATIVES = 3


@dataclass
class SynthTask:
    corpus: dict[str, list[int]]
    train: list[TrainingExample]
    eval_queries: dict[str, list[int]]  # held out; never seen by the trainer
    qrels: Qrels  # judgments for the held-out queries


def _distinct(rng: Xoshiro256StarStar, n: int, k: int) -> list[int]:
    pool = list(range(n))
    rng.shuffle(pool)
    return pool[:k]


def generate(
    docs: int,
    queries: int,
    seed: int,
    *,
    vocab_size: int = DEFAULT_VOCAB,
    doc_len: int = DEFAULT_DOC_LEN,
    query_len: tuple[int, int] = DEFAULT_QUERY_LEN,
    negatives: int = DEFAULT_NEGATIVES,
    eval_queries: int | None = None,
) -> SynthTask:
    lo, hi = query_len
    if docs < 2 or queries < 1:
        raise ValidationError("need at least 2 documents and 1 query")
    if not 0 < doc_len <= vocab_size:
        raise ValidationError(f"doc_len {doc_len} outside (0, vocab_size {vocab_size}]")
    if not 0 < lo <= hi <= doc_len:
        raise ValidationError(f"query_len {query_len} outside (0, doc_len {doc_len}]")
    if not 0 < negatives < docs:
        raise ValidationError(f"negatives {negatives} outside (0, docs {docs})")
    n_eval = queries if eval_queries is None else eval_queries
    if n_eval < 1:
        raise ValidationError("need at least 1 held-out query")

    rng = Xoshiro256StarStar(seed)
    width = max(4, len(str(docs - 1)))
    corpus = {f"d{i:0{width}d}": _distinct(rng, vocab_size, doc_len) for i in range(docs)}
    doc_ids = sorted(corpus)
    doc_sets = {d: set(corpus[d]) for d in doc_ids}

    def draw_query() -> tuple[list[int], str, list[str]]:
        pos = doc_ids[rng.next_below(docs)]
        qlen = lo + rng.next_below(hi - lo + 1)
        toks = list(corpus[pos])
        rng.shuffle(toks)
        q = toks[:qlen]
        qset = set(q)
        ranked = sorted(doc_ids, key=lambda d: (-len(qset & doc_sets[d]), d))
        negs = [d for d in ranked if d != pos][:negatives]
        return q, pos, negs

    train = []
    for _ in range(queries):
        q, pos, negs = draw_query()
        train.append(TrainingExample(tuple(q), pos, tuple(negs)))

    qwidth = max(4, len(str(n_eval - 1)))
    eval_qs: dict[str, list[int]] = {}
    qrels: Qrels = {}
    for j in range(n_eval):
        q, pos, _ = draw_query()
        qid = f"q{j:0{qwidth}d}"
        eval_qs[qid] = q
        qrels[qid] = {pos: 1}
    return SynthTask(corpus=corpus, train=train, eval_queries=eval_qs, qrels=qrels)


def write_task(task: SynthTask, out_dir) -> dict[str, str]:
    """Write corpus.jsonl, train.jsonl, queries.jsonl, qrels.txt into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "corpus": os.path.join(out_dir, "corpus.jsonl"),
        "train": os.path.join(out_dir, "train.jsonl"),
        "queries": os.path.join(out_dir, "queries.jsonl"),
        "qrels": os.path.join(out_dir, "qrels.txt"),
    }
    write_corpus(paths["corpus"], task.corpus)
    write_training(paths["train"], task.train)
    write_corpus(paths["queries"], task.eval_queries)
    write_qrels(paths["qrels"], task.qrels)
    return paths
