"""Ranked-list metrics (RR, recall, nDCG, hit accuracy) and TREC file interop.

A run maps query_id -> ranked [(doc_id, score)] (best first).  Qrels map
query_id -> {doc_id: integer grade >= 0}; a document is relevant when its
grade is positive.  Queries present in the run but absent from the qrels are
dropped from every average and reported in the result's dropped count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import FormatError, ValidationError

Run = dict[str, list[tuple[str, float]]]
Qrels = dict[str, dict[str, int]]


@dataclass(frozen=True)
class MetricResult:
    value: float
    evaluated: int  # queries contributing to the average
    dropped: int  # run queries with no qrels entry


def _check_cutoff(k: int) -> int:
    if k < 1:
        raise ValidationError("cutoff must be >= 1")
    return int(k)


def _split(run: Run, qrels: Qrels):
    """Deterministic (sorted) iteration over judged run queries."""
    judged = [(qid, run[qid]) for qid in sorted(run) if qid in qrels]
    if not judged:
        raise ValidationError("no run query has a qrels entry (swapped files?)")
    dropped = len(run) - len(judged)
    return judged, dropped


def reciprocal_rank_at(run: Run, qrels: Qrels, cutoff: int = 10) -> MetricResult:
    """Mean 1/rank of the first relevant document within the cutoff."""
    cutoff = _check_cutoff(cutoff)
    judged, dropped = _split(run, qrels)
    total = 0.0
    for qid, ranking in judged:
        grades = qrels[qid]
        for rank, (doc_id, _) in enumerate(ranking[:cutoff], start=1):
            if grades.get(doc_id, 0) > 0:
                total += 1.0 / rank
                break
    n = len(judged)
    return MetricResult(total / n if n else 0.0, n, dropped)


def recall_at(run: Run, qrels: Qrels, k: int) -> MetricResult:
    """Mean fraction of relevant documents retrieved in the top k.

    Queries with zero relevant documents are skipped (recall undefined).
    """
    k = _check_cutoff(k)
    judged, dropped = _split(run, qrels)
    total = 0.0
    n = 0
    for qid, ranking in judged:
        relevant = {d for d, g in qrels[qid].items() if g > 0}
        if not relevant:
            continue
        hit = sum(1 for doc_id, _ in ranking[:k] if doc_id in relevant)
        total += hit / len(relevant)
        n += 1
    return MetricResult(total / n if n else 0.0, n, dropped)


def ndcg_at(run: Run, qrels: Qrels, k: int = 10, *, linear_gain: bool = False) -> MetricResult:
    """Mean DCG normalized by the ideal DCG over the same judged documents.

    Gain is 2^grade - 1 (or the raw grade with linear_gain); discount is
    1/log2(rank + 1).  A query whose grades are all zero scores 0.
    """
    k = _check_cutoff(k)
    judged, dropped = _split(run, qrels)

    def gain(grade: int) -> float:
        return float(grade) if linear_gain else float(2**grade - 1)

    total = 0.0
    for qid, ranking in judged:
        grades = qrels[qid]
        dcg = 0.0
        for rank, (doc_id, _) in enumerate(ranking[:k], start=1):
            dcg += gain(grades.get(doc_id, 0)) / math.log2(rank + 1)
        ideal = 0.0
        for rank, grade in enumerate(sorted(grades.values(), reverse=True)[:k], start=1):
            ideal += gain(grade) / math.log2(rank + 1)
        total += dcg / ideal if ideal > 0 else 0.0
    n = len(judged)
    return MetricResult(total / n if n else 0.0, n, dropped)


def hit_accuracy_at(run: Run, qrels: Qrels, k: int) -> MetricResult:
    """Fraction of queries with at least one relevant document in the top k."""
    k = _check_cutoff(k)
    judged, dropped = _split(run, qrels)
    hits = 0
    for qid, ranking in judged:
        grades = qrels[qid]
        if any(grades.get(doc_id, 0) > 0 for doc_id, _ in ranking[:k]):
            hits += 1
    n = len(judged)
    return MetricResult(hits / n if n else 0.0, n, dropped)


# ---------------------------------------------------------------------------
# TREC file formats


def write_run(path, run: Run, tag: str = "aggvec") -> None:
    """Six-column TREC run: qid Q0 docid rank score runtag."""
    if any(ch.isspace() for ch in tag) or not tag:
        raise ValidationError("run tag must be non-empty and whitespace-free")
    with open(path, "w", encoding="utf-8") as f:
        for qid in run:
            for rank, (doc_id, score) in enumerate(run[qid], start=1):
                f.write(f"{qid} Q0 {doc_id} {rank} {score!r} {tag}\n")


def read_run(path) -> Run:
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"run file: line {lineno} has {len(parts)} columns, expected 6")
            qid, _, doc_id, rank_s, score_s, _ = parts
            try:
                rank = int(rank_s)
                score = float(score_s)
            except ValueError as e:
                raise FormatError(f"run file: line {lineno} has a non-numeric rank/score") from e
            rows.setdefault(qid, []).append((rank, doc_id, score))
    run: Run = {}
    for qid, entries in rows.items():
        entries.sort(key=lambda t: t[0])
        ranks = [r for r, _, _ in entries]
        if ranks != list(range(1, len(entries) + 1)):
            raise FormatError(f"run file: query {qid!r} ranks are not dense from 1")
        scores = [s for _, _, s in entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise FormatError(f"run file: query {qid!r} scores increase with rank")
        run[qid] = [(doc_id, score) for _, doc_id, score in entries]
    return run


def write_qrels(path, qrels: Qrels) -> None:
    """Four-column TREC qrels: qid 0 docid grade."""
    with open(path, "w", encoding="utf-8") as f:
        for qid in qrels:
            for doc_id, grade in qrels[qid].items():
                f.write(f"{qid} 0 {doc_id} {int(grade)}\n")


def read_qrels(path) -> Qrels:
    qrels: Qrels = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"qrels file: line {lineno} has {len(parts)} columns, expected 4")
            qid, _, doc_id, grade_s = parts
            try:
                grade = int(grade_s)
            except ValueError as e:
                raise FormatError(f"qrels file: line {lineno} grade is not an integer") from e
            if grade < 0:
                raise FormatError(f"qrels file: line {lineno} grade is negative")
            qrels.setdefault(qid, {})[doc_id] = grade
    return qrels
