"""Command-line surface tying the pipeline together.

Exit codes: 0 success, 2 usage error (bad flags, unknown metric), 3 file or
format error (missing file, bad magic, truncation, malformed text), 4
validation error (dimension mismatches, fingerprint mismatch, divergence).
Every subcommand is non-interactive and deterministic given its seeds.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .analysis import PRUNERS, approx_error, write_approx_error_csv
from .encoder import (
    ClsProjection,
    EncoderConfig,
    EncoderHeads,
    ToyEncoder,
    encode,
)
from .errors import FormatError, ValidationError
from .evaluation import (
    hit_accuracy_at,
    ndcg_at,
    read_qrels,
    read_run,
    reciprocal_rank_at,
    recall_at,
    write_run,
)
from .index import FlatIndex, UNPARTITIONED, check_fingerprints
from .io_formats import (
    read_corpus,
    read_embedding_dump,
    read_index_file,
    read_partition,
    read_tensors,
    read_training,
    save_toy_encoder,
    write_index_file,
    write_partition,
)
from .lexical import MlmHead, TermWeightHead
from .parallel import parallel_map
from .pruning import PruningKind, make_partition
from .synth import (
    DEFAULT_DOC_LEN,
    DEFAULT_NEGATIVES,
    DEFAULT_QUERY_LEN,
    DEFAULT_VOCAB,
    generate,
    write_task,
)
from .training import LossWeights, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_VALIDATION = 4


class UsageError(Exception):
    """Semantic command-line misuse detected after argparse."""


def _load_config(path: str | None, overrides: dict) -> EncoderConfig:
    import json

    payload = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            try:
                payload = json.load(f)
            except json.JSONDecodeError as e:
                raise FormatError(f"config file: invalid JSON ({e})") from e
        if not isinstance(payload, dict):
            raise FormatError("config file: top level must be a JSON object")
    payload.update({k: v for k, v in overrides.items() if v is not None})
    return EncoderConfig.from_json_dict(payload)


def _heads_from_tensors(tensors: dict, cfg: EncoderConfig) -> EncoderHeads:
    def pair(weight_name: str, bias_name: str):
        w, b = tensors.get(weight_name), tensors.get(bias_name)
        if (w is None) != (b is None):
            raise ValidationError(f"{weight_name} and {bias_name} must be provided together")
        return w, b

    mlm_w, mlm_b = pair("mlm.weight", "mlm.bias")
    tw_w, tw_b = pair("tw.weight", "tw.bias")
    cls_w, cls_b = pair("cls.weight", "cls.bias")
    return EncoderHeads(
        mlm=None if mlm_w is None else MlmHead(mlm_w.astype(np.float64), mlm_b.astype(np.float64)),
        tw=None if tw_w is None else TermWeightHead(tw_w.astype(np.float64), float(tw_b)),
        cls_proj=None
        if cls_w is None
        else ClsProjection(cls_w.astype(np.float64), cls_b.astype(np.float64)),
        lexical_proj=tensors.get("lexical_proj"),
        dense_proj=tensors.get("dense_proj"),
    )


# ---------------------------------------------------------------------------
# subcommand handlers


def _cmd_partition(args) -> int:
    part = make_partition(args.vocab_size, args.d, seed=args.seed)
    write_partition(args.out, part)
    print(f"wrote partition vocab_size={part.vocab_size} d={part.d} to {args.out}")
    return EXIT_OK


def _cmd_encode(args) -> int:
    dump = read_embedding_dump(args.input)
    tensors = read_tensors(args.mlm_head)
    cfg = _load_config(
        args.config,
        {"pooling_variant": args.pooling_variant, "pruning_kind": args.pruning_kind},
    )
    heads = _heads_from_tensors(tensors, cfg)
    part = read_partition(args.partition) if args.partition else None
    fingerprint = part.fingerprint if part is not None else UNPARTITIONED

    def encode_one(rec):
        emb = encode(rec.sequence(), heads, part, cfg)
        return rec.doc_id, emb.vector(np.float32)

    encoded = parallel_map(encode_one, dump.records, threads=args.threads)
    if not encoded:
        raise ValidationError("embedding dump holds no documents")
    dim = encoded[0][1].size
    matrix = np.stack([vec for _, vec in encoded])
    write_index_file(args.out, dim, fingerprint, [doc_id for doc_id, _ in encoded], matrix)
    print(f"encoded {len(encoded)} documents (dim {dim}) to {args.out}")
    return EXIT_OK


def _cmd_index_build(args) -> int:
    dim, fingerprint, ids, matrix = read_index_file(args.vectors)
    index = FlatIndex(dim, ids, matrix, fingerprint)
    index.save(args.out)
    print(f"indexed {index.count} vectors (dim {index.dim}) to {args.out}")
    return EXIT_OK


def _cmd_index_search(args) -> int:
    index = FlatIndex.load(args.index)
    qdim, qfp, qids, qmat = read_index_file(args.queries)
    check_fingerprints(index.fingerprint, qfp)
    if index.count and qdim != index.dim:
        raise ValidationError(f"query dim {qdim} != index dim {index.dim}")

    results = parallel_map(lambda i: index.search(qmat[i], args.k), range(len(qids)), threads=args.threads)
    run = {qid: hits for qid, hits in zip(qids, results)}
    write_run(args.out, run, tag=args.runtag)
    print(f"searched {len(qids)} queries (k={args.k}) into {args.out}")
    return EXIT_OK


def _cmd_train_toy(args) -> int:
    examples = read_training(args.data)
    corpus = read_corpus(args.corpus)
    cfg = _load_config(args.config, {"pruning_kind": args.pruning_kind})
    part = read_partition(args.partition) if args.partition else None
    needs_partition = cfg.d_agg > 0 and cfg.pruning_kind is not PruningKind.LINEAR
    if needs_partition and part is None:
        raise UsageError("--partition is required for slice-based pruning")

    enc = ToyEncoder.create(
        args.toy_vocab,
        args.d_model,
        cfg.d_cls,
        max_len=max(cfg.max_query_len, cfg.max_passage_len),
        d_agg=cfg.d_agg,
        with_lexical_proj=cfg.pruning_kind is PruningKind.LINEAR,
        seed=args.seed,
    )
    steps = math.ceil(args.epochs * len(examples) / args.batch_size)
    result = train(
        examples,
        corpus,
        enc,
        part,
        cfg,
        steps=steps,
        batch_size=args.batch_size,
        lr=args.lr,
        momentum=args.momentum,
        seed=args.seed,
        weights=LossWeights(args.lambda1, args.lambda2),
    )
    save_toy_encoder(args.out, result.encoder)
    if args.loss_trace:
        with open(args.loss_trace, "w", encoding="utf-8") as f:
            f.write("step,total,concat,agg,cls\n")
            for step, total, l_concat, l_agg, l_cls in result.trace:
                f.write(f"{step},{total!r},{l_concat!r},{l_agg!r},{l_cls!r}\n")
    first = result.trace[0][1] if result.trace else float("nan")
    last = result.trace[-1][1] if result.trace else float("nan")
    print(f"trained {steps} steps (loss {first:.4f} -> {last:.4f}), checkpoint at {args.out}")
    return EXIT_OK


_METRICS = {
    "rr": lambda run, qrels, k: reciprocal_rank_at(run, qrels, k),
    "recall": lambda run, qrels, k: recall_at(run, qrels, k),
    "ndcg": lambda run, qrels, k: ndcg_at(run, qrels, k),
    "hit": lambda run, qrels, k: hit_accuracy_at(run, qrels, k),
}


def _cmd_eval(args) -> int:
    run = read_run(args.run)
    qrels = read_qrels(args.qrels)
    dropped = None
    for token in args.metrics.split(","):
        token = token.strip()
        name, sep, k_s = token.partition("@")
        if not sep or name not in _METRICS or not k_s.isdigit() or int(k_s) < 1:
            raise UsageError(
                f"unknown metric {token!r}; use name@k with name in {sorted(_METRICS)}"
            )
        result = _METRICS[name](run, qrels, int(k_s))
        dropped = result.dropped
        print(f"{token} {result.value!r}")
    if dropped:
        print(f"note: {dropped} run queries had no qrels entry and were dropped", file=sys.stderr)
    return EXIT_OK


def _cmd_analyze_approx_error(args) -> int:
    try:
        d_values = [int(tok) for tok in args.d.split(",") if tok.strip()]
    except ValueError as e:
        raise UsageError(f"--d must be a comma-separated integer list, got {args.d!r}") from e
    pruners = tuple(tok.strip() for tok in args.pruners.split(",") if tok.strip())
    bad = [p for p in pruners if p not in PRUNERS]
    if bad or not pruners:
        raise UsageError(f"--pruners must name a subset of {PRUNERS}, got {args.pruners!r}")
    rows = approx_error(
        args.vocab_size,
        d_values,
        pairs=args.pairs,
        partitions_per_d=args.seeds,
        nonzeros=args.nonzeros,
        seed=args.seed,
        pruners=pruners,
    )
    write_approx_error_csv(args.out, rows)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    lo, hi = args.query_len
    task = generate(
        args.docs,
        args.queries,
        args.seed,
        vocab_size=args.vocab_size,
        doc_len=args.doc_len,
        query_len=(lo, hi),
        negatives=args.negatives,
        eval_queries=args.eval_queries,
    )
    paths = write_task(task, args.out_dir)
    for name in ("corpus", "train", "queries", "qrels"):
        print(f"{name}: {paths[name]}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _query_len(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition(":")
    if not sep or not lo.isdigit() or not hi.isdigit():
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    return int(lo), int(hi)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aggvec",
        description="Lexical-aggregation retrieval pipeline: partition, encode, index, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="generate a seeded vocabulary partition file")
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_partition)

    p = sub.add_parser("encode", help="encode an embedding dump into retrieval vectors")
    p.add_argument("--input", required=True, help="embedding dump file")
    p.add_argument("--mlm-head", required=True, help="tensor container with head weights")
    p.add_argument("--partition", help="partition JSON (required for slice pruning)")
    p.add_argument("--config", help="encoder config JSON")
    p.add_argument("--pooling-variant", choices=["full", "unit_weight", "no_mlm"])
    p.add_argument("--pruning-kind", choices=["semi", "full", "linear", "mean"])
    p.add_argument("--threads", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_encode)

    p = sub.add_parser("index", help="build or search a flat index")
    isub = p.add_subparsers(dest="index_command", required=True)
    b = isub.add_parser("build", help="validate encoded vectors into an index file")
    b.add_argument("--vectors", required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(handler=_cmd_index_build)
    s = isub.add_parser("search", help="top-k search, emitting a TREC run")
    s.add_argument("--index", required=True)
    s.add_argument("--queries", required=True, help="encoded query vectors")
    s.add_argument("--k", type=int, default=1000)
    s.add_argument("--runtag", default="aggvec")
    s.add_argument("--threads", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(handler=_cmd_index_search)

    p = sub.add_parser("train-toy", help="train the toy encoder on JSONL data")
    p.add_argument("--data", required=True, help="training JSONL")
    p.add_argument("--corpus", required=True, help="corpus JSONL with the referenced documents")
    p.add_argument("--partition", help="partition JSON (required for slice pruning)")
    p.add_argument("--config", help="encoder config JSON")
    p.add_argument("--pruning-kind", choices=["semi", "full", "linear", "mean"])
    p.add_argument("--toy-vocab", type=int, default=DEFAULT_VOCAB)
    p.add_argument("--d-model", type=int, default=32)
    p.add_argument("--epochs", type=float, default=25.0)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--lr", type=float, default=5e-5)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--lambda1", type=float, default=0.5)
    p.add_argument("--lambda2", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--loss-trace", help="optional CSV of per-step losses")
    p.set_defaults(handler=_cmd_train_toy)

    p = sub.add_parser("eval", help="score a TREC run against qrels")
    p.add_argument("--run", required=True)
    p.add_argument("--qrels", required=True)
    p.add_argument("--metrics", default="rr@10,recall@1000,ndcg@10")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("analyze", help="measurement utilities")
    asub = p.add_subparsers(dest="analyze_command", required=True)
    a = asub.add_parser("approx-error", help="pruned-dot-product error curve over d")
    a.add_argument("--vocab-size", type=int, required=True)
    a.add_argument("--d", required=True, help="comma-separated d values")
    a.add_argument("--seeds", type=int, default=20, help="partitions per d")
    a.add_argument("--pairs", type=int, default=1000)
    a.add_argument("--nonzeros", type=int, default=64)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--pruners", default=",".join(PRUNERS))
    a.add_argument("--threads", type=int)
    a.add_argument("--out", required=True)
    a.set_defaults(handler=_cmd_analyze_approx_error)

    p = sub.add_parser("synth", help="generate the synthetic lexical-overlap task")
    p.add_argument("--docs", type=int, required=True)
    p.add_argument("--queries", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab-size", type=int, default=DEFAULT_VOCAB)
    p.add_argument("--doc-len", type=int, default=DEFAULT_DOC_LEN)
    p.add_argument("--query-len", type=_query_len, default=DEFAULT_QUERY_LEN, metavar="LO:HI")
    p.add_argument("--negatives", type=int, default=DEFAULT_NEGATIVES)
    p.add_argument("--eval-queries", type=int, help="held-out query count (default: --queries)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_USAGE
    try:
        return args.handler(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        name = getattr(e, "filename", None) or e
        print(f"file error: {name}", file=sys.stderr)
        return EXIT_FORMAT
    except FormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
