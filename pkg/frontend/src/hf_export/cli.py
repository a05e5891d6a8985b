"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 missing or malformed file,
4 validation failure (bad checkpoint, bad arguments past parsing).
"""

from __future__ import annotations

import argparse
import sys

from .errors import FormatError, ValidationError
from .export import ALLOWED_MAX_LEN, export_embeddings, export_heads

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_VALIDATION = 4


def _cmd_export_heads(args) -> int:
    tensors = export_heads(args.model, args.out)
    d_model, vocab_size = tensors["mlm.weight"].shape
    print(f"wrote {args.out}: mlm.weight [{d_model} x {vocab_size}], mlm.bias [{vocab_size}]")
    return EXIT_OK


def _cmd_export_embeddings(args) -> int:
    dump, skipped = export_embeddings(
        args.model, args.corpus, args.max_len, args.out, batch_size=args.batch_size
    )
    if skipped:
        print(f"warning: skipped {skipped} document(s) with empty text", file=sys.stderr)
    print(f"wrote {args.out}: {len(dump.records)} documents, d_model {dump.d_model}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hf-export",
        description="export MLM head weights and token embeddings to interchange files",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-heads", help="write the MLM projection as a tensor container")
    p.add_argument("--model", required=True, help="checkpoint name or directory")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_export_heads)

    p = sub.add_parser(
        "export-embeddings", help="write final-layer token embeddings for a text corpus"
    )
    p.add_argument("--model", required=True, help="checkpoint name or directory")
    p.add_argument("--corpus", required=True, help='JSONL with {"id", "text"} per line')
    p.add_argument("--max-len", type=int, choices=ALLOWED_MAX_LEN, default=128)
    p.add_argument("--batch-size", type=int, default=8, help="tokenizer chunking only")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_export_embeddings)

    return parser


def _quiet_library_logging() -> None:
    # cross-architecture loads emit per-key reports and progress bars; keep
    # stderr for our own messages
    from transformers.utils import logging as hf_logging

    hf_logging.set_verbosity_error()
    hf_logging.disable_progress_bar()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if not e.code else EXIT_USAGE
    _quiet_library_logging()
    try:
        return args.handler(args)
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        name = getattr(e, "filename", None) or e
        print(f"file error: {name}", file=sys.stderr)
        return EXIT_FORMAT
    except FormatError as e:
        print(f"format error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as e:
        # transformers raises OSError for unreadable or absent checkpoints
        print(f"file error: {e}", file=sys.stderr)
        return EXIT_FORMAT
    except ValidationError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
