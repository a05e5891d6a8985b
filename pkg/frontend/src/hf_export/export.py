"""Export MLM head weights and contextualized token embeddings.

Both exports run the checkpoint in eval mode under no_grad.  The embedding
export runs its forward pass one document at a time: padding a batch changes
tensor shapes and therefore reduction order, so per-document forwards are the
only way to guarantee the batching flag cannot change the output bytes.
"""

from __future__ import annotations

import numpy as np
import torch

from .errors import MissingHeadError, ValidationError
from .formats import (
    DocumentEmbedding,
    EmbeddingDump,
    read_text_corpus,
    write_embedding_dump,
    write_tensors,
)

ALLOWED_MAX_LEN = (32, 128)


def _load_masked_lm(model_name: str):
    from transformers import AutoModelForMaskedLM

    model, info = AutoModelForMaskedLM.from_pretrained(model_name, output_loading_info=True)
    # keys outside the base model belong to the task head; if the checkpoint
    # lacked them they were freshly initialized, which is not an export
    prefix = model.base_model_prefix + "."
    missing_head = [k for k in info["missing_keys"] if not k.startswith(prefix)]
    if model.get_output_embeddings() is None or missing_head:
        raise MissingHeadError(
            f"checkpoint {model_name!r} has no masked-LM head"
            + (f" (missing weights: {', '.join(sorted(missing_head))})" if missing_head else "")
        )
    model.eval()
    return model


def export_heads(model_name: str, out_path) -> dict[str, np.ndarray]:
    """Write the checkpoint's MLM projection as a tensor container.

    Stores "mlm.weight" [d_model x vocab_size] and "mlm.bias" [vocab_size].
    Returns the tensors written.
    """
    model = _load_masked_lm(model_name)
    head = model.get_output_embeddings()
    with torch.no_grad():
        # the head maps hidden -> vocab, stored as [vocab, hidden]
        weight = head.weight.detach().to(torch.float32).cpu().numpy().T.copy()
        bias = head.bias
        if bias is None:
            # a head without an additive term projects with an implicit zero bias
            bias = np.zeros(weight.shape[1], dtype=np.float32)
        else:
            bias = bias.detach().to(torch.float32).cpu().numpy().copy()
    d_model, vocab_size = weight.shape
    if int(model.config.hidden_size) != d_model or int(model.config.vocab_size) != vocab_size:
        raise ValidationError(
            f"checkpoint {model_name!r}: head shape {weight.shape} disagrees with config "
            f"({model.config.hidden_size}, {model.config.vocab_size})"
        )
    if bias.shape != (vocab_size,):
        raise ValidationError(
            f"checkpoint {model_name!r}: bias shape {bias.shape}, expected ({vocab_size},)"
        )
    tensors = {"mlm.weight": weight, "mlm.bias": bias}
    write_tensors(out_path, tensors)
    return tensors


def export_embeddings(
    model_name: str,
    corpus_path,
    max_len: int,
    out_path,
    batch_size: int = 8,
) -> tuple[EmbeddingDump, int]:
    """Write final-layer token embeddings for every non-empty corpus document.

    Returns the dump and the number of documents skipped for empty text.
    """
    from transformers import AutoModel, AutoTokenizer

    if max_len not in ALLOWED_MAX_LEN:
        raise ValidationError(f"max_len must be one of {ALLOWED_MAX_LEN}, got {max_len}")
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")
    tokenizer = AutoTokenizer.from_pretrained(model_name)
    model = AutoModel.from_pretrained(model_name)
    model.eval()
    docs = read_text_corpus(corpus_path)
    kept = [d for d in docs if d.text.strip()]
    skipped = len(docs) - len(kept)
    # pad may be absent from some tokenizers; mask whichever specials exist
    special_ids = {
        t for t in (tokenizer.cls_token_id, tokenizer.sep_token_id, tokenizer.pad_token_id)
        if t is not None
    }
    records: list[DocumentEmbedding] = []
    with torch.no_grad():
        for start in range(0, len(kept), batch_size):
            chunk = kept[start : start + batch_size]
            encoded = tokenizer(
                [d.text for d in chunk], truncation=True, max_length=max_len
            )["input_ids"]
            for doc, ids in zip(chunk, encoded):
                hidden = model(input_ids=torch.tensor([ids])).last_hidden_state[0]
                emb = hidden.to(torch.float32).cpu().numpy()
                records.append(
                    DocumentEmbedding(
                        doc_id=doc.doc_id,
                        token_ids=np.asarray(ids, dtype=np.int32),
                        special_mask=np.array([i in special_ids for i in ids], dtype=bool),
                        embeddings=emb,
                        cls_embedding=emb[0].copy(),
                    )
                )
    dump = EmbeddingDump(
        d_model=int(model.config.hidden_size),
        vocab_size=int(model.config.vocab_size),
        producer=model_name,
        records=records,
    )
    write_embedding_dump(out_path, dump)
    return dump, skipped
