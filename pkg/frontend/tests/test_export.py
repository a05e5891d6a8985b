"""Checkpoint export behavior, verified through the consuming package's readers."""

import json
import re

import numpy as np
import pytest
from aggvec import MlmHead, mlm_project_rows, read_embedding_dump, read_tensors

from hf_export.errors import MissingHeadError, ValidationError
from hf_export.export import export_embeddings, export_heads


class TestExportHeads:
    def test_bert_base_shapes(self, checkpoint, tmp_path):
        tensors = export_heads(checkpoint, tmp_path / "heads.bin")
        assert tensors["mlm.weight"].shape == (768, 30522)
        assert tensors["mlm.bias"].shape == (30522,)

    def test_round_trips_through_consumer_reader(self, checkpoint, tmp_path):
        path = tmp_path / "heads.bin"
        written = export_heads(checkpoint, path)
        loaded = read_tensors(path)
        assert set(loaded) == {"mlm.weight", "mlm.bias"}
        assert np.array_equal(loaded["mlm.weight"], written["mlm.weight"])
        assert np.array_equal(loaded["mlm.bias"], written["mlm.bias"])

    def test_matches_checkpoint_parameters(self, checkpoint, tmp_path):
        import torch
        from transformers import AutoModelForMaskedLM

        tensors = export_heads(checkpoint, tmp_path / "heads.bin")
        head = AutoModelForMaskedLM.from_pretrained(checkpoint).get_output_embeddings()
        with torch.no_grad():
            assert np.array_equal(tensors["mlm.weight"], head.weight.numpy().T)
            assert np.array_equal(tensors["mlm.bias"], head.bias.numpy())

    def test_missing_head_error_names_checkpoint(self, headless_checkpoint, tmp_path):
        out = tmp_path / "heads.bin"
        with pytest.raises(MissingHeadError, match=re.escape(headless_checkpoint)):
            export_heads(headless_checkpoint, out)
        assert not out.exists()


class TestExportEmbeddings:
    def test_dump_header_and_document_set(self, checkpoint, corpus_file, tmp_path):
        path = tmp_path / "emb.bin"
        dump, skipped = export_embeddings(checkpoint, corpus_file, 128, path)
        assert skipped == 0
        assert dump.d_model == 768 and dump.vocab_size == 30522
        assert dump.producer == checkpoint
        loaded = read_embedding_dump(path)
        assert [r.doc_id for r in loaded.records] == [f"d{i}" for i in range(10)]
        for rec in loaded.records:
            assert rec.embeddings.shape == (rec.token_ids.size, 768)

    def test_token_ids_match_tokenizer(self, checkpoint, corpus_file, tmp_path):
        from transformers import AutoTokenizer

        dump, _ = export_embeddings(checkpoint, corpus_file, 128, tmp_path / "emb.bin")
        tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        with open(corpus_file, encoding="utf-8") as f:
            texts = {obj["id"]: obj["text"] for obj in map(json.loads, f)}
        for rec in dump.records:
            expected = tokenizer(texts[rec.doc_id], truncation=True, max_length=128)["input_ids"]
            assert rec.token_ids.tolist() == expected

    def test_subword_splitting_reaches_the_dump(self, checkpoint, corpus_file, tmp_path):
        from transformers import AutoTokenizer

        dump, _ = export_embeddings(checkpoint, corpus_file, 128, tmp_path / "emb.bin")
        tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        by_id = {r.doc_id: r for r in dump.records}
        # "worlding" is out of vocabulary as a whole word but splits cleanly
        tokens = tokenizer.convert_ids_to_tokens(by_id["d2"].token_ids.tolist())
        assert tokens == ["[CLS]", "world", "##ing", "[SEP]"]

    def test_special_mask_marks_cls_and_sep_only(self, checkpoint, corpus_file, tmp_path):
        from transformers import AutoTokenizer

        dump, _ = export_embeddings(checkpoint, corpus_file, 128, tmp_path / "emb.bin")
        tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        for rec in dump.records:
            expected = np.zeros(rec.token_ids.size, dtype=bool)
            expected[0] = expected[-1] = True
            assert np.array_equal(rec.special_mask, expected), rec.doc_id
        # an unknown word maps to [UNK], which is a real pooled token
        by_id = {r.doc_id: r for r in dump.records}
        unk_positions = by_id["d4"].token_ids == tokenizer.unk_token_id
        assert unk_positions.any()
        assert not by_id["d4"].special_mask[unk_positions].any()

    def test_cls_embedding_is_position_zero(self, checkpoint, corpus_file, tmp_path):
        dump, _ = export_embeddings(checkpoint, corpus_file, 128, tmp_path / "emb.bin")
        for rec in dump.records:
            assert np.array_equal(rec.cls_embedding, rec.embeddings[0])

    def test_embeddings_are_final_layer_states(self, checkpoint, corpus_file, tmp_path):
        import torch
        from transformers import AutoModel

        dump, _ = export_embeddings(checkpoint, corpus_file, 128, tmp_path / "emb.bin")
        model = AutoModel.from_pretrained(checkpoint)
        model.eval()
        with torch.no_grad():
            for rec in dump.records[:3]:
                ids = torch.tensor([rec.token_ids.tolist()])
                expected = model(input_ids=ids).last_hidden_state[0].numpy()
                assert np.array_equal(rec.embeddings, expected)

    def test_token_count_capped_at_max_len(self, checkpoint, tmp_path):
        path = tmp_path / "long.jsonl"
        path.write_text(
            json.dumps({"id": "long", "text": "hello world " * 200}) + "\n", encoding="utf-8"
        )
        dump, _ = export_embeddings(checkpoint, path, 32, tmp_path / "emb.bin")
        (rec,) = dump.records
        assert rec.token_ids.size == 32
        assert rec.embeddings.shape == (32, 768)

    def test_empty_text_skipped_with_count(self, checkpoint, tmp_path):
        docs = [
            {"id": "a", "text": "hello"},
            {"id": "b", "text": ""},
            {"id": "c", "text": "   "},
            {"id": "d", "text": "world"},
        ]
        path = tmp_path / "gaps.jsonl"
        path.write_text("".join(json.dumps(d) + "\n" for d in docs), encoding="utf-8")
        dump, skipped = export_embeddings(checkpoint, path, 32, tmp_path / "emb.bin")
        assert skipped == 2
        assert [r.doc_id for r in dump.records] == ["a", "d"]

    def test_reexport_is_bit_identical(self, checkpoint, corpus_file, tmp_path):
        first, second = tmp_path / "a.bin", tmp_path / "b.bin"
        export_embeddings(checkpoint, corpus_file, 128, first)
        export_embeddings(checkpoint, corpus_file, 128, second)
        assert first.read_bytes() == second.read_bytes()

    def test_batch_size_does_not_change_bytes(self, checkpoint, corpus_file, tmp_path):
        one, four = tmp_path / "b1.bin", tmp_path / "b4.bin"
        export_embeddings(checkpoint, corpus_file, 128, one, batch_size=1)
        export_embeddings(checkpoint, corpus_file, 128, four, batch_size=4)
        assert one.read_bytes() == four.read_bytes()

    def test_max_len_must_be_supported(self, checkpoint, corpus_file, tmp_path):
        with pytest.raises(ValidationError):
            export_embeddings(checkpoint, corpus_file, 64, tmp_path / "emb.bin")

    def test_batch_size_must_be_positive(self, checkpoint, corpus_file, tmp_path):
        with pytest.raises(ValidationError):
            export_embeddings(checkpoint, corpus_file, 32, tmp_path / "emb.bin", batch_size=0)


class TestConsumerBoundary:
    def test_recomputed_distributions_sum_to_one(self, checkpoint, corpus_file, tmp_path):
        heads_path, emb_path = tmp_path / "heads.bin", tmp_path / "emb.bin"
        export_heads(checkpoint, heads_path)
        export_embeddings(checkpoint, corpus_file, 128, emb_path)
        tensors = read_tensors(heads_path)
        head = MlmHead(
            tensors["mlm.weight"].astype(np.float64), tensors["mlm.bias"].astype(np.float64)
        )
        dump = read_embedding_dump(emb_path)
        assert head.vocab_size == dump.vocab_size == 30522
        checked = 0
        for rec in dump.records:
            probs = mlm_project_rows(rec.sequence().embeddings, head)
            assert probs.shape == (rec.token_ids.size, 30522)
            assert np.all(np.abs(probs.sum(axis=1) - 1.0) <= 1e-4)
            checked += rec.token_ids.size
        assert checked >= 10
