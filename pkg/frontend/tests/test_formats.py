"""Writers must produce bytes the consuming package parses unchanged."""

import numpy as np
import pytest
from aggvec import io_formats as consumer

from hf_export.errors import FormatError, ValidationError
from hf_export.formats import (
    DocumentEmbedding,
    EmbeddingDump,
    read_text_corpus,
    write_embedding_dump,
    write_tensors,
)


def sample_tensors():
    rng = np.random.default_rng(0)
    return {
        "mlm.weight": rng.normal(size=(6, 11)).astype(np.float32),
        "mlm.bias": rng.normal(size=11).astype(np.float32),
    }


def sample_dump():
    rng = np.random.default_rng(1)
    records = []
    for i, length in enumerate([3, 5]):
        records.append(
            DocumentEmbedding(
                doc_id=f"d{i}",
                token_ids=np.arange(length, dtype=np.int32) + 2,
                special_mask=np.array([True] + [False] * (length - 2) + [True]),
                embeddings=rng.normal(size=(length, 4)).astype(np.float32),
                cls_embedding=rng.normal(size=4).astype(np.float32),
            )
        )
    return EmbeddingDump(d_model=4, vocab_size=11, producer="unit-test", records=records)


class TestTensorWriter:
    def test_bytes_match_consumer_writer(self, tmp_path):
        tensors = sample_tensors()
        ours, theirs = tmp_path / "a.bin", tmp_path / "b.bin"
        write_tensors(ours, tensors)
        consumer.write_tensors(theirs, tensors)
        assert ours.read_bytes() == theirs.read_bytes()

    def test_consumer_reads_values_back(self, tmp_path):
        tensors = sample_tensors()
        path = tmp_path / "t.bin"
        write_tensors(path, tensors)
        loaded = consumer.read_tensors(path)
        assert list(loaded) == list(tensors)
        for name in tensors:
            assert np.array_equal(loaded[name], tensors[name])

    def test_non_finite_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            write_tensors(tmp_path / "t.bin", {"w": np.array([1.0, np.nan])})

    def test_empty_name_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            write_tensors(tmp_path / "t.bin", {"": np.zeros(2)})


class TestEmbeddingWriter:
    def test_bytes_match_consumer_writer(self, tmp_path):
        dump = sample_dump()
        ours, theirs = tmp_path / "a.bin", tmp_path / "b.bin"
        write_embedding_dump(ours, dump)
        consumer.write_embedding_dump(
            theirs,
            consumer.EmbeddingDump(
                d_model=dump.d_model,
                vocab_size=dump.vocab_size,
                producer=dump.producer,
                records=[
                    consumer.EmbeddingRecord(
                        r.doc_id, r.token_ids, r.special_mask, r.embeddings, r.cls_embedding
                    )
                    for r in dump.records
                ],
            ),
        )
        assert ours.read_bytes() == theirs.read_bytes()

    def test_consumer_reads_records_back(self, tmp_path):
        dump = sample_dump()
        path = tmp_path / "e.bin"
        write_embedding_dump(path, dump)
        loaded = consumer.read_embedding_dump(path)
        assert loaded.d_model == 4 and loaded.vocab_size == 11
        assert loaded.producer == "unit-test"
        assert [r.doc_id for r in loaded.records] == ["d0", "d1"]
        for ours, theirs in zip(dump.records, loaded.records):
            assert np.array_equal(theirs.token_ids, ours.token_ids)
            assert np.array_equal(theirs.special_mask, ours.special_mask)
            assert np.array_equal(theirs.embeddings, ours.embeddings)
            assert np.array_equal(theirs.cls_embedding, ours.cls_embedding)

    def test_duplicate_doc_id_rejected(self, tmp_path):
        dump = sample_dump()
        dump.records[1].doc_id = dump.records[0].doc_id
        with pytest.raises(ValidationError):
            write_embedding_dump(tmp_path / "e.bin", dump)

    def test_inconsistent_shapes_rejected(self, tmp_path):
        dump = sample_dump()
        dump.records[0].cls_embedding = np.zeros(5, dtype=np.float32)
        with pytest.raises(ValidationError):
            write_embedding_dump(tmp_path / "e.bin", dump)

    def test_empty_document_rejected(self, tmp_path):
        dump = sample_dump()
        dump.records[0].token_ids = np.zeros(0, dtype=np.int32)
        dump.records[0].special_mask = np.zeros(0, dtype=bool)
        dump.records[0].embeddings = np.zeros((0, 4), dtype=np.float32)
        with pytest.raises(ValidationError):
            write_embedding_dump(tmp_path / "e.bin", dump)


class TestTextCorpus:
    def write(self, tmp_path, text):
        path = tmp_path / "c.jsonl"
        path.write_text(text, encoding="utf-8")
        return path

    def test_reads_documents_in_order(self, tmp_path):
        path = self.write(tmp_path, '{"id": "a", "text": "one"}\n\n{"id": "b", "text": ""}\n')
        docs = read_text_corpus(path)
        assert [(d.doc_id, d.text) for d in docs] == [("a", "one"), ("b", "")]

    def test_invalid_json_names_line(self, tmp_path):
        path = self.write(tmp_path, '{"id": "a", "text": "one"}\n{oops\n')
        with pytest.raises(FormatError, match="line 2"):
            read_text_corpus(path)

    def test_wrong_keys_rejected(self, tmp_path):
        path = self.write(tmp_path, '{"id": "a", "body": "one"}\n')
        with pytest.raises(FormatError, match="line 1"):
            read_text_corpus(path)

    def test_extra_keys_rejected(self, tmp_path):
        path = self.write(tmp_path, '{"id": "a", "text": "one", "x": 1}\n')
        with pytest.raises(FormatError):
            read_text_corpus(path)

    def test_duplicate_id_rejected(self, tmp_path):
        path = self.write(tmp_path, '{"id": "a", "text": "1"}\n{"id": "a", "text": "2"}\n')
        with pytest.raises(FormatError, match="duplicate"):
            read_text_corpus(path)

    def test_non_string_fields_rejected(self, tmp_path):
        with pytest.raises(FormatError):
            read_text_corpus(self.write(tmp_path, '{"id": 3, "text": "x"}\n'))
        with pytest.raises(FormatError):
            read_text_corpus(self.write(tmp_path, '{"id": "a", "text": 3}\n'))

    def test_missing_file_raises(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_text_corpus(tmp_path / "absent.jsonl")
