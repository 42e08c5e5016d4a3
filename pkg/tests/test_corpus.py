"""Corpus loading, validation, and the flat-index bijection."""

import json
import random

import pytest

from hilite.corpus import (
    Document,
    Sentence,
    TokenLocation,
    flat_index,
    flatten,
    index_by_doc_id,
    load_corpus,
    locate,
    save_corpus,
)
from hilite.errors import CorpusError, FormatError


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def random_document(rng, doc_id):
    sentences = [
        [f"w{rng.randrange(40)}" for _ in range(rng.randrange(1, 12))]
        for _ in range(rng.randrange(1, 8))
    ]
    abstract = [f"a{rng.randrange(20)}" for _ in range(rng.randrange(0, 10))]
    return Document.from_tokens(doc_id, sentences, abstract)


class TestLoading:
    def test_single_document_schema(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_lines(
            path,
            [json.dumps({
                "doc_id": "d1",
                "sentences": [["a", "b", "c"], ["d", "e", "f"]],
                "abstract": ["x"],
            })],
        )
        docs = load_corpus(path)
        assert len(docs) == 1
        assert docs[0].doc_id == "d1"
        assert docs[0].num_tokens == 6
        assert docs[0].sentences[1].tokens == ("d", "e", "f")
        assert docs[0].sentences[1].position == 1

    def test_duplicate_doc_id_names_id_and_line(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        record = {"doc_id": "d1", "sentences": [["a"]], "abstract": []}
        other = {"doc_id": "d2", "sentences": [["b"]], "abstract": []}
        write_lines(path, [json.dumps(record), json.dumps(other), json.dumps(record)])
        with pytest.raises(CorpusError) as err:
            load_corpus(path)
        assert "'d1'" in str(err.value)
        assert "line 3" in str(err.value)

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_lines(
            path,
            [json.dumps({"doc_id": "d1", "sentences": [["a"]], "abstract": []}), "{oops"],
        )
        with pytest.raises(FormatError) as err:
            load_corpus(path)
        assert "line 2" in str(err.value)

    def test_empty_sentence_rejected_with_diagnostic(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_lines(
            path,
            [json.dumps({"doc_id": "d1", "sentences": [["a"], []], "abstract": []})],
        )
        with pytest.raises(CorpusError) as err:
            load_corpus(path)
        assert "line 1" in str(err.value)
        assert "empty sentence" in str(err.value)

    def test_missing_field_rejected(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_lines(path, [json.dumps({"doc_id": "d1", "sentences": [["a"]]})])
        with pytest.raises(FormatError) as err:
            load_corpus(path)
        assert "abstract" in str(err.value)

    def test_empty_abstract_allowed(self, tmp_path):
        path = tmp_path / "docs.jsonl"
        write_lines(
            path, [json.dumps({"doc_id": "d1", "sentences": [["a"]], "abstract": []})]
        )
        assert load_corpus(path)[0].abstract_len == 0

    def test_round_trip_100_documents(self, tmp_path):
        rng = random.Random(11)
        docs = [random_document(rng, f"doc-{i}") for i in range(100)]
        path = tmp_path / "docs.jsonl"
        save_corpus(docs, path)
        assert load_corpus(path) == docs


class TestValidation:
    def test_empty_token_rejected(self):
        with pytest.raises(CorpusError):
            Sentence(tokens=("a", ""), position=0)

    def test_no_sentences_rejected(self):
        with pytest.raises(CorpusError):
            Document(doc_id="d", sentences=(), abstract_tokens=())

    def test_position_must_match_rank(self):
        with pytest.raises(CorpusError):
            Document(
                doc_id="d",
                sentences=(Sentence(("a",), 1),),
                abstract_tokens=(),
            )

    def test_index_by_doc_id_rejects_duplicates(self):
        doc = Document.from_tokens("d", [["a"]])
        with pytest.raises(CorpusError):
            index_by_doc_id([doc, doc])


class TestFlatten:
    def test_lengths_2_3(self):
        doc = Document.from_tokens("d", [["a", "b"], ["c", "d", "e"]])
        assert flatten(doc) == [
            TokenLocation(0, 0, 0),
            TokenLocation(1, 0, 1),
            TokenLocation(2, 1, 0),
            TokenLocation(3, 1, 1),
            TokenLocation(4, 1, 2),
        ]

    def test_single_token_sentence(self):
        doc = Document.from_tokens("d", [["a"]])
        assert flatten(doc) == [TokenLocation(0, 0, 0)]

    def test_bijection_by_exhaustive_inversion(self):
        rng = random.Random(5)
        for _ in range(50):
            doc = random_document(rng, "d")
            locations = flatten(doc)
            assert len(locations) == doc.num_tokens
            assert [l.flat_index for l in locations] == list(range(doc.num_tokens))
            pairs = [(l.sentence_index, l.local_index) for l in locations]
            assert pairs == sorted(pairs)
            for loc in locations:
                assert locate(doc, loc.flat_index) == loc
                assert flat_index(doc, loc.sentence_index, loc.local_index) == loc.flat_index

    def test_locate_out_of_range(self):
        doc = Document.from_tokens("d", [["a", "b"]])
        with pytest.raises(CorpusError):
            locate(doc, 2)
        with pytest.raises(CorpusError):
            flat_index(doc, 0, 2)
