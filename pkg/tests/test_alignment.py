"""Argmax word alignment against brute-force scans."""

import numpy as np
import pytest

from hilite.alignment import (
    AlignedWordSet,
    AttentionMatrix,
    align_argmax,
    load_attention,
    row_argmax,
    save_attention,
    token_alignments,
)
from hilite.corpus import Document
from hilite.errors import AlignmentError


def scan_argmax(row):
    """Independent exhaustive scan, lowest index on ties."""
    best, best_value = 0, row[0]
    for i, value in enumerate(row):
        if value > best_value:
            best, best_value = i, value
    return best


def random_attention(rng, n, m):
    raw = rng.random((n, m))
    return raw / raw.sum(axis=1, keepdims=True)


class TestRowArgmax:
    def test_unique_maximum(self):
        assert row_argmax([0.2, 0.5, 0.3]) == 1

    def test_tie_breaks_to_lowest_index(self):
        assert row_argmax([0.4, 0.4, 0.2]) == 0

    def test_against_scan_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            row = rng.random(50)
            assert row_argmax(row) == scan_argmax(list(row))

    def test_empty_row_rejected(self):
        with pytest.raises(AlignmentError):
            row_argmax([])

    def test_scale_invariance(self):
        rng = np.random.default_rng(23)
        for _ in range(200):
            row = rng.random(30)
            scale = float(rng.uniform(0.1, 50.0))
            assert row_argmax(row) == row_argmax(row * scale)


class TestAlignArgmax:
    def test_identity_matrix(self):
        attn = AttentionMatrix("d", np.eye(3))
        assert align_argmax(attn).indices == {0, 1, 2}

    def test_deduplication(self):
        weights = np.zeros((2, 6))
        weights[:, 4] = 1.0
        attn = AttentionMatrix("d", weights)
        assert align_argmax(attn).indices == {4}

    def test_against_brute_force_union(self):
        rng = np.random.default_rng(31)
        for _ in range(1000):
            weights = random_attention(rng, 10, 40)
            attn = AttentionMatrix("d", weights)
            expected = {scan_argmax(list(row)) for row in weights}
            assert align_argmax(attn).indices == expected

    def test_size_bound_and_distinctness(self):
        rng = np.random.default_rng(43)
        for _ in range(200):
            weights = random_attention(rng, 8, 20)
            attn = AttentionMatrix("d", weights)
            per_token = token_alignments(attn)
            aligned = align_argmax(attn)
            assert len(aligned.indices) <= attn.num_abstract_tokens
            assert (len(aligned.indices) == len(per_token)) == (
                len(set(per_token)) == len(per_token)
            )

    def test_row_sum_violation_names_row(self):
        weights = np.full((3, 4), 0.25)
        weights[2] = 0.5
        attn = AttentionMatrix("d", weights)
        with pytest.raises(AlignmentError) as err:
            align_argmax(attn)
        assert "row 2" in str(err.value)

    def test_negative_weight_rejected(self):
        weights = np.array([[1.2, -0.2]])
        with pytest.raises(AlignmentError) as err:
            align_argmax(AttentionMatrix("d", weights))
        assert "row 0" in str(err.value)

    def test_row_sum_tolerance_accepts_float32_noise(self):
        weights = np.full((2, 4), 0.25) + 2e-5
        align_argmax(AttentionMatrix("d", weights))

    def test_empty_abstract_aligns_to_nothing(self):
        attn = AttentionMatrix("d", np.zeros((0, 0)))
        assert align_argmax(attn).indices == frozenset()


class TestShapesAndIO:
    def test_check_against_document(self):
        doc = Document.from_tokens("d", [["a", "b"], ["c"]], ["x", "y"])
        AttentionMatrix("d", random_attention(np.random.default_rng(1), 2, 3)).check_against(doc)
        with pytest.raises(AlignmentError):
            AttentionMatrix("d", random_attention(np.random.default_rng(1), 3, 3)).check_against(doc)
        with pytest.raises(AlignmentError):
            AttentionMatrix("d", random_attention(np.random.default_rng(1), 2, 4)).check_against(doc)
        with pytest.raises(AlignmentError):
            AttentionMatrix("other", random_attention(np.random.default_rng(1), 2, 3)).check_against(doc)

    def test_jsonl_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        matrices = [
            AttentionMatrix(f"d{i}", random_attention(rng, 3, 5)) for i in range(4)
        ]
        path = tmp_path / "attn.jsonl"
        save_attention(matrices, path)
        loaded = load_attention(path)
        assert [m.doc_id for m in loaded] == [m.doc_id for m in matrices]
        for saved, read in zip(matrices, loaded):
            np.testing.assert_array_equal(saved.weights, read.weights)

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "attn.jsonl"
        path.write_text('{"doc_id": "d", "weights": [[0.5, 0.5], [1.0]]}\n')
        with pytest.raises(AlignmentError):
            load_attention(path)

    def test_aligned_set_rejects_negatives(self):
        with pytest.raises(AlignmentError):
            AlignedWordSet("d", frozenset({-1}))
