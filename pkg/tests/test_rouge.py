"""ROUGE scores against hand-counted oracles and structural properties."""

import random

import pytest

from hilite.errors import EvaluationError
from hilite.rouge import RougeScore, lcs_length, parse_metrics, rouge_l, rouge_n, score


def random_tokens(rng, max_len=20, vocab=8):
    return [f"w{rng.randrange(vocab)}" for _ in range(rng.randrange(0, max_len))]


class TestRougeN:
    def test_identity(self):
        s = rouge_n(["a", "b", "c"], ["a", "b", "c"], 1)
        assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)

    def test_unigram_hand_count(self):
        # candidate "the cat sat" vs reference "the cat":
        # matches 2 of 3 candidate unigrams, 2 of 2 reference unigrams.
        s = rouge_n("the cat sat".split(), "the cat".split(), 1)
        assert s.precision == pytest.approx(2 / 3, abs=1e-12)
        assert s.recall == pytest.approx(1.0, abs=1e-12)
        assert s.f1 == pytest.approx(0.8, abs=1e-12)

    def test_bigram_hand_count(self):
        # bigrams {ab, bc} vs {ab, bd}: one match on each side of two.
        s = rouge_n("a b c".split(), "a b d".split(), 2)
        assert (s.precision, s.recall, s.f1) == (0.5, 0.5, 0.5)

    def test_clipping_respects_reference_multiplicity(self):
        base = rouge_n(["a", "a"], ["a", "b"], 1)
        stuffed = rouge_n(["a", "a", "a", "a"], ["a", "b"], 1)
        # Clipped matches stay at 1 regardless of candidate repetition.
        assert base.recall == stuffed.recall == 0.5
        assert stuffed.precision == 0.25

    def test_empty_sides(self):
        s = rouge_n([], ["a"], 1)
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)
        s = rouge_n(["a"], [], 1)
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)
        # Too short for bigrams on the candidate side only.
        s = rouge_n(["a"], ["a", "b"], 2)
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)

    def test_invalid_order_rejected(self):
        with pytest.raises(EvaluationError):
            rouge_n(["a"], ["a"], 0)

    def test_swap_symmetry(self):
        rng = random.Random(3)
        for _ in range(500):
            a, b = random_tokens(rng), random_tokens(rng)
            n = rng.randrange(1, 4)
            assert rouge_n(a, b, n).precision == rouge_n(b, a, n).recall
            assert rouge_n(a, b, n).recall == rouge_n(b, a, n).precision

    def test_identity_property_random(self):
        rng = random.Random(5)
        for _ in range(100):
            tokens = random_tokens(rng)
            if not tokens:
                continue
            s = rouge_n(tokens, tokens, 1)
            assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)


class TestLcs:
    def test_hand_dp(self):
        # "a b c d" vs "a c b d": LCS is "a b d" or "a c d", length 3.
        assert lcs_length("a b c d".split(), "a c b d".split()) == 3

    def test_self(self):
        tokens = "x y z".split()
        assert lcs_length(tokens, tokens) == 3

    def test_empty(self):
        assert lcs_length([], ["a"]) == 0
        assert lcs_length(["a"], []) == 0

    def test_bounds_and_subsequence_condition(self):
        rng = random.Random(7)

        def is_subsequence(a, b):
            it = iter(b)
            return all(token in it for token in a)

        for _ in range(300):
            a, b = random_tokens(rng, 12, 4), random_tokens(rng, 12, 4)
            length = lcs_length(a, b)
            assert length <= min(len(a), len(b))
            assert (length == len(a)) == is_subsequence(a, b)


class TestRougeL:
    def test_hand_dp(self):
        s = rouge_l("a b c d".split(), "a c b d".split())
        assert (s.precision, s.recall, s.f1) == (0.75, 0.75, 0.75)

    def test_identity(self):
        s = rouge_l(["a", "b"], ["a", "b"])
        assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)

    def test_disjoint(self):
        s = rouge_l(["a", "b"], ["c", "d"])
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)

    def test_empty(self):
        s = rouge_l([], [])
        assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)


class TestScoreInvariants:
    def test_f1_harmonic_mean_invariant(self):
        rng = random.Random(11)
        for _ in range(500):
            a, b = random_tokens(rng), random_tokens(rng)
            for metric in ("1", "2", "L"):
                s = score(a, b, metric)
                p, r = s.precision, s.recall
                expected = 2 * p * r / (p + r) if p + r > 0 else 0.0
                assert abs(s.f1 - expected) < 1e-12
                assert 0.0 <= p <= 1.0 and 0.0 <= r <= 1.0 and 0.0 <= s.f1 <= 1.0

    def test_from_precision_recall(self):
        assert RougeScore.from_precision_recall(0.0, 0.0).f1 == 0.0
        assert RougeScore.from_precision_recall(1.0, 1.0).f1 == 1.0

    def test_parse_metrics(self):
        assert parse_metrics("1,2,L") == ["1", "2", "L"]
        assert parse_metrics("l") == ["L"]
        with pytest.raises(EvaluationError):
            parse_metrics("bogus")
        with pytest.raises(EvaluationError):
            parse_metrics("")

    def test_score_dispatch_rejects_unknown(self):
        with pytest.raises(EvaluationError):
            score(["a"], ["a"], "W")
