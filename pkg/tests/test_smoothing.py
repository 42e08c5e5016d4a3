"""Gap filling, run selection, and gold annotation, checked against an
independent fixpoint/enumeration oracle."""

import random

import pytest

from hilite.alignment import AlignedWordSet
from hilite.corpus import Document, flat_index
from hilite.errors import AnnotationError
from hilite.smoothing import (
    Run,
    SentenceAnnotation,
    SmoothingConfig,
    annotate_document,
    fill_gaps,
    load_annotations,
    per_sentence_selection,
    runs,
    save_annotations,
    select_segment,
)

from conftest import CRASH_ALIGNED, CRASH_RUNS_EXTENDED, CRASH_RUNS_PLAIN, CRASH_SENTENCE


# ---------------------------------------------------------------------------
# Independent oracle: membership-test fixpoint filling plus exhaustive run
# enumeration.  Deliberately shares no code with the implementation.
# ---------------------------------------------------------------------------


def oracle_fill(selected, sentence_len, gap_threshold, extend_to_boundary):
    filled = set(selected)
    changed = bool(filled)
    while changed:
        changed = False
        for token in range(sentence_len):
            if token in filled:
                continue
            left = [i for i in filled if i < token]
            right = [i for i in filled if i > token]
            for a in left:
                for b in right:
                    unselected = sum(1 for t in range(a + 1, b) if t not in filled)
                    if unselected < gap_threshold:
                        filled.add(token)
                        changed = True
                        break
                if token in filled:
                    break
    if extend_to_boundary and filled:
        first, last = min(filled), max(filled)
        if 0 < first < gap_threshold:
            filled |= set(range(first))
        if 0 < (sentence_len - 1 - last) < gap_threshold:
            filled |= set(range(last + 1, sentence_len))
    return filled


def oracle_runs(filled, sentence_len):
    found = []
    for a in range(sentence_len):
        for b in range(a, sentence_len):
            covers = all(t in filled for t in range(a, b + 1))
            maximal = (a == 0 or a - 1 not in filled) and (
                b == sentence_len - 1 or b + 1 not in filled
            )
            if covers and maximal:
                found.append((a, b))
    return found


def oracle_segment(run_pairs, min_segment_tokens):
    best = None
    for a, b in run_pairs:
        length = b - a + 1
        if best is None or length > best[1] - best[0] + 1:
            best = (a, b)
    if best is None or (best[1] - best[0] + 1) < min_segment_tokens:
        return None
    return best


def oracle_annotate_sentence(selected, sentence_len, cfg):
    filled = oracle_fill(selected, sentence_len, cfg.gap_threshold, cfg.extend_to_boundary)
    return oracle_segment(oracle_runs(filled, sentence_len), cfg.min_segment_tokens)


# ---------------------------------------------------------------------------


class TestPerSentenceSelection:
    def test_coordinate_conversion(self):
        doc = Document.from_tokens("d", [["a", "b"], ["c", "d", "e"]])
        aligned = AlignedWordSet("d", frozenset({0, 4}))
        assert per_sentence_selection(aligned, doc) == {0: {0}, 1: {2}}

    def test_empty_set(self):
        doc = Document.from_tokens("d", [["a", "b"]])
        assert per_sentence_selection(AlignedWordSet("d", frozenset()), doc) == {}

    def test_round_trip_to_flat_indices(self):
        rng = random.Random(7)
        for _ in range(1000):
            doc = Document.from_tokens(
                "d",
                [
                    [f"t{i}" for i in range(rng.randrange(1, 9))]
                    for _ in range(rng.randrange(1, 6))
                ],
            )
            picked = frozenset(
                rng.sample(range(doc.num_tokens), rng.randrange(0, doc.num_tokens + 1))
            )
            selection = per_sentence_selection(AlignedWordSet("d", picked), doc)
            recovered = {
                flat_index(doc, sentence_index, local)
                for sentence_index, locals_ in selection.items()
                for local in locals_
            }
            assert recovered == picked

    def test_out_of_range_rejected(self):
        doc = Document.from_tokens("d", [["a", "b"]])
        with pytest.raises(AnnotationError):
            per_sentence_selection(AlignedWordSet("d", frozenset({2})), doc)

    def test_doc_id_mismatch_rejected(self):
        doc = Document.from_tokens("d", [["a"]])
        with pytest.raises(AnnotationError):
            per_sentence_selection(AlignedWordSet("other", frozenset()), doc)


class TestFillGaps:
    def test_small_gap_bridged(self):
        cfg = SmoothingConfig(gap_threshold=5)
        assert fill_gaps({0, 3}, 6, cfg) == {0, 1, 2, 3}

    def test_gap_of_exactly_threshold_not_bridged(self):
        cfg = SmoothingConfig(gap_threshold=5)
        assert fill_gaps({0, 6}, 8, cfg) == {0, 6}

    def test_one_token_gap_bridged(self):
        # "crash of germanwings" with only the outer two selected.
        cfg = SmoothingConfig(gap_threshold=5)
        assert fill_gaps({0, 2}, 3, cfg) == {0, 1, 2}

    def test_boundary_extension_only_when_enabled(self):
        plain = SmoothingConfig(gap_threshold=5, extend_to_boundary=False)
        extended = SmoothingConfig(gap_threshold=5, extend_to_boundary=True)
        assert fill_gaps({3, 4}, 8, plain) == {3, 4}
        assert fill_gaps({3, 4}, 8, extended) == {0, 1, 2, 3, 4, 5, 6, 7}
        # A boundary stretch of exactly gap_threshold stays open.
        assert fill_gaps({5}, 11, extended) == {5}

    def test_monotone_and_idempotent(self):
        rng = random.Random(13)
        for _ in range(500):
            length = rng.randrange(1, 30)
            selected = set(rng.sample(range(length), rng.randrange(0, length + 1)))
            cfg = SmoothingConfig(
                gap_threshold=rng.randrange(0, 8),
                extend_to_boundary=rng.random() < 0.5,
            )
            filled = fill_gaps(selected, length, cfg)
            assert filled >= selected
            assert fill_gaps(filled, length, cfg) == filled

    def test_out_of_range_rejected(self):
        with pytest.raises(AnnotationError):
            fill_gaps({5}, 5, SmoothingConfig())


class TestRuns:
    def test_empty(self):
        assert runs(set()) == []

    def test_two_runs(self):
        assert runs({1, 2, 3, 7, 8}) == [Run(1, 3), Run(7, 8)]

    def test_against_enumeration_oracle(self):
        rng = random.Random(19)
        for _ in range(1000):
            length = rng.randrange(1, 41)
            selected = set(rng.sample(range(length), rng.randrange(0, length + 1)))
            expected = oracle_runs(selected, length)
            assert [(r.start, r.end) for r in runs(selected)] == expected

    def test_partition_property(self):
        rng = random.Random(29)
        for _ in range(300):
            length = rng.randrange(1, 40)
            selected = set(rng.sample(range(length), rng.randrange(0, length + 1)))
            result = runs(selected)
            covered = [t for r in result for t in range(r.start, r.end + 1)]
            assert sorted(covered) == sorted(selected)
            assert [r.start for r in result] == sorted(r.start for r in result)


class TestSelectSegment:
    def test_longest_wins(self):
        cfg = SmoothingConfig()
        assert select_segment([Run(0, 7), Run(14, 35)], cfg) == Run(14, 35)

    def test_tie_goes_to_first(self):
        cfg = SmoothingConfig(min_segment_tokens=6)
        assert select_segment([Run(0, 5), Run(10, 15)], cfg) == Run(0, 5)

    def test_below_threshold_rejected(self):
        cfg = SmoothingConfig(min_segment_tokens=6)
        assert select_segment([Run(0, 4)], cfg) is None

    def test_empty_runs(self):
        assert select_segment([], SmoothingConfig()) is None


class TestAnnotateDocument:
    def test_no_alignment_all_negative(self):
        doc = Document.from_tokens("d", [["a", "b", "c"], ["d", "e"]])
        annotations = annotate_document(doc, AlignedWordSet("d", frozenset()), SmoothingConfig())
        assert [a.label for a in annotations] == [0, 0]
        assert all(a.segment is None for a in annotations)

    def test_crash_sentence_with_boundary_extension(self, crash_sentence, crash_aligned):
        doc = Document.from_tokens("crash", [crash_sentence])
        aligned = AlignedWordSet("crash", crash_aligned)
        cfg = SmoothingConfig(gap_threshold=5, min_segment_tokens=6, extend_to_boundary=True)
        filled = fill_gaps(set(crash_aligned), len(crash_sentence), cfg)
        assert [(r.start, r.end) for r in runs(filled)] == CRASH_RUNS_EXTENDED
        assert [r.length for r in runs(filled)] == [8, 22]
        annotation = annotate_document(doc, aligned, cfg)[0]
        assert annotation.label == 1
        assert (annotation.segment.start, annotation.segment.end) == (14, 35)
        assert annotation.segment.length == 22
        # The segment reaches from "crash" to the final period.
        assert crash_sentence[annotation.segment.start] == "crash"
        assert crash_sentence[annotation.segment.end] == "."

    def test_crash_sentence_without_boundary_extension(self, crash_sentence, crash_aligned):
        doc = Document.from_tokens("crash", [crash_sentence])
        aligned = AlignedWordSet("crash", crash_aligned)
        cfg = SmoothingConfig(gap_threshold=5, min_segment_tokens=6, extend_to_boundary=False)
        filled = fill_gaps(set(crash_aligned), len(crash_sentence), cfg)
        assert [(r.start, r.end) for r in runs(filled)] == CRASH_RUNS_PLAIN
        assert [r.length for r in runs(filled)] == [8, 18]
        annotation = annotate_document(doc, aligned, cfg)[0]
        assert (annotation.segment.start, annotation.segment.end) == (14, 31)
        assert crash_sentence[annotation.segment.end] == "on"

    def test_never_crosses_sentence_boundary(self):
        # Adjacent flat indices in different sentences must not bridge.
        doc = Document.from_tokens(
            "d", [["a", "b", "c", "d", "e", "f", "g"], ["h", "i", "j", "k", "l", "m", "n"]]
        )
        aligned = AlignedWordSet("d", frozenset({0, 4, 6, 7, 9, 13}))
        cfg = SmoothingConfig(gap_threshold=5, min_segment_tokens=7, extend_to_boundary=False)
        annotations = annotate_document(doc, aligned, cfg)
        for annotation in annotations:
            assert annotation.label == 1
            segment = annotation.segment
            assert 0 <= segment.start <= segment.end < 7

    def test_determinism(self, crash_sentence, crash_aligned):
        doc = Document.from_tokens("crash", [crash_sentence])
        aligned = AlignedWordSet("crash", crash_aligned)
        cfg = SmoothingConfig()
        assert annotate_document(doc, aligned, cfg) == annotate_document(doc, aligned, cfg)

    def test_pipeline_matches_oracle_on_random_sentences(self):
        rng = random.Random(37)
        for _ in range(1000):
            length = rng.randrange(1, 41)
            selected = set(rng.sample(range(length), rng.randrange(0, length + 1)))
            cfg = SmoothingConfig(
                gap_threshold=rng.randrange(1, 9),
                min_segment_tokens=rng.randrange(1, 9),
                extend_to_boundary=rng.random() < 0.5,
            )
            got = select_segment(runs(fill_gaps(selected, length, cfg)), cfg)
            expected = oracle_annotate_sentence(selected, length, cfg)
            assert (None if got is None else (got.start, got.end)) == expected


class TestAnnotationIO:
    def test_round_trip(self, tmp_path):
        annotations = [
            SentenceAnnotation("d1", 0, 1, Run(2, 9)),
            SentenceAnnotation("d1", 1, 0),
            SentenceAnnotation("d2", 0, 0),
        ]
        path = tmp_path / "labels.jsonl"
        save_annotations(annotations, path)
        assert load_annotations(path) == annotations

    def test_label_segment_consistency_enforced(self, tmp_path):
        path = tmp_path / "labels.jsonl"
        path.write_text('{"doc_id": "d", "sentence_index": 0, "label": 1, "start": null, "end": null}\n')
        with pytest.raises(AnnotationError):
            load_annotations(path)

    def test_half_null_span_rejected(self, tmp_path):
        path = tmp_path / "labels.jsonl"
        path.write_text('{"doc_id": "d", "sentence_index": 0, "label": 1, "start": 2, "end": null}\n')
        with pytest.raises(AnnotationError) as err:
            load_annotations(path)
        assert "line 1" in str(err.value)

    def test_config_validation(self):
        with pytest.raises(AnnotationError):
            SmoothingConfig(gap_threshold=-1)
        with pytest.raises(AnnotationError):
            SmoothingConfig(min_segment_tokens=0)
