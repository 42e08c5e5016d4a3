"""Smooth aligned words into gold sentence labels and one segment each.

Alignment produces isolated document words.  Smoothing turns those words
into usable sub-sentence highlights, one sentence at a time:

1. bridge small gaps: any two selected words in the same sentence with
   strictly fewer than ``gap_threshold`` unselected tokens between them
   pull in all the tokens between;
2. take the maximal consecutive runs of the filled selection;
3. keep the longest run (earliest on ties) as the sentence's segment, but
   only if it is at least ``min_segment_tokens`` long.  A sentence is
   labelled 1 exactly when it keeps a segment.

Gap sizes count every token, punctuation included.  Filling never crosses
a sentence boundary.  ``extend_to_boundary`` additionally bridges a short
stretch between the first/last selected word and the sentence edge; it is
off by default (the rule as written connects two selected *words*), but
some reference annotations are only reproducible with it on, so both
behaviors are supported and tested.

Exactly one segment is kept per sentence; secondary runs are discarded
even when they clear the length threshold.  A sentence shorter than
``min_segment_tokens`` can never be positive.

File format (annotation JSONL), one object per sentence instance::

    {"doc_id": str, "sentence_index": int, "label": 0|1,
     "start": int|null, "end": int|null}

``start``/``end`` are sentence-local, inclusive, and null iff label = 0.
"""

from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Set

from ._jsonl import read_records, require_fields, write_records
from .alignment import AlignedWordSet
from .corpus import Document, locate
from .errors import AnnotationError

__all__ = [
    "SmoothingConfig",
    "Run",
    "SentenceAnnotation",
    "per_sentence_selection",
    "fill_gaps",
    "runs",
    "select_segment",
    "annotate_document",
    "load_annotations",
    "save_annotations",
]


@dataclass(frozen=True)
class SmoothingConfig:
    """Thresholds for gap filling and segment selection.

    ``gap_threshold``: bridge two selected words iff strictly fewer than
    this many tokens sit between them (default 5, i.e. gaps of 4 or less).

    ``min_segment_tokens``: a run qualifies as a segment only with at least
    this many tokens (default 6, i.e. strictly more than 5).
    """

    gap_threshold: int = 5
    min_segment_tokens: int = 6
    extend_to_boundary: bool = False

    def __post_init__(self):
        if self.gap_threshold < 0:
            raise AnnotationError(f"gap_threshold must be >= 0, got {self.gap_threshold}")
        if self.min_segment_tokens < 1:
            raise AnnotationError(
                f"min_segment_tokens must be >= 1, got {self.min_segment_tokens}"
            )


@dataclass(frozen=True)
class Run:
    """A maximal consecutive block of selected tokens, inclusive on both ends."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise AnnotationError(f"invalid run ({self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class SentenceAnnotation:
    """Gold or predicted highlight for one sentence.

    Invariant: ``label == 1`` exactly when a segment is present.  The
    minimum-length rule is a property of the smoothing pipeline, not of
    this container: model predictions may carry shorter segments.
    """

    doc_id: str
    sentence_index: int
    label: int
    segment: Optional[Run] = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise AnnotationError(f"label must be 0 or 1, got {self.label}")
        if (self.label == 1) != (self.segment is not None):
            raise AnnotationError(
                f"{self.doc_id!r} sentence {self.sentence_index}: label {self.label} "
                f"inconsistent with segment {self.segment}"
            )
        if self.sentence_index < 0:
            raise AnnotationError(f"negative sentence index {self.sentence_index}")


def per_sentence_selection(aligned: AlignedWordSet, doc: Document) -> Dict[int, Set[int]]:
    """Convert flat aligned indices into per-sentence local index sets.

    Sentences with no aligned word are absent from the result.  The union
    of all local sets, mapped back to flat indices, equals the input.
    """
    if aligned.doc_id != doc.doc_id:
        raise AnnotationError(
            f"aligned set {aligned.doc_id!r} does not match document {doc.doc_id!r}"
        )
    selected: Dict[int, Set[int]] = {}
    for flat in aligned.indices:
        if flat >= doc.num_tokens:
            raise AnnotationError(
                f"document {doc.doc_id!r}: aligned index {flat} out of range "
                f"[0, {doc.num_tokens})"
            )
        loc = locate(doc, flat)
        selected.setdefault(loc.sentence_index, set()).add(loc.local_index)
    return selected


def fill_gaps(selected: Set[int], sentence_len: int, cfg: SmoothingConfig) -> Set[int]:
    """Bridge small gaps between selected tokens within one sentence.

    Monotone (output is a superset of input) and idempotent.  With
    ``extend_to_boundary`` set, a short stretch between the outermost
    selected tokens and the sentence edges is bridged as well.
    """
    for index in selected:
        if not 0 <= index < sentence_len:
            raise AnnotationError(
                f"selected index {index} out of range for sentence of "
                f"length {sentence_len}"
            )
    if not selected:
        return set()
    filled = set(selected)
    ordered = sorted(selected)
    for left, right in zip(ordered, ordered[1:]):
        gap = right - left - 1
        if 0 < gap < cfg.gap_threshold:
            filled.update(range(left + 1, right))
    if cfg.extend_to_boundary:
        first, last = ordered[0], ordered[-1]
        if 0 < first < cfg.gap_threshold:
            filled.update(range(first))
        tail_gap = sentence_len - 1 - last
        if 0 < tail_gap < cfg.gap_threshold:
            filled.update(range(last + 1, sentence_len))
    return filled


def runs(selected: Set[int]) -> List[Run]:
    """Maximal consecutive runs of the selected set, in increasing start order."""
    ordered = sorted(selected)
    result: List[Run] = []
    for index in ordered:
        if result and index == result[-1].end + 1:
            result[-1] = Run(result[-1].start, index)
        else:
            result.append(Run(index, index))
    return result


def select_segment(candidate_runs: List[Run], cfg: SmoothingConfig) -> Optional[Run]:
    """Longest run, earliest start on ties; None unless it clears the
    minimum length."""
    best: Optional[Run] = None
    for run in candidate_runs:
        if best is None or run.length > best.length:
            best = run
    if best is None or best.length < cfg.min_segment_tokens:
        return None
    return best


def annotate_document(
    doc: Document, aligned: AlignedWordSet, cfg: SmoothingConfig
) -> List[SentenceAnnotation]:
    """Gold annotations for every sentence of one document, in order."""
    selection = per_sentence_selection(aligned, doc)
    annotations = []
    for sentence in doc.sentences:
        local = selection.get(sentence.position, set())
        filled = fill_gaps(local, len(sentence), cfg)
        segment = select_segment(runs(filled), cfg)
        annotations.append(
            SentenceAnnotation(
                doc_id=doc.doc_id,
                sentence_index=sentence.position,
                label=1 if segment is not None else 0,
                segment=segment,
            )
        )
    return annotations


def load_annotations(path) -> List[SentenceAnnotation]:
    annotations = []
    for line_number, obj in read_records(path):
        require_fields(
            obj, ("doc_id", "sentence_index", "label", "start", "end"), path, line_number
        )
        segment = None
        if obj["start"] is not None or obj["end"] is not None:
            if obj["start"] is None or obj["end"] is None:
                raise AnnotationError(
                    f"{path}: line {line_number}: start and end must both be "
                    f"present or both null"
                )
            segment = Run(int(obj["start"]), int(obj["end"]))
        try:
            annotations.append(
                SentenceAnnotation(
                    doc_id=obj["doc_id"],
                    sentence_index=int(obj["sentence_index"]),
                    label=int(obj["label"]),
                    segment=segment,
                )
            )
        except AnnotationError as exc:
            raise AnnotationError(f"{path}: line {line_number}: {exc}") from exc
    return annotations


def save_annotations(annotations: Iterable[SentenceAnnotation], path) -> None:
    write_records(
        path,
        (
            {
                "doc_id": ann.doc_id,
                "sentence_index": ann.sentence_index,
                "label": ann.label,
                "start": ann.segment.start if ann.segment else None,
                "end": ann.segment.end if ann.segment else None,
            }
            for ann in annotations
        ),
    )
