"""Corpus-level orchestration: oracle summaries, statistics, macro-averaged
ROUGE, coverage analysis, prediction re-assembly, and highlight rendering.

Summaries are always verbatim ordered slices of their source documents:
positive sentences in document order (sentence unit) or gold/predicted
segments in document order (segment unit).  Model output arrives as
per-sentence annotations and is re-combined by document id.

File format (summary JSONL), one object per line::

    {"doc_id": str, "tokens": [str, ...]}
"""

import html
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

from ._jsonl import read_records, require_fields, write_records
from .corpus import Document, locate
from .errors import EvaluationError
from .rouge import METRICS, RougeScore, score
from .smoothing import SentenceAnnotation

__all__ = [
    "SENTENCE_UNIT",
    "SEGMENT_UNIT",
    "CorpusStats",
    "SummaryRecord",
    "build_oracle",
    "corpus_stats",
    "abstract_coverage",
    "evaluate",
    "assemble_predictions",
    "render_highlights",
    "load_summaries",
    "save_summaries",
]

SENTENCE_UNIT = "sentence"
SEGMENT_UNIT = "segment"
_UNITS = (SENTENCE_UNIT, SEGMENT_UNIT)

# Tokens that close an abstract sentence; abstracts arrive as flat token
# lists, so sentence counts are terminator-based by necessity.
_SENTENCE_TERMINATORS = frozenset({".", "!", "?"})


@dataclass(frozen=True)
class CorpusStats:
    """Aggregate statistics over a fully annotated corpus.

    ``compression_rate`` is the fraction of a positive sentence covered by
    its segment, macro-averaged over positive sentences (not token-
    weighted).  Gold sentence/token means are per document.
    """

    total_sentences: int
    pos_sentence_rate: float
    mean_gold_sents_per_doc: float
    mean_gold_tokens_per_doc: float
    compression_rate: float
    mean_abstract_sents_per_doc: float
    mean_abstract_tokens_per_doc: float


@dataclass(frozen=True)
class SummaryRecord:
    """One document's summary: tokens drawn verbatim, in original order."""

    doc_id: str
    tokens: Tuple[str, ...]
    unit: str

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if self.unit not in _UNITS:
            raise EvaluationError(f"unknown summary unit {self.unit!r}")


def _annotation_index(
    annotations: Iterable[SentenceAnnotation],
) -> Dict[str, Dict[int, SentenceAnnotation]]:
    index: Dict[str, Dict[int, SentenceAnnotation]] = {}
    for ann in annotations:
        per_doc = index.setdefault(ann.doc_id, {})
        if ann.sentence_index in per_doc:
            raise EvaluationError(
                f"duplicate annotation for {ann.doc_id!r} sentence "
                f"{ann.sentence_index}"
            )
        per_doc[ann.sentence_index] = ann
    return index


def _full_coverage(doc: Document, index) -> Dict[int, SentenceAnnotation]:
    per_doc = index.get(doc.doc_id)
    if per_doc is None:
        raise EvaluationError(f"no annotations for document {doc.doc_id!r}")
    for sentence in doc.sentences:
        if sentence.position not in per_doc:
            raise EvaluationError(
                f"document {doc.doc_id!r}: missing annotation for sentence "
                f"{sentence.position}"
            )
    return per_doc


def _check_segment_bounds(doc: Document, ann: SentenceAnnotation) -> None:
    if ann.segment is None:
        return
    sentence = doc.sentences[ann.sentence_index]
    if ann.segment.end >= len(sentence):
        raise EvaluationError(
            f"document {doc.doc_id!r} sentence {ann.sentence_index}: segment "
            f"{(ann.segment.start, ann.segment.end)} exceeds sentence length "
            f"{len(sentence)}"
        )


def _materialize(doc: Document, anns: Sequence[SentenceAnnotation], unit: str) -> Tuple[str, ...]:
    tokens: List[str] = []
    for ann in sorted(anns, key=lambda a: a.sentence_index):
        if ann.label != 1:
            continue
        sentence = doc.sentences[ann.sentence_index]
        if unit == SENTENCE_UNIT:
            tokens.extend(sentence.tokens)
        else:
            _check_segment_bounds(doc, ann)
            tokens.extend(sentence.tokens[ann.segment.start : ann.segment.end + 1])
    return tuple(tokens)


def build_oracle(
    docs: Sequence[Document],
    annotations: Iterable[SentenceAnnotation],
    unit: str,
) -> List[SummaryRecord]:
    """Gold summaries, one per document, in document order.

    Requires full annotation coverage of every document.
    """
    if unit not in _UNITS:
        raise EvaluationError(f"unknown summary unit {unit!r}")
    index = _annotation_index(annotations)
    records = []
    for doc in docs:
        per_doc = _full_coverage(doc, index)
        records.append(
            SummaryRecord(
                doc_id=doc.doc_id,
                tokens=_materialize(doc, list(per_doc.values()), unit),
                unit=unit,
            )
        )
    return records


def _abstract_sentence_count(abstract: Sequence[str]) -> int:
    """Terminator-delimited chunks with at least one token."""
    count = 0
    open_chunk = False
    for token in abstract:
        open_chunk = True
        if token in _SENTENCE_TERMINATORS:
            count += 1
            open_chunk = False
    if open_chunk:
        count += 1
    return count


def corpus_stats(
    docs: Sequence[Document], annotations: Iterable[SentenceAnnotation]
) -> CorpusStats:
    """Aggregate label/segment/abstract statistics; needs full coverage."""
    if not docs:
        raise EvaluationError("empty corpus")
    index = _annotation_index(annotations)
    total_sentences = 0
    total_positive = 0
    gold_sents_per_doc = []
    gold_tokens_per_doc = []
    coverage_ratios = []
    abstract_sents = []
    abstract_tokens = []
    for doc in docs:
        per_doc = _full_coverage(doc, index)
        positive = 0
        gold_tokens = 0
        for sentence in doc.sentences:
            ann = per_doc[sentence.position]
            total_sentences += 1
            if ann.label == 1:
                _check_segment_bounds(doc, ann)
                positive += 1
                gold_tokens += ann.segment.length
                coverage_ratios.append(ann.segment.length / len(sentence))
        total_positive += positive
        gold_sents_per_doc.append(positive)
        gold_tokens_per_doc.append(gold_tokens)
        abstract_sents.append(_abstract_sentence_count(doc.abstract_tokens))
        abstract_tokens.append(doc.abstract_len)

    def mean(values):
        return sum(values) / len(values) if values else 0.0

    return CorpusStats(
        total_sentences=total_sentences,
        pos_sentence_rate=total_positive / total_sentences,
        mean_gold_sents_per_doc=mean(gold_sents_per_doc),
        mean_gold_tokens_per_doc=mean(gold_tokens_per_doc),
        compression_rate=mean(coverage_ratios),
        mean_abstract_sents_per_doc=mean(abstract_sents),
        mean_abstract_tokens_per_doc=mean(abstract_tokens),
    )


def abstract_coverage(
    doc: Document,
    token_alignment: Sequence[int],
    annotations: Iterable[SentenceAnnotation],
    unit: str,
) -> float:
    """Fraction of abstract tokens whose aligned document token falls in a
    positive sentence (sentence unit) or inside a gold segment (segment
    unit).

    ``token_alignment`` carries one flat document index per abstract token
    (see :func:`hilite.alignment.token_alignments`); multiplicity matters,
    so the deduplicated aligned set is not enough here.  This is an
    alignment-membership proxy for the "covered" criterion, not a ROUGE
    recall.
    """
    if unit not in _UNITS:
        raise EvaluationError(f"unknown summary unit {unit!r}")
    index = _annotation_index(annotations)
    per_doc = _full_coverage(doc, index)
    if len(token_alignment) != doc.abstract_len:
        raise EvaluationError(
            f"document {doc.doc_id!r}: {len(token_alignment)} alignments for "
            f"{doc.abstract_len} abstract tokens"
        )
    if not token_alignment:
        return 0.0
    covered = 0
    for flat in token_alignment:
        loc = locate(doc, flat)
        ann = per_doc[loc.sentence_index]
        if ann.label != 1:
            continue
        if unit == SENTENCE_UNIT:
            covered += 1
        else:
            _check_segment_bounds(doc, ann)
            if ann.segment.start <= loc.local_index <= ann.segment.end:
                covered += 1
    return covered / len(token_alignment)


def evaluate(
    summaries: Mapping[str, Sequence[str]],
    references: Mapping[str, Sequence[str]],
    metrics: Sequence[str] = METRICS,
) -> Dict[str, RougeScore]:
    """Macro-averaged ROUGE: per-document scores averaged arithmetically,
    component by component.  Documents with empty summaries score 0 and
    still count.  Key sets must match exactly."""
    missing = set(references) - set(summaries)
    extra = set(summaries) - set(references)
    if missing or extra:
        detail = []
        if missing:
            detail.append(f"missing from summaries: {sorted(missing)[:5]}")
        if extra:
            detail.append(f"unknown to references: {sorted(extra)[:5]}")
        raise EvaluationError("summary/reference doc_id mismatch; " + "; ".join(detail))
    if not summaries:
        raise EvaluationError("nothing to evaluate")
    doc_ids = sorted(summaries)
    results: Dict[str, RougeScore] = {}
    for metric in metrics:
        per_doc = [
            score(list(summaries[doc_id]), list(references[doc_id]), metric)
            for doc_id in doc_ids
        ]
        n = len(per_doc)
        results[metric] = RougeScore(
            precision=sum(s.precision for s in per_doc) / n,
            recall=sum(s.recall for s in per_doc) / n,
            f1=sum(s.f1 for s in per_doc) / n,
        )
    return results


def assemble_predictions(
    predictions: Iterable[SentenceAnnotation],
    docs: Sequence[Document],
    unit: str,
) -> List[SummaryRecord]:
    """Re-combine per-sentence predictions into per-document summaries.

    One record per document (empty when nothing was predicted positive);
    predictions may arrive in any order and need not cover every sentence,
    but every doc_id/sentence_index must resolve.
    """
    if unit not in _UNITS:
        raise EvaluationError(f"unknown summary unit {unit!r}")
    by_doc = {doc.doc_id: doc for doc in docs}
    grouped: Dict[str, List[SentenceAnnotation]] = {doc.doc_id: [] for doc in docs}
    for ann in predictions:
        doc = by_doc.get(ann.doc_id)
        if doc is None:
            raise EvaluationError(f"prediction for unknown document {ann.doc_id!r}")
        if ann.sentence_index >= len(doc.sentences):
            raise EvaluationError(
                f"prediction for {ann.doc_id!r} names sentence "
                f"{ann.sentence_index}, but the document has "
                f"{len(doc.sentences)} sentences"
            )
        grouped[ann.doc_id].append(ann)
    return [
        SummaryRecord(
            doc_id=doc.doc_id,
            tokens=_materialize(doc, grouped[doc.doc_id], unit),
            unit=unit,
        )
        for doc in docs
    ]


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_PAGE_TEMPLATE = """<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{doc_id}</title>
<style>
body {{ font-family: Georgia, serif; max-width: 48rem; margin: 2rem auto; line-height: 1.7; }}
.sent {{ padding: 0 0.1rem; }}
.sent.positive {{ background: #fdf3d0; }}
mark.segment {{ background: #f7c948; padding: 0 0.1rem; }}
</style>
</head>
<body>
<article class="doc" data-doc-id="{doc_id}">
{body}
</article>
</body>
</html>
"""


def render_highlights(doc: Document, annotations: Sequence[SentenceAnnotation]) -> str:
    """Static HTML overlay: the whole document, one sentence per line,
    positive sentences carrying class ``positive`` and segment tokens
    wrapped in ``<mark class="segment">``.  The markup is a stable format;
    byte-identical for identical inputs."""
    index = _annotation_index(annotations)
    per_doc = _full_coverage(doc, index)
    lines = []
    for sentence in doc.sentences:
        ann = per_doc[sentence.position]
        escaped = [html.escape(t) for t in sentence.tokens]
        if ann.label == 1:
            _check_segment_bounds(doc, ann)
            start, end = ann.segment.start, ann.segment.end
            before = " ".join(escaped[:start])
            inside = " ".join(escaped[start : end + 1])
            after = " ".join(escaped[end + 1 :])
            parts = []
            if before:
                parts.append(before + " ")
            parts.append(f'<mark class="segment">{inside}</mark>')
            if after:
                parts.append(" " + after)
            text = "".join(parts)
            css = "sent positive"
        else:
            text = " ".join(escaped)
            css = "sent"
        lines.append(
            f'<span class="{css}" data-sentence="{sentence.position}">{text}</span>'
        )
    return _PAGE_TEMPLATE.format(doc_id=html.escape(doc.doc_id), body="\n".join(lines))


# ---------------------------------------------------------------------------
# Summary files
# ---------------------------------------------------------------------------


def load_summaries(path) -> Dict[str, Tuple[str, ...]]:
    summaries: Dict[str, Tuple[str, ...]] = {}
    for line_number, obj in read_records(path):
        require_fields(obj, ("doc_id", "tokens"), path, line_number)
        if obj["doc_id"] in summaries:
            raise EvaluationError(
                f"{path}: line {line_number}: duplicate summary for "
                f"{obj['doc_id']!r}"
            )
        summaries[obj["doc_id"]] = tuple(obj["tokens"])
    return summaries


def save_summaries(records: Iterable[SummaryRecord], path) -> None:
    write_records(
        path,
        ({"doc_id": r.doc_id, "tokens": list(r.tokens)} for r in records),
    )
