"""Attention-based word alignment between an abstract and its document.

An external sequence-to-sequence model supplies, for every abstract token,
a distribution of attention over the flattened document tokens.  The
alignment rule is deliberately simple: each abstract token aligns to the
single document token receiving the most attention, and the union of those
argmax indices is the set of document words that carry abstract content.

Ties in a row break toward the lowest flat index (the external pipeline's
own tie behavior is unknowable from the matrix alone, so the toolkit fixes
a deterministic convention).

Threshold-based multi-word alignment (aligning every document token whose
attention exceeds a cutoff) is intentionally not provided; it would make
the alignment data- and model-dependent.  ``token_alignments`` is the hook
point a variant implementation would replace.

File format (attention JSONL), one object per line::

    {"doc_id": str, "weights": [[float, ...], ...]}

with row-major N x M layout: N abstract tokens, M flat document tokens.
Dense only.
"""

from dataclasses import dataclass
from typing import FrozenSet, Iterable, List, Sequence

import numpy as np

from ._jsonl import read_records, require_fields, write_records
from .corpus import Document
from .errors import AlignmentError

__all__ = [
    "ROW_SUM_TOLERANCE",
    "AttentionMatrix",
    "AlignedWordSet",
    "row_argmax",
    "token_alignments",
    "align_argmax",
    "load_attention",
    "save_attention",
]

# Matrices arrive from external float32 pipelines; their rows rarely sum to
# 1 more tightly than this.
ROW_SUM_TOLERANCE = 1e-4


@dataclass(frozen=True)
class AttentionMatrix:
    """Abstract-by-document attention weights for one document.

    ``weights[t, i]`` is the attention paid to flat document token ``i``
    while generating abstract token ``t``.
    """

    doc_id: str
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.size == 0:
            weights = weights.reshape(0, 0)
        if weights.ndim != 2:
            raise AlignmentError(
                f"attention for {self.doc_id!r}: expected a 2-D matrix, "
                f"got shape {weights.shape}"
            )
        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    @property
    def num_abstract_tokens(self) -> int:
        return self.weights.shape[0]

    @property
    def num_doc_tokens(self) -> int:
        return self.weights.shape[1]

    def validate(self) -> None:
        """Check non-negativity and per-row normalization.

        Raises :class:`AlignmentError` naming the first offending row.
        """
        for t, row in enumerate(self.weights):
            if row.size and np.min(row) < 0:
                raise AlignmentError(
                    f"attention for {self.doc_id!r}: negative weight in row {t}"
                )
            total = float(np.sum(row))
            if abs(total - 1.0) > ROW_SUM_TOLERANCE:
                raise AlignmentError(
                    f"attention for {self.doc_id!r}: row {t} sums to {total:.6f}, "
                    f"expected 1 within {ROW_SUM_TOLERANCE}"
                )

    def check_against(self, doc: Document) -> None:
        """Verify the matrix shape matches the referenced document."""
        if self.doc_id != doc.doc_id:
            raise AlignmentError(
                f"attention doc_id {self.doc_id!r} does not match document "
                f"{doc.doc_id!r}"
            )
        if self.num_abstract_tokens != doc.abstract_len:
            raise AlignmentError(
                f"attention for {self.doc_id!r}: {self.num_abstract_tokens} rows "
                f"but the abstract has {doc.abstract_len} tokens"
            )
        if self.num_abstract_tokens and self.num_doc_tokens != doc.num_tokens:
            raise AlignmentError(
                f"attention for {self.doc_id!r}: {self.num_doc_tokens} columns "
                f"but the document has {doc.num_tokens} tokens"
            )


@dataclass(frozen=True)
class AlignedWordSet:
    """Deduplicated flat indices of document words aligned to the abstract."""

    doc_id: str
    indices: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, "indices", frozenset(int(i) for i in self.indices))
        for index in self.indices:
            if index < 0:
                raise AlignmentError(
                    f"aligned set for {self.doc_id!r}: negative index {index}"
                )


def row_argmax(row: Sequence[float]) -> int:
    """Index of the largest value in one attention row; lowest index on ties."""
    values = np.asarray(row, dtype=np.float64)
    if values.ndim != 1 or values.size == 0:
        raise AlignmentError("row_argmax requires a non-empty 1-D row")
    return int(np.argmax(values))


def token_alignments(attn: AttentionMatrix) -> List[int]:
    """Per-abstract-token argmax: element t is the document token aligned to
    abstract token t.  Preserves multiplicity (no deduplication)."""
    attn.validate()
    if attn.num_abstract_tokens == 0:
        return []
    return [int(i) for i in np.argmax(attn.weights, axis=1)]


def align_argmax(attn: AttentionMatrix) -> AlignedWordSet:
    """Aligned word set per the argmax rule; size is at most N."""
    return AlignedWordSet(doc_id=attn.doc_id, indices=frozenset(token_alignments(attn)))


def load_attention(path) -> List[AttentionMatrix]:
    """Load attention JSONL.  Rows are validated lazily (at alignment time)."""
    matrices = []
    for line_number, obj in read_records(path):
        require_fields(obj, ("doc_id", "weights"), path, line_number)
        rows = obj["weights"]
        if rows and len({len(r) for r in rows}) != 1:
            raise AlignmentError(
                f"{path}: line {line_number}: ragged weight rows"
            )
        matrices.append(AttentionMatrix(doc_id=obj["doc_id"], weights=np.array(rows, dtype=np.float64)))
    return matrices


def save_attention(matrices: Iterable[AttentionMatrix], path) -> None:
    write_records(
        path,
        (
            {"doc_id": m.doc_id, "weights": m.weights.tolist()}
            for m in matrices
        ),
    )
