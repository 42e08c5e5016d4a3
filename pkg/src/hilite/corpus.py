"""Pre-tokenized documents, their abstracts, and flat-index bookkeeping.

Documents arrive pre-tokenized and pre-sentence-split (CNN/DM style:
lowercased, with tokens such as ``-lrb-``); this module performs no
tokenization of its own and compares tokens by exact string equality.

The one non-trivial service provided here is the bijection between a
document's flat token index (the coordinate system of attention matrices)
and ``(sentence_index, local_index)`` pairs (the coordinate system of
per-sentence annotations).

File format (document JSONL), one object per line::

    {"doc_id": str, "sentences": [[str, ...], ...], "abstract": [str, ...]}

``abstract`` may be an empty list: such documents are usable for inference
but cannot be gold-annotated.
"""

from bisect import bisect_right
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from ._jsonl import read_records, require_fields, write_records
from .errors import CorpusError

__all__ = [
    "Sentence",
    "Document",
    "TokenLocation",
    "flatten",
    "locate",
    "flat_index",
    "load_corpus",
    "save_corpus",
    "index_by_doc_id",
]


@dataclass(frozen=True)
class Sentence:
    """One tokenized sentence and its 0-based position within the document."""

    tokens: Tuple[str, ...]
    position: int

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if not self.tokens:
            raise CorpusError(f"sentence {self.position}: empty sentence")
        for token in self.tokens:
            if not isinstance(token, str) or not token:
                raise CorpusError(
                    f"sentence {self.position}: tokens must be non-empty strings, "
                    f"got {token!r}"
                )
        if self.position < 0:
            raise CorpusError(f"negative sentence position {self.position}")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Document:
    """A tokenized document plus its (possibly empty) reference abstract."""

    doc_id: str
    sentences: Tuple[Sentence, ...]
    abstract_tokens: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        object.__setattr__(self, "abstract_tokens", tuple(self.abstract_tokens))
        if not isinstance(self.doc_id, str) or not self.doc_id:
            raise CorpusError(f"doc_id must be a non-empty string, got {self.doc_id!r}")
        if not self.sentences:
            raise CorpusError(f"document {self.doc_id!r}: no sentences")
        for rank, sentence in enumerate(self.sentences):
            if sentence.position != rank:
                raise CorpusError(
                    f"document {self.doc_id!r}: sentence at rank {rank} carries "
                    f"position {sentence.position}"
                )
        for token in self.abstract_tokens:
            if not isinstance(token, str) or not token:
                raise CorpusError(
                    f"document {self.doc_id!r}: abstract tokens must be non-empty "
                    f"strings, got {token!r}"
                )

    @property
    def num_tokens(self) -> int:
        """Flattened document length (sum of sentence lengths)."""
        return sum(len(s) for s in self.sentences)

    @property
    def abstract_len(self) -> int:
        return len(self.abstract_tokens)

    def sentence_lengths(self) -> List[int]:
        return [len(s) for s in self.sentences]

    @staticmethod
    def from_tokens(
        doc_id: str,
        sentences: Iterable[Sequence[str]],
        abstract: Sequence[str] = (),
    ) -> "Document":
        """Build a Document from raw token lists, assigning positions by rank."""
        built = tuple(
            Sentence(tokens=tuple(tokens), position=rank)
            for rank, tokens in enumerate(sentences)
        )
        return Document(doc_id=doc_id, sentences=built, abstract_tokens=tuple(abstract))


@dataclass(frozen=True)
class TokenLocation:
    """One document token in both coordinate systems at once."""

    flat_index: int
    sentence_index: int
    local_index: int


def _offsets(doc: Document) -> List[int]:
    """Cumulative sentence offsets; offsets[i] = flat index of sentence i's first token."""
    offsets = [0]
    for sentence in doc.sentences:
        offsets.append(offsets[-1] + len(sentence))
    return offsets


def flatten(doc: Document) -> List[TokenLocation]:
    """Enumerate every token location in flat order.

    The result has exactly ``doc.num_tokens`` entries, flat indices strictly
    increasing from 0, and ``(sentence_index, local_index)`` pairs in
    lexicographic order.
    """
    locations = []
    flat = 0
    for sentence in doc.sentences:
        for local in range(len(sentence)):
            locations.append(TokenLocation(flat, sentence.position, local))
            flat += 1
    return locations


def locate(doc: Document, flat: int) -> TokenLocation:
    """Invert a flat token index to its (sentence, local) coordinates."""
    if not 0 <= flat < doc.num_tokens:
        raise CorpusError(
            f"document {doc.doc_id!r}: flat index {flat} out of range "
            f"[0, {doc.num_tokens})"
        )
    offsets = _offsets(doc)
    sentence_index = bisect_right(offsets, flat) - 1
    return TokenLocation(flat, sentence_index, flat - offsets[sentence_index])


def flat_index(doc: Document, sentence_index: int, local_index: int) -> int:
    """Map (sentence, local) coordinates back to the flat token index."""
    if not 0 <= sentence_index < len(doc.sentences):
        raise CorpusError(
            f"document {doc.doc_id!r}: sentence index {sentence_index} out of range"
        )
    sentence = doc.sentences[sentence_index]
    if not 0 <= local_index < len(sentence):
        raise CorpusError(
            f"document {doc.doc_id!r}: local index {local_index} out of range for "
            f"sentence {sentence_index} of length {len(sentence)}"
        )
    return _offsets(doc)[sentence_index] + local_index


def load_corpus(path) -> List[Document]:
    """Load and validate a document JSONL file, preserving file order.

    Raises :class:`CorpusError` (with the offending line number) on the first
    malformed document, duplicate ``doc_id``, or empty sentence.
    """
    documents: List[Document] = []
    seen: Dict[str, int] = {}
    for line_number, obj in read_records(path):
        require_fields(obj, ("doc_id", "sentences", "abstract"), path, line_number)
        try:
            doc = Document.from_tokens(obj["doc_id"], obj["sentences"], obj["abstract"])
        except (CorpusError, TypeError) as exc:
            raise CorpusError(f"{path}: line {line_number}: rejected document: {exc}") from exc
        if doc.doc_id in seen:
            raise CorpusError(
                f"{path}: line {line_number}: duplicate doc_id {doc.doc_id!r} "
                f"(first seen on line {seen[doc.doc_id]})"
            )
        seen[doc.doc_id] = line_number
        documents.append(doc)
    return documents


def save_corpus(documents: Iterable[Document], path) -> None:
    """Write documents as JSONL; exact inverse of :func:`load_corpus`."""
    write_records(
        path,
        (
            {
                "doc_id": doc.doc_id,
                "sentences": [list(s.tokens) for s in doc.sentences],
                "abstract": list(doc.abstract_tokens),
            }
            for doc in documents
        ),
    )


def index_by_doc_id(documents: Iterable[Document]) -> Dict[str, Document]:
    index: Dict[str, Document] = {}
    for doc in documents:
        if doc.doc_id in index:
            raise CorpusError(f"duplicate doc_id {doc.doc_id!r}")
        index[doc.doc_id] = doc
    return index
