"""hilite: sub-sentence summary highlights.

Derives gold-standard highlight annotations (a binary label per sentence
plus one start/end segment per positive sentence) from document/abstract
pairs and the attention matrices of an external sequence-to-sequence
model; trains and runs a desk-scale joint sentence-and-span extractor; and
evaluates highlights with ROUGE against abstracts and gold segments.

Modules:

* :mod:`hilite.corpus`     documents, abstracts, flat-index bookkeeping
* :mod:`hilite.alignment`  attention argmax word alignment
* :mod:`hilite.smoothing`  gap filling, run selection, gold labels
* :mod:`hilite.rouge`      ROUGE-1/2/L precision, recall, F1
* :mod:`hilite.extractor`  the joint sentence/span model
* :mod:`hilite.harness`    corpus-level orchestration and evaluation
* :mod:`hilite.cli`        the ``hilite`` command
"""

from . import alignment, corpus, extractor, harness, rouge, smoothing
from .errors import (
    AlignmentError,
    AnnotationError,
    CorpusError,
    EvaluationError,
    FormatError,
    HiliteError,
    ModelError,
)

__version__ = "0.1.0"

__all__ = [
    "corpus",
    "alignment",
    "smoothing",
    "rouge",
    "extractor",
    "harness",
    "HiliteError",
    "FormatError",
    "CorpusError",
    "AlignmentError",
    "AnnotationError",
    "ModelError",
    "EvaluationError",
    "__version__",
]
