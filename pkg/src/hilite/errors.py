"""Exception hierarchy shared by all hilite modules.

Every toolkit-raised validation failure derives from :class:`HiliteError`
so that batch drivers (and the CLI) can catch one type and turn it into a
single-line diagnostic.
"""


class HiliteError(Exception):
    """Base class for all toolkit validation and processing errors."""


class FormatError(HiliteError):
    """A file on disk does not match its documented schema."""


class CorpusError(HiliteError):
    """A document violates the corpus invariants."""


class AlignmentError(HiliteError):
    """An attention matrix or aligned word set violates its invariants."""


class AnnotationError(HiliteError):
    """A sentence annotation or the smoothing inputs are inconsistent."""


class ModelError(HiliteError):
    """Extractor configuration, parameters, or training went wrong."""


class EvaluationError(HiliteError):
    """Evaluation inputs (summaries, references, annotations) disagree."""
