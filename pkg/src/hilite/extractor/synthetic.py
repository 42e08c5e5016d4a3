"""Synthetic marker task: a corpus the extractor must be able to ace.

Positive sentences contain a begin marker and an end marker with a short
target span between them; negative sentences contain neither.  The gold
span runs from the begin marker to the end marker inclusive.  Everything
else is filler drawn uniformly from the content vocabulary, so the task
isolates exactly the two skills the model claims: detecting whether a
sentence carries a highlight, and localizing its boundaries.
"""

from typing import List, Optional

import numpy as np

BEGIN_MARKER = "<b>"
END_MARKER = "</b>"


def make_marker_records(
    n_sentences: int,
    vocab_size: int = 50,
    min_len: int = 8,
    max_len: int = 14,
    max_span_inner: int = 4,
    sentences_per_doc: int = 20,
    positive_rate: float = 0.5,
    seed: int = 0,
) -> List[dict]:
    """Instance records (the training-data JSONL schema) for the marker task.

    ``vocab_size`` counts the data tokens including the two markers.
    """
    if vocab_size < 4:
        raise ValueError("need at least 2 content tokens plus the 2 markers")
    rng = np.random.default_rng(seed)
    content = [f"tok{i:02d}" for i in range(vocab_size - 2)]
    records = []
    for i in range(n_sentences):
        length = int(rng.integers(min_len, max_len + 1))
        tokens = [content[int(k)] for k in rng.integers(0, len(content), size=length)]
        positive = bool(rng.random() < positive_rate)
        start: Optional[int] = None
        end: Optional[int] = None
        if positive:
            inner = int(rng.integers(1, max_span_inner + 1))
            # Begin marker position leaves room for inner tokens + end marker.
            start = int(rng.integers(0, length - inner - 1))
            end = start + inner + 1
            tokens[start] = BEGIN_MARKER
            tokens[end] = END_MARKER
        records.append(
            {
                "doc_id": f"syn{i // sentences_per_doc:05d}",
                "sentence_index": i % sentences_per_doc,
                "tokens": tokens,
                "label": 1 if positive else 0,
                "start": start,
                "end": end,
            }
        )
    return records
