"""ROUGE-1/2/L precision, recall, and F1 over pre-tokenized sequences.

Tokens are compared by exact string equality: no stemming, no stopword
removal, no length limits.  ROUGE-N uses clipped (multiset) n-gram
overlap.  ROUGE-L treats candidate and reference as single flat token
sequences and scores one global longest common subsequence; this is NOT
the summary-level union-LCS variant, so scores are comparable only within
this toolkit.  F1 is the plain harmonic mean (beta = 1).
"""

from collections import Counter
from dataclasses import dataclass
from typing import List, Sequence

from .errors import EvaluationError

__all__ = [
    "RougeScore",
    "rouge_n",
    "lcs_length",
    "rouge_l",
    "score",
    "parse_metrics",
    "METRICS",
]

METRICS = ("1", "2", "L")


@dataclass(frozen=True)
class RougeScore:
    precision: float
    recall: float
    f1: float

    @staticmethod
    def from_precision_recall(precision: float, recall: float) -> "RougeScore":
        if precision + recall > 0:
            f1 = 2.0 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
        return RougeScore(precision=precision, recall=recall, f1=f1)


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    if len(tokens) < n:
        return Counter()
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: Sequence[str], reference: Sequence[str], n: int) -> RougeScore:
    """Clipped n-gram overlap score.

    precision = clipped matches / candidate n-grams,
    recall    = clipped matches / reference n-grams;
    a side with no n-grams contributes 0 to its component.
    """
    if n < 1:
        raise EvaluationError(f"n-gram order must be >= 1, got {n}")
    candidate_counts = _ngram_counts(candidate, n)
    reference_counts = _ngram_counts(reference, n)
    clipped = sum(
        min(count, reference_counts[gram]) for gram, count in candidate_counts.items()
    )
    total_candidate = sum(candidate_counts.values())
    total_reference = sum(reference_counts.values())
    precision = clipped / total_candidate if total_candidate else 0.0
    recall = clipped / total_reference if total_reference else 0.0
    return RougeScore.from_precision_recall(precision, recall)


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence length via the classic DP with a rolling row."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for token_a in a:
        current = [0]
        for j, token_b in enumerate(b, start=1):
            if token_a == token_b:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[len(b)]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeScore:
    """LCS-based score over the flat token sequences."""
    lcs = lcs_length(candidate, reference)
    precision = lcs / len(candidate) if candidate else 0.0
    recall = lcs / len(reference) if reference else 0.0
    return RougeScore.from_precision_recall(precision, recall)


def score(candidate: Sequence[str], reference: Sequence[str], metric: str) -> RougeScore:
    """Dispatch on a metric name: "1", "2", or "L"."""
    if metric == "L":
        return rouge_l(candidate, reference)
    try:
        n = int(metric)
    except ValueError:
        raise EvaluationError(f"unknown ROUGE metric {metric!r}") from None
    return rouge_n(candidate, reference, n)


def parse_metrics(spec: str) -> List[str]:
    """Parse a CLI-style metric list such as "1,2,L"."""
    metrics = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if part.upper() == "L":
            metrics.append("L")
        elif part.isdigit() and int(part) >= 1:
            metrics.append(part)
        else:
            raise EvaluationError(f"unknown ROUGE metric {part!r}")
    if not metrics:
        raise EvaluationError("empty metric list")
    return metrics
