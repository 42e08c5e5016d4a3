"""Shared fixtures: a real newswire sentence with a fully hand-traced
smoothing outcome, used by the smoothing, harness, and acceptance tests."""

import pytest

# 36 tokens, CNN/DM-style tokenization.
CRASH_SENTENCE = (
    "marseille , france -lrb- cnn -rrb- the french prosecutor leading an "
    "investigation into the crash of germanwings flight 9525 insisted "
    "wednesday that he was not aware of any video footage from on board "
    "the plane ."
).split()

# Local indices of the words the abstract aligns onto (argmax alignment):
# marseille france the french crash germanwings 9525 insisted he of(26)
# video footage on
CRASH_ALIGNED = frozenset({0, 2, 6, 7, 14, 16, 18, 19, 22, 26, 28, 29, 31})

# Hand trace with gap_threshold=5:
#   0-2 bridge(1), 2-6 bridge(3,4,5), 7->14 gap of 6 stays open,
#   14-16 bridge(15), 16-18 bridge(17), 19-22 bridge(20,21),
#   22-26 bridge(23,24,25), 26-28 bridge(27), 29-31 bridge(30)
# -> runs [0..7] (8 tokens) and [14..31] (18 tokens).
# With boundary extension the 4 trailing tokens 32..35 are pulled in,
# growing the second run to [14..35] (22 tokens).
CRASH_RUNS_PLAIN = [(0, 7), (14, 31)]
CRASH_RUNS_EXTENDED = [(0, 7), (14, 35)]


@pytest.fixture
def crash_sentence():
    return list(CRASH_SENTENCE)


@pytest.fixture
def crash_aligned():
    return frozenset(CRASH_ALIGNED)
