"""Loss, gradients, training loop, inference, and gradient checking.

The objective is a weighted sum of cross-entropies: a binary sentence
label from the CLS vector, plus start-index and end-index distributions
over the sentence's token positions.  Start/end terms are active only for
positively labelled sentences and are scaled by ``span_loss_weight``.

Training is deterministic full-batch gradient descent from a seeded
initialization, with early stopping against a validation split.  The end
distribution is never masked during training; the end-after-start repair
rule applies only at inference.

Instances of different lengths are grouped by length and processed as
dense batches, so gradients are exact (no padding) and numpy stays
vectorized.
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ModelError
from ..smoothing import Run, SentenceAnnotation
from .model import ModelConfig, Parameters, TrainingInstance, make_instance
from .network import (
    embed_backward,
    embed_forward,
    encoder_backward,
    encoder_forward,
    heads_backward,
    heads_forward,
    log_softmax,
    softmax,
)

__all__ = [
    "Prediction",
    "TrainResult",
    "GradCheckReport",
    "embed",
    "encode",
    "heads",
    "predict",
    "loss",
    "batch_loss",
    "grad",
    "train",
    "repair_end",
    "predict_sentence",
    "predict_document",
    "evaluate_instances",
    "gradient_check",
    "tiny_gradcheck_setup",
]

DIST_TOLERANCE = 1e-6


@dataclass(frozen=True)
class Prediction:
    """Sentence probability plus start/end distributions over the non-CLS
    positions of one sentence."""

    sentence_prob: float
    start_dist: np.ndarray
    end_dist: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.sentence_prob <= 1.0:
            raise ModelError(f"sentence_prob {self.sentence_prob} outside [0, 1]")
        for name, dist in (("start", self.start_dist), ("end", self.end_dist)):
            dist = np.asarray(dist, dtype=np.float64)
            if dist.ndim != 1 or dist.size == 0:
                raise ModelError(f"{name} distribution must be a non-empty vector")
            if np.min(dist) < 0 or abs(float(np.sum(dist)) - 1.0) > DIST_TOLERANCE:
                raise ModelError(f"{name} distribution is not a simplex")
            object.__setattr__(self, f"{name}_dist", dist)


# ---------------------------------------------------------------------------
# Per-instance forward API
# ---------------------------------------------------------------------------


def embed(instance: TrainingInstance, params: Parameters, cfg: ModelConfig) -> np.ndarray:
    """(seq_len, d) embedding matrix for one CLS-prefixed instance."""
    ids = np.asarray(instance.token_ids)[np.newaxis, :]
    positions = np.asarray([instance.doc_position])
    return embed_forward(ids, positions, params)[0]


def encode(
    x: np.ndarray,
    params: Parameters,
    cfg: ModelConfig,
    return_attention: bool = False,
):
    """Encode one (seq_len, d) matrix; optionally return per-layer
    attention probabilities, each (heads, seq_len, seq_len)."""
    if x.ndim != 2 or x.shape[1] != cfg.embed_dim:
        raise ModelError(f"expected a (seq_len, {cfg.embed_dim}) matrix, got {x.shape}")
    h, _, attention = encoder_forward(x[np.newaxis], params, cfg)
    if return_attention:
        return h[0], [a[0] for a in attention]
    return h[0]


def heads(h: np.ndarray, params: Parameters) -> Prediction:
    """Sentence probability and span distributions from one hidden matrix."""
    sent_logits, span_logits = heads_forward(h[np.newaxis], params)
    sent_probs = softmax(sent_logits, axis=-1)[0]
    start = softmax(span_logits[0, :, 0], axis=-1)
    end = softmax(span_logits[0, :, 1], axis=-1)
    return Prediction(sentence_prob=float(sent_probs[1]), start_dist=start, end_dist=end)


def predict(instance: TrainingInstance, params: Parameters, cfg: ModelConfig) -> Prediction:
    return heads(encode(embed(instance, params, cfg), params, cfg), params)


# ---------------------------------------------------------------------------
# Loss
# ---------------------------------------------------------------------------


def _neg_log(p: float) -> float:
    return -math.log(p) if p > 0.0 else math.inf


def loss(pred: Prediction, instance: TrainingInstance, span_loss_weight: float) -> float:
    """Combined cross-entropy of one prediction against one instance.

    Sentence term always; start/end terms only when the label is 1.
    Zero exactly when every active target has probability one.
    """
    p_true = pred.sentence_prob if instance.label == 1 else 1.0 - pred.sentence_prob
    total = _neg_log(p_true)
    if instance.label == 1:
        start, end = instance.span
        if start >= pred.start_dist.size or end >= pred.end_dist.size:
            raise ModelError(
                f"span {instance.span} outside predicted distributions of "
                f"length {pred.start_dist.size}"
            )
        total += span_loss_weight * (
            _neg_log(float(pred.start_dist[start])) + _neg_log(float(pred.end_dist[end]))
        )
    return total


# ---------------------------------------------------------------------------
# Batched loss and gradients
# ---------------------------------------------------------------------------


@dataclass
class _Group:
    """All instances of one sequence length, as dense arrays."""

    token_ids: np.ndarray      # (B, L) int
    doc_positions: np.ndarray  # (B,) int
    labels: np.ndarray         # (B,) int
    starts: np.ndarray         # (B,) int, -1 when no span
    ends: np.ndarray           # (B,) int, -1 when no span


def _group_by_length(instances: Sequence[TrainingInstance]) -> List[_Group]:
    buckets: Dict[int, List[TrainingInstance]] = {}
    for instance in instances:
        buckets.setdefault(len(instance.token_ids), []).append(instance)
    groups = []
    for length in sorted(buckets):
        bucket = buckets[length]
        groups.append(
            _Group(
                token_ids=np.array([i.token_ids for i in bucket], dtype=np.int64),
                doc_positions=np.array([i.doc_position for i in bucket], dtype=np.int64),
                labels=np.array([i.label for i in bucket], dtype=np.int64),
                starts=np.array(
                    [i.span[0] if i.span else -1 for i in bucket], dtype=np.int64
                ),
                ends=np.array(
                    [i.span[1] if i.span else -1 for i in bucket], dtype=np.int64
                ),
            )
        )
    return groups


def _group_loss_terms(group: _Group, sent_logits, span_logits, span_loss_weight: float):
    """Summed (not averaged) loss of one group, plus the logit gradients of
    that sum (to be scaled by 1/N by the caller)."""
    batch = group.labels.shape[0]
    rows = np.arange(batch)

    sent_logp = log_softmax(sent_logits, axis=-1)
    total = -float(np.sum(sent_logp[rows, group.labels]))
    dsent = softmax(sent_logits, axis=-1)
    dsent[rows, group.labels] -= 1.0

    dspan = np.zeros_like(span_logits)
    positive = group.labels == 1
    if np.any(positive):
        for channel, targets in ((0, group.starts), (1, group.ends)):
            logits = span_logits[:, :, channel]
            logp = log_softmax(logits, axis=-1)
            total += span_loss_weight * -float(
                np.sum(logp[rows[positive], targets[positive]])
            )
            dchannel = softmax(logits, axis=-1)
            dchannel[rows, targets.clip(min=0)] -= 1.0
            dchannel[~positive] = 0.0
            dspan[:, :, channel] = span_loss_weight * dchannel
    return total, dsent, dspan


def batch_loss(
    instances: Sequence[TrainingInstance], params: Parameters, cfg: ModelConfig
) -> float:
    """Mean combined loss over a batch (forward only)."""
    if not instances:
        raise ModelError("empty batch")
    total = 0.0
    for group in _group_by_length(instances):
        x = embed_forward(group.token_ids, group.doc_positions, params)
        h, _, _ = encoder_forward(x, params, cfg)
        sent_logits, span_logits = heads_forward(h, params)
        group_total, _, _ = _group_loss_terms(
            group, sent_logits, span_logits, cfg.span_loss_weight
        )
        total += group_total
    return total / len(instances)


def grad(
    instances: Sequence[TrainingInstance],
    params: Parameters,
    cfg: ModelConfig,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[float, Parameters]:
    """Mean loss and its analytic gradient with respect to every parameter."""
    if not instances:
        raise ModelError("empty batch")
    n_total = len(instances)
    grads = params.zeros_like()
    total = 0.0
    for group in _group_by_length(instances):
        x = embed_forward(group.token_ids, group.doc_positions, params)
        h, caches, _ = encoder_forward(x, params, cfg, train_mode=train_mode, rng=rng)
        sent_logits, span_logits = heads_forward(h, params)
        group_total, dsent, dspan = _group_loss_terms(
            group, sent_logits, span_logits, cfg.span_loss_weight
        )
        total += group_total
        dh = heads_backward(dsent / n_total, dspan / n_total, h, params, grads)
        dx = encoder_backward(dh, caches, params, cfg, grads)
        embed_backward(dx, group.token_ids, group.doc_positions, grads)
    return total / n_total, grads


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainResult:
    """Best-validation parameters plus the per-epoch loss history."""

    params: Parameters
    train_losses: List[float]
    valid_losses: List[float]
    best_epoch: int


def train(
    data: Sequence[TrainingInstance],
    cfg: ModelConfig,
    valid: Optional[Sequence[TrainingInstance]] = None,
    epochs: int = 200,
    learning_rate: float = 0.05,
    patience: Optional[int] = 25,
    valid_fraction: float = 0.1,
) -> TrainResult:
    """Full-batch gradient descent with early stopping.

    When no validation set is given, a seeded shuffle carves
    ``valid_fraction`` of ``data`` off as one.  Stops after ``patience``
    epochs without a validation improvement (never before 1 epoch), and
    returns the parameters that scored best on validation.  Raises
    :class:`ModelError` if the loss goes non-finite.
    """
    if not data:
        raise ModelError("no training data")
    if valid is None:
        if len(data) < 2:
            train_set, valid = list(data), list(data)
        else:
            order = np.random.default_rng(cfg.seed).permutation(len(data))
            n_valid = max(1, int(round(valid_fraction * len(data))))
            valid = [data[i] for i in order[:n_valid]]
            train_set = [data[i] for i in order[n_valid:]]
    else:
        train_set = list(data)
        valid = list(valid)

    params = Parameters.init(cfg)
    dropout_rng = np.random.default_rng(cfg.seed + 1)
    best = params.copy()
    best_valid = math.inf
    best_epoch = -1
    since_best = 0
    train_losses: List[float] = []
    valid_losses: List[float] = []

    for epoch in range(epochs):
        epoch_loss, grads = grad(
            train_set, params, cfg, train_mode=True, rng=dropout_rng
        )
        if not math.isfinite(epoch_loss):
            raise ModelError(
                f"training diverged: loss became {epoch_loss} at epoch {epoch}"
            )
        for (_, value), (_, gradient) in zip(params.named_arrays(), grads.named_arrays()):
            value -= learning_rate * gradient

        valid_loss = batch_loss(valid, params, cfg)
        if not math.isfinite(valid_loss):
            raise ModelError(
                f"training diverged: validation loss became {valid_loss} at epoch {epoch}"
            )
        train_losses.append(epoch_loss)
        valid_losses.append(valid_loss)

        if valid_loss < best_valid:
            best_valid = valid_loss
            best = params.copy()
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if patience is not None and since_best >= patience:
                break

    return TrainResult(
        params=best,
        train_losses=train_losses,
        valid_losses=valid_losses,
        best_epoch=best_epoch,
    )


# ---------------------------------------------------------------------------
# Inference
# ---------------------------------------------------------------------------


def repair_end(start: int, end_dist: np.ndarray) -> int:
    """End index at or after ``start``: the global argmax when it already
    falls there, otherwise the argmax over positions >= start.  Ties break
    toward the lowest index."""
    end_dist = np.asarray(end_dist)
    if not 0 <= start < end_dist.size:
        raise ModelError(f"start {start} outside distribution of length {end_dist.size}")
    best = int(np.argmax(end_dist))
    if best >= start:
        return best
    return start + int(np.argmax(end_dist[start:]))


def predict_sentence(
    instance: TrainingInstance,
    params: Parameters,
    cfg: ModelConfig,
    threshold: float = 0.5,
) -> SentenceAnnotation:
    """Threshold the sentence probability; extract a repaired span only for
    positive sentences."""
    pred = predict(instance, params, cfg)
    if pred.sentence_prob < threshold:
        return SentenceAnnotation(
            doc_id=instance.doc_id,
            sentence_index=instance.sentence_index,
            label=0,
        )
    start = int(np.argmax(pred.start_dist))
    end = repair_end(start, pred.end_dist)
    return SentenceAnnotation(
        doc_id=instance.doc_id,
        sentence_index=instance.sentence_index,
        label=1,
        segment=Run(start, end),
    )


def predict_document(doc, params: Parameters, cfg: ModelConfig, threshold: float = 0.5):
    """One SentenceAnnotation per sentence of a document."""
    return [
        predict_sentence(
            make_instance(doc.doc_id, s.position, s.tokens, cfg), params, cfg, threshold
        )
        for s in doc.sentences
    ]


def evaluate_instances(
    instances: Sequence[TrainingInstance],
    params: Parameters,
    cfg: ModelConfig,
    threshold: float = 0.5,
) -> Dict[str, float]:
    """Sentence-label accuracy over all instances and exact span match over
    the gold-positive ones (a match requires a positive prediction too)."""
    correct = 0
    positives = 0
    span_matches = 0
    for instance in instances:
        annotation = predict_sentence(instance, params, cfg, threshold)
        if annotation.label == instance.label:
            correct += 1
        if instance.label == 1:
            positives += 1
            if annotation.label == 1 and annotation.segment is not None:
                predicted = (annotation.segment.start, annotation.segment.end)
                if predicted == instance.span:
                    span_matches += 1
    return {
        "sentence_accuracy": correct / len(instances) if instances else 0.0,
        "span_exact_match": span_matches / positives if positives else 0.0,
    }


# ---------------------------------------------------------------------------
# Gradient checking
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_parameter: str
    per_parameter: Dict[str, float]


def tiny_gradcheck_setup(seed: int = 0):
    """A d=8, 1-layer, 2-head config with sequence length 6 and a two-
    instance batch (one positive, one negative) touching every vocab row
    and both document positions, so no gradient entry is trivially unused."""
    vocab = {"<cls>": 0, "<unk>": 1, "aa": 2, "bb": 3, "cc": 4, "dd": 5}
    cfg = ModelConfig(
        vocab=vocab,
        max_sentence_len=5,
        max_doc_positions=2,
        embed_dim=8,
        encoder_layers=1,
        attention_heads=2,
        seed=seed,
    )
    positive = make_instance(
        "g1", 0, ["aa", "bb", "cc", "dd", "aa"], cfg, label=1, span=(1, 3)
    )
    negative_tokens = ["dd", "cc", "zz-unknown", "bb", "aa"]  # maps one token to <unk>
    negative = make_instance("g1", 1, negative_tokens, cfg, label=0)
    return cfg, [positive, negative]


def gradient_check(
    cfg: Optional[ModelConfig] = None,
    batch: Optional[Sequence[TrainingInstance]] = None,
    seed: int = 0,
    step: float = 1e-5,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Per-element error is |analytic - numeric| / max(|analytic| + |numeric|,
    1e-6): relative where the gradient is meaningful, with an absolute
    floor where finite-difference noise dominates.
    """
    if (cfg is None) != (batch is None):
        raise ModelError("provide both cfg and batch, or neither")
    if cfg is None:
        cfg, batch = tiny_gradcheck_setup(seed)
    params = Parameters.init(cfg)
    _, analytic = grad(batch, params, cfg)

    per_parameter: Dict[str, float] = {}
    analytic_by_name = dict(analytic.named_arrays())
    for name, array in params.named_arrays():
        worst = 0.0
        flat = array.reshape(-1)
        analytic_flat = analytic_by_name[name].reshape(-1)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + step
            upper = batch_loss(batch, params, cfg)
            flat[index] = original - step
            lower = batch_loss(batch, params, cfg)
            flat[index] = original
            numeric = (upper - lower) / (2.0 * step)
            denom = max(abs(analytic_flat[index]) + abs(numeric), 1e-6)
            worst = max(worst, abs(analytic_flat[index] - numeric) / denom)
        per_parameter[name] = worst

    worst_parameter = max(per_parameter, key=per_parameter.get)
    return GradCheckReport(
        max_rel_error=per_parameter[worst_parameter],
        worst_parameter=worst_parameter,
        per_parameter=per_parameter,
    )
