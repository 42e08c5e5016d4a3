"""Joint sentence-and-span extractor at desk scale.

A small from-scratch transformer encoder with summed token/position
embeddings, a CLS sentence head, and two-channel start/end span heads,
trained end-to-end with a combined cross-entropy objective.  Gradients are
fully analytic and checkable against finite differences.
"""

from .model import (
    CHECKPOINT_VERSION,
    CLS_TOKEN,
    UNK_TOKEN,
    ModelConfig,
    Parameters,
    TrainingInstance,
    build_vocab,
    config_from_records,
    encode_tokens,
    instances_from_document,
    instances_from_records,
    load_model,
    load_training_records,
    make_instance,
    save_model,
    save_training_records,
    training_records,
)
from .synthetic import make_marker_records
from .training import (
    GradCheckReport,
    Prediction,
    TrainResult,
    batch_loss,
    embed,
    encode,
    evaluate_instances,
    grad,
    gradient_check,
    heads,
    loss,
    predict,
    predict_document,
    predict_sentence,
    repair_end,
    tiny_gradcheck_setup,
    train,
)

__all__ = [
    "CHECKPOINT_VERSION",
    "CLS_TOKEN",
    "UNK_TOKEN",
    "ModelConfig",
    "Parameters",
    "TrainingInstance",
    "Prediction",
    "TrainResult",
    "GradCheckReport",
    "build_vocab",
    "encode_tokens",
    "make_instance",
    "instances_from_document",
    "instances_from_records",
    "training_records",
    "load_training_records",
    "save_training_records",
    "config_from_records",
    "save_model",
    "load_model",
    "make_marker_records",
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
