"""Configuration, parameters, and data instances for the span extractor.

The extractor is a desk-scale stand-in for a large pretrained encoder: the
input/output contract (summed token + in-sentence-position + document-
position embeddings in, one hidden vector per position out, a CLS vector
for whole-sentence classification) is the same, but the encoder is a small
from-scratch transformer so that every gradient can be checked against
finite differences.  The large-scale reference configuration (768 dims,
12 layers, 12 heads, pretrained weights) is out of scope by design.

Tensor layout conventions (float64 throughout):

* sequences are CLS-prefixed; row 0 of every per-position tensor is CLS;
* ``word_pos_emb`` is indexed by position in the CLS-prefixed sequence, so
  it has ``max_sentence_len + 1`` rows (position 0 is reserved for CLS);
* ``doc_pos_emb`` is indexed by the sentence's position in its document,
  shared by every row of the sequence, CLS included.
"""

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .._jsonl import read_records, require_fields, write_records
from ..corpus import Document
from ..errors import FormatError, ModelError

__all__ = [
    "CLS_TOKEN",
    "UNK_TOKEN",
    "CHECKPOINT_VERSION",
    "ModelConfig",
    "LayerParameters",
    "Parameters",
    "TrainingInstance",
    "build_vocab",
    "encode_tokens",
    "make_instance",
    "instances_from_document",
    "training_records",
    "load_training_records",
    "save_training_records",
    "instances_from_records",
    "config_from_records",
    "save_model",
    "load_model",
]

CLS_TOKEN = "<cls>"
UNK_TOKEN = "<unk>"
CHECKPOINT_VERSION = 1

INIT_SCALE = 0.1  # all weights start uniform in [-INIT_SCALE, INIT_SCALE]


@dataclass
class ModelConfig:
    """Hyperparameters plus the vocabulary.

    ``span_loss_weight`` balances the start/end objectives against the
    sentence objective (0.1 unless tuned otherwise).  ``dropout_p`` is 0 at
    desk scale; when nonzero it applies only during training passes, never
    during inference or gradient checking.
    """

    vocab: Dict[str, int]
    max_sentence_len: int
    max_doc_positions: int
    embed_dim: int = 32
    encoder_layers: int = 1
    attention_heads: int = 2
    ff_dim: Optional[int] = None  # defaults to 4 * embed_dim
    span_loss_weight: float = 0.1
    dropout_p: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.ff_dim is None:
            self.ff_dim = 4 * self.embed_dim
        if self.embed_dim % self.attention_heads != 0:
            raise ModelError(
                f"embed_dim {self.embed_dim} not divisible by "
                f"attention_heads {self.attention_heads}"
            )
        if self.encoder_layers < 0:
            raise ModelError(f"encoder_layers must be >= 0, got {self.encoder_layers}")
        if self.span_loss_weight < 0:
            raise ModelError(f"span_loss_weight must be >= 0, got {self.span_loss_weight}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ModelError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.max_sentence_len < 1 or self.max_doc_positions < 1:
            raise ModelError("max_sentence_len and max_doc_positions must be >= 1")
        for special in (CLS_TOKEN, UNK_TOKEN):
            if special not in self.vocab:
                raise ModelError(f"vocab is missing the reserved token {special!r}")

    @property
    def cls_id(self) -> int:
        return self.vocab[CLS_TOKEN]

    @property
    def unk_id(self) -> int:
        return self.vocab[UNK_TOKEN]

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    @property
    def head_dim(self) -> int:
        return self.embed_dim // self.attention_heads


@dataclass
class LayerParameters:
    """One encoder layer: multi-head self-attention then a feed-forward
    block, each followed by a residual connection and layer norm."""

    wq: np.ndarray
    bq: np.ndarray
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray
    bo: np.ndarray
    ln1_gain: np.ndarray
    ln1_bias: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    ln2_gain: np.ndarray
    ln2_bias: np.ndarray


@dataclass
class Parameters:
    """Every learnable array in the model.

    The same structure doubles as the gradient container (see
    ``zeros_like``): gradients mirror parameters one-to-one.
    """

    tok_emb: np.ndarray       # vocab x d
    word_pos_emb: np.ndarray  # (max_sentence_len + 1) x d, row 0 = CLS slot
    doc_pos_emb: np.ndarray   # max_doc_positions x d
    layers: List[LayerParameters] = field(default_factory=list)
    final_gain: np.ndarray = None  # top-of-stack layer norm (unused at 0 layers)
    final_bias: np.ndarray = None
    sent_w: np.ndarray = None  # d x 2 (negative, positive)
    sent_b: np.ndarray = None
    span_w: np.ndarray = None  # d x 2 (start channel, end channel)
    span_b: np.ndarray = None

    @staticmethod
    def init(cfg: ModelConfig) -> "Parameters":
        """Seeded uniform init in [-0.1, 0.1].

        Layer-norm gains start at 1 and layer-norm biases at 0 (a gain near
        zero would mute the whole residual stream).
        """
        rng = np.random.default_rng(cfg.seed)
        d, ff = cfg.embed_dim, cfg.ff_dim

        def uniform(*shape):
            return rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)

        layers = []
        for _ in range(cfg.encoder_layers):
            layers.append(
                LayerParameters(
                    wq=uniform(d, d), bq=uniform(d),
                    wk=uniform(d, d), bk=uniform(d),
                    wv=uniform(d, d), bv=uniform(d),
                    wo=uniform(d, d), bo=uniform(d),
                    ln1_gain=np.ones(d), ln1_bias=np.zeros(d),
                    w1=uniform(d, ff), b1=uniform(ff),
                    w2=uniform(ff, d), b2=uniform(d),
                    ln2_gain=np.ones(d), ln2_bias=np.zeros(d),
                )
            )
        return Parameters(
            tok_emb=uniform(cfg.vocab_size, d),
            word_pos_emb=uniform(cfg.max_sentence_len + 1, d),
            doc_pos_emb=uniform(cfg.max_doc_positions, d),
            layers=layers,
            final_gain=np.ones(d), final_bias=np.zeros(d),
            sent_w=uniform(d, 2), sent_b=uniform(2),
            span_w=uniform(d, 2), span_b=uniform(2),
        )

    def named_arrays(self) -> Iterator[Tuple[str, np.ndarray]]:
        """Stable (name, array) iteration over every parameter tensor."""
        yield "tok_emb", self.tok_emb
        yield "word_pos_emb", self.word_pos_emb
        yield "doc_pos_emb", self.doc_pos_emb
        for i, layer in enumerate(self.layers):
            for name in (
                "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo",
                "ln1_gain", "ln1_bias", "w1", "b1", "w2", "b2",
                "ln2_gain", "ln2_bias",
            ):
                yield f"layers.{i}.{name}", getattr(layer, name)
        yield "final_gain", self.final_gain
        yield "final_bias", self.final_bias
        yield "sent_w", self.sent_w
        yield "sent_b", self.sent_b
        yield "span_w", self.span_w
        yield "span_b", self.span_b

    def zeros_like(self) -> "Parameters":
        layers = [
            LayerParameters(**{
                name: np.zeros_like(getattr(layer, name))
                for name in vars(layer)
            })
            for layer in self.layers
        ]
        return Parameters(
            tok_emb=np.zeros_like(self.tok_emb),
            word_pos_emb=np.zeros_like(self.word_pos_emb),
            doc_pos_emb=np.zeros_like(self.doc_pos_emb),
            layers=layers,
            sent_w=np.zeros_like(self.sent_w),
            sent_b=np.zeros_like(self.sent_b),
            span_w=np.zeros_like(self.span_w),
            span_b=np.zeros_like(self.span_b),
        )

    def copy(self) -> "Parameters":
        layers = [
            LayerParameters(**{
                name: getattr(layer, name).copy() for name in vars(layer)
            })
            for layer in self.layers
        ]
        return Parameters(
            tok_emb=self.tok_emb.copy(),
            word_pos_emb=self.word_pos_emb.copy(),
            doc_pos_emb=self.doc_pos_emb.copy(),
            layers=layers,
            sent_w=self.sent_w.copy(),
            sent_b=self.sent_b.copy(),
            span_w=self.span_w.copy(),
            span_b=self.span_b.copy(),
        )

    def check_finite(self) -> None:
        for name, array in self.named_arrays():
            if not np.all(np.isfinite(array)):
                raise ModelError(f"parameter {name} contains non-finite values")


@dataclass(frozen=True)
class TrainingInstance:
    """One sentence as the model sees it.

    ``token_ids`` is CLS-prefixed.  ``sentence_index`` is the sentence's
    position in its document (kept for re-assembly by document id);
    ``doc_position`` is the row of the document-position embedding, which
    equals ``sentence_index`` clamped to the table size.  The span, when
    present, is inclusive and local to the un-prefixed sentence.
    """

    doc_id: str
    sentence_index: int
    doc_position: int
    token_ids: Tuple[int, ...]
    label: int
    span: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "token_ids", tuple(int(t) for t in self.token_ids))
        if len(self.token_ids) < 2:
            raise ModelError(
                f"{self.doc_id!r} sentence {self.sentence_index}: an instance "
                f"needs CLS plus at least one token"
            )
        if self.label not in (0, 1):
            raise ModelError(f"label must be 0 or 1, got {self.label}")
        if (self.label == 1) != (self.span is not None):
            raise ModelError(
                f"{self.doc_id!r} sentence {self.sentence_index}: label "
                f"{self.label} inconsistent with span {self.span}"
            )
        if self.span is not None:
            start, end = self.span
            if not 0 <= start <= end < self.sentence_len:
                raise ModelError(
                    f"{self.doc_id!r} sentence {self.sentence_index}: span "
                    f"{self.span} outside sentence of length {self.sentence_len}"
                )
            object.__setattr__(self, "span", (int(start), int(end)))

    @property
    def sentence_len(self) -> int:
        """Number of real tokens (the CLS prefix excluded)."""
        return len(self.token_ids) - 1


def build_vocab(token_sequences) -> Dict[str, int]:
    """Frequency-ranked vocabulary with reserved CLS and UNK entries.

    Ties in frequency break alphabetically so the mapping is deterministic
    for any iteration order of the input.
    """
    counts: Dict[str, int] = {}
    for tokens in token_sequences:
        for token in tokens:
            counts[token] = counts.get(token, 0) + 1
    counts.pop(CLS_TOKEN, None)
    counts.pop(UNK_TOKEN, None)
    vocab = {CLS_TOKEN: 0, UNK_TOKEN: 1}
    for token in sorted(counts, key=lambda t: (-counts[t], t)):
        vocab[token] = len(vocab)
    return vocab


def encode_tokens(tokens: Sequence[str], cfg: ModelConfig) -> Tuple[int, ...]:
    """CLS-prefixed ids; unknown tokens map to UNK; tokens beyond
    ``max_sentence_len`` are dropped."""
    kept = tokens[: cfg.max_sentence_len]
    return (cfg.cls_id,) + tuple(cfg.vocab.get(t, cfg.unk_id) for t in kept)


def make_instance(
    doc_id: str,
    sentence_index: int,
    tokens: Sequence[str],
    cfg: ModelConfig,
    label: int = 0,
    span: Optional[Tuple[int, int]] = None,
) -> TrainingInstance:
    """Encode one sentence, truncating tokens and clamping the document
    position to the embedding table.

    A gold span reaching into the truncated region is an error: silently
    moving gold targets would corrupt training data.
    """
    token_ids = encode_tokens(tokens, cfg)
    kept_len = len(token_ids) - 1
    if span is not None and span[1] >= kept_len:
        raise ModelError(
            f"{doc_id!r} sentence {sentence_index}: gold span {span} exceeds the "
            f"kept length {kept_len} (max_sentence_len={cfg.max_sentence_len})"
        )
    return TrainingInstance(
        doc_id=doc_id,
        sentence_index=sentence_index,
        doc_position=min(sentence_index, cfg.max_doc_positions - 1),
        token_ids=token_ids,
        label=label,
        span=span,
    )


def instances_from_document(doc: Document, cfg: ModelConfig) -> List[TrainingInstance]:
    """Unlabelled (label 0) instances for inference over a document."""
    return [
        make_instance(doc.doc_id, s.position, s.tokens, cfg)
        for s in doc.sentences
    ]


# ---------------------------------------------------------------------------
# Training-data records: the on-disk per-sentence instance schema.
# One JSON object per line:
#   {"doc_id": str, "sentence_index": int, "tokens": [str, ...],
#    "label": 0|1, "start": int|null, "end": int|null}
# ---------------------------------------------------------------------------


def training_records(docs: Sequence[Document], annotations) -> List[dict]:
    """Join documents with their gold annotations into instance records."""
    by_doc = {}
    for ann in annotations:
        by_doc.setdefault(ann.doc_id, {})[ann.sentence_index] = ann
    records = []
    for doc in docs:
        doc_anns = by_doc.get(doc.doc_id)
        if doc_anns is None:
            raise ModelError(f"no annotations for document {doc.doc_id!r}")
        for sentence in doc.sentences:
            ann = doc_anns.get(sentence.position)
            if ann is None:
                raise ModelError(
                    f"document {doc.doc_id!r}: missing annotation for sentence "
                    f"{sentence.position}"
                )
            records.append(
                {
                    "doc_id": doc.doc_id,
                    "sentence_index": sentence.position,
                    "tokens": list(sentence.tokens),
                    "label": ann.label,
                    "start": ann.segment.start if ann.segment else None,
                    "end": ann.segment.end if ann.segment else None,
                }
            )
    return records


def load_training_records(path) -> List[dict]:
    records = []
    for line_number, obj in read_records(path):
        require_fields(
            obj,
            ("doc_id", "sentence_index", "tokens", "label", "start", "end"),
            path,
            line_number,
        )
        if not obj["tokens"]:
            raise FormatError(f"{path}: line {line_number}: empty token list")
        records.append(obj)
    return records


def save_training_records(records: Sequence[dict], path) -> None:
    write_records(path, records)


def instances_from_records(records: Sequence[dict], cfg: ModelConfig) -> List[TrainingInstance]:
    instances = []
    for record in records:
        span = None
        if record["start"] is not None:
            span = (int(record["start"]), int(record["end"]))
        instances.append(
            make_instance(
                doc_id=record["doc_id"],
                sentence_index=int(record["sentence_index"]),
                tokens=record["tokens"],
                cfg=cfg,
                label=int(record["label"]),
                span=span,
            )
        )
    return instances


def config_from_records(records: Sequence[dict], **overrides) -> ModelConfig:
    """Derive vocab and size limits from training records.

    ``max_sentence_len`` covers the longest training sentence so no gold
    span is ever truncated; ``max_doc_positions`` covers the largest
    sentence index.
    """
    vocab = build_vocab(r["tokens"] for r in records)
    max_len = max(len(r["tokens"]) for r in records)
    max_positions = max(int(r["sentence_index"]) for r in records) + 1
    return ModelConfig(
        vocab=vocab,
        max_sentence_len=overrides.pop("max_sentence_len", max_len),
        max_doc_positions=overrides.pop("max_doc_positions", max_positions),
        **overrides,
    )


# ---------------------------------------------------------------------------
# Checkpoints: one self-describing JSON file, version field required.
# ---------------------------------------------------------------------------


def save_model(path, params: Parameters, cfg: ModelConfig) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "kind": "hilite-span-extractor",
        "config": {
            "vocab": cfg.vocab,
            "max_sentence_len": cfg.max_sentence_len,
            "max_doc_positions": cfg.max_doc_positions,
            "embed_dim": cfg.embed_dim,
            "encoder_layers": cfg.encoder_layers,
            "attention_heads": cfg.attention_heads,
            "ff_dim": cfg.ff_dim,
            "span_loss_weight": cfg.span_loss_weight,
            "dropout_p": cfg.dropout_p,
            "seed": cfg.seed,
        },
        "parameters": {name: array.tolist() for name, array in params.named_arrays()},
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path) -> Tuple[Parameters, ModelConfig]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not a valid model checkpoint ({exc.msg})") from exc
    if not isinstance(payload, dict) or "version" not in payload:
        raise FormatError(f"{path}: checkpoint is missing the version field")
    if payload["version"] != CHECKPOINT_VERSION:
        raise FormatError(
            f"{path}: unsupported checkpoint version {payload['version']!r}"
        )
    cfg = ModelConfig(**payload["config"])
    params = Parameters.init(cfg)
    stored = payload["parameters"]
    for name, array in params.named_arrays():
        if name not in stored:
            raise FormatError(f"{path}: checkpoint is missing parameter {name!r}")
        loaded = np.asarray(stored[name], dtype=np.float64)
        if loaded.shape != array.shape:
            raise FormatError(
                f"{path}: parameter {name!r} has shape {loaded.shape}, "
                f"expected {array.shape}"
            )
        array[...] = loaded
    return params, cfg
