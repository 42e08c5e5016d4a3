"""Batched forward and backward passes for the toy encoder.

Everything here operates on a batch of same-length CLS-prefixed sequences:
``token_ids`` is an integer (B, L) array and hidden states are float64
(B, L, d) arrays.  Mixed-length batches are handled one length-group at a
time by the training layer, so no padding or masking is needed anywhere.

Backward passes accumulate into a :class:`~.model.Parameters`-shaped
gradient container (``+=`` throughout), which lets the caller sum
gradients over several length groups before normalizing.

Architecture per layer (pre-norm transformer, final layer norm on top):

    x = x + attention(norm1(x))
    x = x + feed_forward(norm2(x))
    ...
    h = final_norm(x)            # skipped when there are zero layers

The pre-norm layout keeps the residual path an identity, which is what
makes plain full-batch gradient descent (no adaptive optimizer, no warmup)
stable at useful step sizes.  The attention probabilities of every head
are row-stochastic; callers can retrieve them via ``encoder_forward``'s
third return value.  Dropout, when enabled, zeroes sublayer outputs before
the residual adds and rescales by 1/(1-p); it runs only in train mode.
"""

from typing import List, Optional, Tuple

import numpy as np
from scipy.special import erf

from ..errors import ModelError
from .model import LayerParameters, ModelConfig, Parameters

__all__ = [
    "softmax",
    "log_softmax",
    "gelu",
    "gelu_grad",
    "embed_forward",
    "embed_backward",
    "encoder_forward",
    "encoder_backward",
    "heads_forward",
    "heads_backward",
]

LAYER_NORM_EPS = 1e-5
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    exp = np.exp(shifted)
    return exp / np.sum(exp, axis=axis, keepdims=True)


def log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact (erf-based) GELU; smooth everywhere, which keeps central
    finite differences honest during gradient checking."""
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def gelu_grad(x: np.ndarray) -> np.ndarray:
    cdf = 0.5 * (1.0 + erf(x / np.sqrt(2.0)))
    pdf = INV_SQRT_2PI * np.exp(-0.5 * x * x)
    return cdf + x * pdf


def _stacked_outer(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """sum over batch and positions of a[..., i] * b[..., j] -> (i, j).

    Reshapes to one big matmul so BLAS does the reduction.
    """
    flat_a = a.reshape(-1, a.shape[-1])
    flat_b = b.reshape(-1, b.shape[-1])
    return flat_a.T @ flat_b


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


def embed_forward(
    token_ids: np.ndarray, doc_positions: np.ndarray, params: Parameters
) -> np.ndarray:
    """Sum of token, in-sentence-position, and document-position embeddings.

    Row i of a sequence uses in-sentence position i (0 = CLS); every row of
    a sequence shares its instance's document position.
    """
    token_ids = np.asarray(token_ids)
    doc_positions = np.asarray(doc_positions)
    batch, seq_len = token_ids.shape
    if np.max(token_ids) >= params.tok_emb.shape[0] or np.min(token_ids) < 0:
        raise ModelError("token id outside the embedding table")
    if seq_len > params.word_pos_emb.shape[0]:
        raise ModelError(
            f"sequence length {seq_len} exceeds the position table "
            f"({params.word_pos_emb.shape[0]} rows)"
        )
    if np.max(doc_positions) >= params.doc_pos_emb.shape[0] or np.min(doc_positions) < 0:
        raise ModelError("document position outside the embedding table")
    return (
        params.tok_emb[token_ids]
        + params.word_pos_emb[np.newaxis, :seq_len, :]
        + params.doc_pos_emb[doc_positions][:, np.newaxis, :]
    )


def embed_backward(
    dx: np.ndarray,
    token_ids: np.ndarray,
    doc_positions: np.ndarray,
    grads: Parameters,
) -> None:
    seq_len = token_ids.shape[1]
    np.add.at(grads.tok_emb, token_ids, dx)
    grads.word_pos_emb[:seq_len] += dx.sum(axis=0)
    np.add.at(grads.doc_pos_emb, doc_positions, dx.sum(axis=1))


# ---------------------------------------------------------------------------
# Layer norm
# ---------------------------------------------------------------------------


def _layer_norm_forward(x, gain, bias):
    mean = x.mean(axis=-1, keepdims=True)
    centered = x - mean
    variance = np.mean(centered * centered, axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(variance + LAYER_NORM_EPS)
    normed = centered * inv_std
    return normed * gain + bias, (normed, inv_std)


def _layer_norm_backward(dy, cache, gain):
    normed, inv_std = cache
    dnormed = dy * gain
    dgain = np.sum(dy * normed, axis=tuple(range(dy.ndim - 1)))
    dbias = np.sum(dy, axis=tuple(range(dy.ndim - 1)))
    mean_dn = dnormed.mean(axis=-1, keepdims=True)
    mean_dn_normed = np.mean(dnormed * normed, axis=-1, keepdims=True)
    dx = inv_std * (dnormed - mean_dn - normed * mean_dn_normed)
    return dx, dgain, dbias


# ---------------------------------------------------------------------------
# Multi-head self-attention
# ---------------------------------------------------------------------------


def _split_heads(x, n_heads):
    # (B, L, d) -> (B, H, L, d/H)
    batch, seq_len, dim = x.shape
    return x.reshape(batch, seq_len, n_heads, dim // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    # (B, H, L, d/H) -> (B, L, d)
    batch, n_heads, seq_len, head_dim = x.shape
    return x.transpose(0, 2, 1, 3).reshape(batch, seq_len, n_heads * head_dim)


def _attention_forward(x, lp: LayerParameters, n_heads: int):
    q = x @ lp.wq + lp.bq
    k = x @ lp.wk + lp.bk
    v = x @ lp.wv + lp.bv
    qh, kh, vh = (_split_heads(t, n_heads) for t in (q, k, v))
    scale = 1.0 / np.sqrt(qh.shape[-1])
    scores = (qh @ kh.transpose(0, 1, 3, 2)) * scale
    probs = softmax(scores, axis=-1)
    context = _merge_heads(probs @ vh)
    out = context @ lp.wo + lp.bo
    cache = (x, qh, kh, vh, probs, context, scale)
    return out, cache


def _attention_backward(dout, cache, lp: LayerParameters, glp: LayerParameters, n_heads: int):
    x, qh, kh, vh, probs, context, scale = cache
    glp.wo += _stacked_outer(context, dout)
    glp.bo += dout.sum(axis=(0, 1))
    dcontext = _split_heads(dout @ lp.wo.T, n_heads)

    dprobs = dcontext @ vh.transpose(0, 1, 3, 2)
    dvh = probs.transpose(0, 1, 3, 2) @ dcontext
    # Jacobian of a row-wise softmax.
    dscores = probs * (dprobs - np.sum(dprobs * probs, axis=-1, keepdims=True))
    dqh = (dscores @ kh) * scale
    dkh = (dscores.transpose(0, 1, 3, 2) @ qh) * scale

    dq, dk, dv = (_merge_heads(t) for t in (dqh, dkh, dvh))
    glp.wq += _stacked_outer(x, dq)
    glp.bq += dq.sum(axis=(0, 1))
    glp.wk += _stacked_outer(x, dk)
    glp.bk += dk.sum(axis=(0, 1))
    glp.wv += _stacked_outer(x, dv)
    glp.bv += dv.sum(axis=(0, 1))
    return dq @ lp.wq.T + dk @ lp.wk.T + dv @ lp.wv.T


# ---------------------------------------------------------------------------
# Feed-forward
# ---------------------------------------------------------------------------


def _ff_forward(x, lp: LayerParameters):
    pre = x @ lp.w1 + lp.b1
    hidden = gelu(pre)
    out = hidden @ lp.w2 + lp.b2
    return out, (x, pre, hidden)


def _ff_backward(dout, cache, lp: LayerParameters, glp: LayerParameters):
    x, pre, hidden = cache
    glp.w2 += _stacked_outer(hidden, dout)
    glp.b2 += dout.sum(axis=(0, 1))
    dpre = (dout @ lp.w2.T) * gelu_grad(pre)
    glp.w1 += _stacked_outer(x, dpre)
    glp.b1 += dpre.sum(axis=(0, 1))
    return dpre @ lp.w1.T


# ---------------------------------------------------------------------------
# Full encoder
# ---------------------------------------------------------------------------


def _dropout_mask(shape, p: float, rng: np.random.Generator):
    return (rng.random(shape) >= p) / (1.0 - p)


def encoder_forward(
    x: np.ndarray,
    params: Parameters,
    cfg: ModelConfig,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[np.ndarray, list, List[np.ndarray]]:
    """Run every encoder layer; returns (h, caches, attention_probs).

    ``attention_probs`` holds one (B, H, L, L) array per layer.  Dropout
    requires ``train_mode`` and a generator; inference never drops.
    """
    use_dropout = train_mode and cfg.dropout_p > 0.0
    if use_dropout and rng is None:
        raise ModelError("dropout requires a random generator in train mode")
    caches = []
    attention_probs = []
    for lp in params.layers:
        n1, ln1_cache = _layer_norm_forward(x, lp.ln1_gain, lp.ln1_bias)
        attn_out, attn_cache = _attention_forward(n1, lp, cfg.attention_heads)
        attn_mask = None
        if use_dropout:
            attn_mask = _dropout_mask(attn_out.shape, cfg.dropout_p, rng)
            attn_out = attn_out * attn_mask
        x1 = x + attn_out

        n2, ln2_cache = _layer_norm_forward(x1, lp.ln2_gain, lp.ln2_bias)
        ff_out, ff_cache = _ff_forward(n2, lp)
        ff_mask = None
        if use_dropout:
            ff_mask = _dropout_mask(ff_out.shape, cfg.dropout_p, rng)
            ff_out = ff_out * ff_mask
        x = x1 + ff_out

        caches.append((ln1_cache, attn_cache, attn_mask, ln2_cache, ff_cache, ff_mask))
        attention_probs.append(attn_cache[4])
    final_cache = None
    if params.layers:
        x, final_cache = _layer_norm_forward(x, params.final_gain, params.final_bias)
    caches.append(final_cache)
    return x, caches, attention_probs


def encoder_backward(
    dh: np.ndarray, caches: list, params: Parameters, cfg: ModelConfig, grads: Parameters
) -> np.ndarray:
    final_cache = caches[-1]
    dx = dh
    if final_cache is not None:
        dx, dgain, dbias = _layer_norm_backward(dh, final_cache, params.final_gain)
        grads.final_gain += dgain
        grads.final_bias += dbias
    for lp, glp, cache in zip(
        reversed(params.layers), reversed(grads.layers), reversed(caches[:-1])
    ):
        ln1_cache, attn_cache, attn_mask, ln2_cache, ff_cache, ff_mask = cache
        dff_out = dx if ff_mask is None else dx * ff_mask
        dn2 = _ff_backward(dff_out, ff_cache, lp, glp)
        dr2, dgain2, dbias2 = _layer_norm_backward(dn2, ln2_cache, lp.ln2_gain)
        glp.ln2_gain += dgain2
        glp.ln2_bias += dbias2
        dx1 = dx + dr2

        dattn_out = dx1 if attn_mask is None else dx1 * attn_mask
        dn1 = _attention_backward(dattn_out, attn_cache, lp, glp, cfg.attention_heads)
        dr1, dgain1, dbias1 = _layer_norm_backward(dn1, ln1_cache, lp.ln1_gain)
        glp.ln1_gain += dgain1
        glp.ln1_bias += dbias1
        dx = dx1 + dr1
    return dx


# ---------------------------------------------------------------------------
# Prediction heads
# ---------------------------------------------------------------------------


def heads_forward(h: np.ndarray, params: Parameters) -> Tuple[np.ndarray, np.ndarray]:
    """CLS-row sentence logits and per-position span logits.

    Returns ``sent_logits`` (B, 2) and ``span_logits`` (B, L-1, 2); span
    channel 0 is the start logit and channel 1 the end logit of each
    non-CLS position.  The start/end softmaxes over positions are taken by
    the loss/prediction layer, never over the CLS row.
    """
    if h.shape[1] < 2:
        raise ModelError("heads need CLS plus at least one token position")
    sent_logits = h[:, 0, :] @ params.sent_w + params.sent_b
    span_logits = h[:, 1:, :] @ params.span_w + params.span_b
    return sent_logits, span_logits


def heads_backward(
    dsent_logits: np.ndarray,
    dspan_logits: np.ndarray,
    h: np.ndarray,
    params: Parameters,
    grads: Parameters,
) -> np.ndarray:
    dh = np.zeros_like(h)
    grads.sent_w += h[:, 0, :].T @ dsent_logits
    grads.sent_b += dsent_logits.sum(axis=0)
    dh[:, 0, :] = dsent_logits @ params.sent_w.T
    grads.span_w += _stacked_outer(h[:, 1:, :], dspan_logits)
    grads.span_b += dspan_logits.sum(axis=(0, 1))
    dh[:, 1:, :] = dspan_logits @ params.span_w.T
    return dh
