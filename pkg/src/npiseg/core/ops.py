"""Differentiable building blocks: MLPs, attention, Gaussian ops, losses.

Parameter naming convention: an MLP under prefix ``p`` owns ``p.l{i}.w``
and ``p.l{i}.b``; an attention block under ``p`` owns ``p.{wq,wk,wv,wo}.{w,b}``
plus a two-layer feed-forward ``p.ff0`` / ``p.ff1``.
"""

from __future__ import annotations

import numpy as np

from .params import Gaussian, ParamStore
from .rng import RngStream
from .tensor import (Tensor, as_tensor, clamp_min, exp, log, matmul, relu,
                     softplus, sqrt, tanh, tsum)

__all__ = [
    "init_mlp", "mlp_apply", "init_attention", "attention_apply",
    "cross_attention_apply", "gaussian_kl", "gaussian_sample",
    "reparameterize", "cosine_similarity", "cosine_matrix",
    "softmax", "log_softmax", "cross_entropy_loss", "dice_loss",
]

ACTIVATIONS = {"relu": relu, "tanh": tanh, "softplus": softplus}

COSINE_EPS = 1e-8
DICE_SMOOTHING = 1.0


# -- multi-layer perceptron -------------------------------------------------

def init_mlp(params: ParamStore, prefix: str, widths: list[int],
             scale: float = 1.0) -> None:
    """Allocate an MLP with the given layer widths (len(widths)-1 layers)."""
    for i in range(len(widths) - 1):
        params.dense(f"{prefix}.l{i}", widths[i], widths[i + 1], scale=scale)


def mlp_apply(x: Tensor, params: ParamStore, prefix: str, depth: int,
              activation: str = "relu") -> Tensor:
    """Affine layers with an activation between them, none after the last."""
    act = ACTIVATIONS[activation]
    h = as_tensor(x)
    for i in range(depth):
        w = params[f"{prefix}.l{i}.w"]
        b = params[f"{prefix}.l{i}.b"]
        if h.shape[-1] != w.shape[0]:
            raise ValueError(
                f"{prefix}.l{i}: input width {h.shape[-1]} != {w.shape[0]}")
        h = matmul(h, w) + b
        if i < depth - 1:
            h = act(h)
    return h


# -- single-head attention ----------------------------------------------------

def init_attention(params: ParamStore, prefix: str, d: int) -> None:
    for name in ("wq", "wv", "wo"):
        params.dense(f"{prefix}.{name}", d, d)
    # no key bias: it shifts every score in a row equally, which the
    # softmax cancels, so it would be a pure null direction
    params.linear(f"{prefix}.wk", d, d)
    params.dense(f"{prefix}.ff0", d, d)
    params.dense(f"{prefix}.ff1", d, d)


def cross_attention_apply(queries: Tensor, context: Tensor,
                          params: ParamStore, prefix: str) -> Tensor:
    """Scaled dot-product attention of query tokens over context tokens,
    with residual connections around attention and a position-wise
    feed-forward sublayer. No positional encoding, so the result is
    equivariant to permutations of the query tokens."""
    d = queries.shape[-1]
    if context.shape[-1] != d:
        raise ValueError("query/context width mismatch")
    q = matmul(queries, params[f"{prefix}.wq.w"]) + params[f"{prefix}.wq.b"]
    k = matmul(context, params[f"{prefix}.wk.w"])
    v = matmul(context, params[f"{prefix}.wv.w"]) + params[f"{prefix}.wv.b"]
    scores = matmul(q, k.T) * (1.0 / np.sqrt(d))
    attn = softmax(scores, axis=1)
    pooled = matmul(attn, v)
    h = queries + matmul(pooled, params[f"{prefix}.wo.w"]) + params[f"{prefix}.wo.b"]
    ff = matmul(relu(matmul(h, params[f"{prefix}.ff0.w"]) + params[f"{prefix}.ff0.b"]),
                params[f"{prefix}.ff1.w"]) + params[f"{prefix}.ff1.b"]
    return h + ff


def attention_apply(tokens: Tensor, params: ParamStore, prefix: str) -> Tensor:
    """Self-attention round over a token sequence (tokens attend to all)."""
    return cross_attention_apply(tokens, tokens, params, prefix)


# -- Gaussian operations -----------------------------------------------------

def gaussian_kl(q: Gaussian, p: Gaussian) -> Tensor:
    """KL(q || p) for diagonal Gaussians, in closed form.

    Exactly zero when q and p carry equal parameters: every term is
    computed so that the self-KL cancels without rounding residue.
    """
    if q.dim != p.dim:
        raise ValueError(f"dimension mismatch: {q.dim} vs {p.dim}")
    ratio = p.stddev / q.stddev
    diff = q.mean - p.mean
    quad = (q.stddev * q.stddev + diff * diff) / (2.0 * (p.stddev * p.stddev))
    return tsum(log(ratio) + quad - 0.5)


def reparameterize(dist: Gaussian, eps: np.ndarray) -> Tensor:
    """mu + sigma * eps with eps held constant; gradients flow to mu and sigma."""
    return dist.mean + dist.stddev * Tensor(np.asarray(eps, dtype=dist.mean.dtype))


def gaussian_sample(dist: Gaussian, rng: RngStream) -> Tensor:
    eps = rng.normal(dist.mean.data.shape, dtype=dist.mean.dtype)
    return reparameterize(dist, eps)


# -- similarity ---------------------------------------------------------------

def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """a.b / max(|a||b|, eps), in [-1, 1].

    The floor (rather than an additive eps) keeps the value exactly
    invariant to positive rescaling of either argument away from the
    degenerate near-zero-norm regime.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    dot = tsum(a * b)
    na = sqrt(tsum(a * a))
    nb = sqrt(tsum(b * b))
    return dot / clamp_min(na * nb, COSINE_EPS)


def cosine_matrix(x: Tensor, protos: Tensor) -> Tensor:
    """Pairwise cosine similarities between rows of x (N,d) and protos (P,d)."""
    dots = matmul(x, protos.T)
    nx = sqrt(tsum(x * x, axis=1, keepdims=True))
    npr = sqrt(tsum(protos * protos, axis=1, keepdims=True))
    return dots / clamp_min(matmul(nx, npr.T), COSINE_EPS)


# -- losses -------------------------------------------------------------------

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shift = Tensor(x.data.max(axis=axis, keepdims=True))  # constant, cancels
    e = exp(x - shift)
    return e / tsum(e, axis=axis, keepdims=True)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shift = Tensor(x.data.max(axis=axis, keepdims=True))
    centered = x - shift
    return centered - log(tsum(exp(centered), axis=axis, keepdims=True))


def cross_entropy_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean negative log-likelihood of integer labels under row softmax."""
    labels = np.asarray(labels, dtype=np.intp)
    n, k = logits.shape
    if labels.shape != (n,):
        raise ValueError("labels must be one int per row of logits")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError(f"label out of range 0..{k - 1}")
    onehot = np.zeros((n, k), dtype=logits.dtype)
    onehot[np.arange(n), labels] = 1.0
    ls = log_softmax(logits, axis=1)
    return -tsum(ls * Tensor(onehot)) * (1.0 / n)


def dice_loss(probs: Tensor, labels: np.ndarray) -> Tensor:
    """Smoothed soft-dice averaged over the classes present in labels.

    For class c: 1 - (2*sum(p_c*g_c) + 1) / (sum(p_c) + sum(g_c) + 1).
    Zero exactly for one-hot-perfect predictions.
    """
    labels = np.asarray(labels, dtype=np.intp)
    n, k = probs.shape
    if labels.shape != (n,):
        raise ValueError("labels must be one int per row of probs")
    if np.any(probs.data < -1e-9) or np.any(np.abs(probs.data.sum(axis=1) - 1.0) > 1e-6):
        raise ValueError("probs rows must be nonnegative and sum to 1")
    onehot = np.zeros((n, k), dtype=probs.dtype)
    onehot[np.arange(n), labels] = 1.0
    g = Tensor(onehot)
    s = DICE_SMOOTHING
    inter = tsum(probs * g, axis=0)
    psum = tsum(probs, axis=0)
    gsum = tsum(g, axis=0)
    per_class = 1.0 - (2.0 * inter + s) / (psum + gsum + s)
    # mean over the classes that actually occur in labels
    present = np.unique(labels)
    mask = np.zeros(k, dtype=probs.dtype)
    mask[present] = 1.0 / len(present)
    return tsum(per_class * Tensor(mask))
