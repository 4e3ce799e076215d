"""Perception encoder: a shared pointwise feature pyramid over (x, y, z)
and time-aware attention pooling that softmax-weights points by recency,
yielding one global conditioning feature. Forward and backward passes are
written out explicitly in float64 so gradients are exact.

A max-pooling sibling over the newest frame's points is provided for the
no-attention ablation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .pointcloud import AggregatedCloud

DEFAULT_WIDTHS = (32, 64, 128)
DEFAULT_HEAD_HIDDEN = 16

_ACTIVATIONS = ("relu", "tanh", "identity")


# --------------------------------------------------------------------------
# Dense layers


@dataclass
class DenseLayer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "relu"

    def __post_init__(self) -> None:
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64).reshape(-1)
        if self.weight.ndim != 2 or self.weight.shape[0] != self.bias.shape[0]:
            raise ValueError("inconsistent dense layer shapes")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation '{self.activation}'")
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValueError("layer parameters must be finite")


def init_dense(rng: np.random.Generator, n_out: int, n_in: int, activation: str) -> DenseLayer:
    # He scaling for relu, Glorot-style otherwise; biases start at zero.
    std = np.sqrt((2.0 if activation == "relu" else 1.0) / n_in)
    return DenseLayer(rng.normal(0.0, std, size=(n_out, n_in)), np.zeros(n_out), activation)


def _act(tag: str, pre: np.ndarray) -> np.ndarray:
    if tag == "relu":
        return np.maximum(pre, 0.0)
    if tag == "tanh":
        return np.tanh(pre)
    return pre


def _act_grad(tag: str, pre: np.ndarray, out: np.ndarray) -> np.ndarray:
    if tag == "relu":
        return (pre > 0.0).astype(np.float64)
    if tag == "tanh":
        return 1.0 - out * out
    return np.ones_like(pre)


def mlp_forward(layers: Sequence[DenseLayer], x: np.ndarray):
    """Run a stack of dense layers over rows of x; returns (y, cache)."""
    cache = []
    for layer in layers:
        pre = x @ layer.weight.T + layer.bias
        out = _act(layer.activation, pre)
        cache.append((x, pre, out))
        x = out
    return x, cache


def mlp_backward(layers: Sequence[DenseLayer], cache, d_out: np.ndarray):
    """Backprop through mlp_forward; returns ([(dW, db), ...], d_in)."""
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(layers)  # type: ignore[list-item]
    for i in reversed(range(len(layers))):
        x, pre, out = cache[i]
        d_pre = d_out * _act_grad(layers[i].activation, pre, out)
        flat_x = x.reshape(-1, x.shape[-1])
        flat_d = d_pre.reshape(-1, d_pre.shape[-1])
        grads[i] = (flat_d.T @ flat_x, flat_d.sum(axis=0))
        d_out = d_pre @ layers[i].weight
    return grads, d_out


# --------------------------------------------------------------------------
# Encoder components


@dataclass
class PointFeatureEncoder:
    """Pyramid of dense layers applied identically to every point's xyz."""

    layers: list[DenseLayer]

    def __post_init__(self) -> None:
        if self.layers[0].weight.shape[1] != 3:
            raise ValueError("first layer must consume 3 coordinates")

    @property
    def feature_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    @staticmethod
    def create(widths: Sequence[int] = DEFAULT_WIDTHS, seed: int = 0) -> "PointFeatureEncoder":
        rng = np.random.Generator(np.random.PCG64(seed))
        dims = [3, *widths]
        layers = [
            init_dense(rng, dims[i + 1], dims[i], "relu" if i < len(widths) - 1 else "identity")
            for i in range(len(widths))
        ]
        return PointFeatureEncoder(layers)


@dataclass
class TemporalAttentionHead:
    """Small MLP mapping a point's recency tag t_rel to an attention logit."""

    layers: list[DenseLayer]

    def __post_init__(self) -> None:
        if self.layers[0].weight.shape[1] != 1 or self.layers[-1].weight.shape[0] != 1:
            raise ValueError("attention head maps one scalar to one logit")

    @staticmethod
    def create(hidden: int = DEFAULT_HEAD_HIDDEN, seed: int = 0) -> "TemporalAttentionHead":
        rng = np.random.Generator(np.random.PCG64(seed))
        return TemporalAttentionHead(
            [init_dense(rng, hidden, 1, "tanh"), init_dense(rng, 1, hidden, "identity")]
        )


@dataclass
class EncoderGrads:
    """Per-layer (dW, db) pairs for the point encoder and the attention head."""

    encoder: list[tuple[np.ndarray, np.ndarray]]
    head: list[tuple[np.ndarray, np.ndarray]]


def encode_points(enc: PointFeatureEncoder, cloud: AggregatedCloud) -> np.ndarray:
    """Per-point features (n, D); row i depends only on point i."""
    out, _ = mlp_forward(enc.layers, cloud.xyz)
    return out


def attention_weights(head: TemporalAttentionHead, cloud: AggregatedCloud) -> np.ndarray:
    """Softmax over per-point recency logits; positive, sums to 1."""
    logits, _ = mlp_forward(head.layers, cloud.t_rel[:, None])
    return _softmax(logits[:, 0])


def _softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def tap_pool(features: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Attention-weighted sum of feature rows."""
    features = np.asarray(features, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if features.ndim != 2 or weights.ndim != 1 or features.shape[0] != weights.shape[0]:
        raise ValueError("features must be (n, d) with one weight per row")
    if abs(float(weights.sum()) - 1.0) > 1e-6:
        raise ValueError("attention weights must sum to 1")
    return weights @ features


def encoder_forward(
    enc: PointFeatureEncoder, head: TemporalAttentionHead, cloud: AggregatedCloud
) -> np.ndarray:
    """Global conditioning feature of one aggregated cloud."""
    g, _ = _forward_cached(enc, head, cloud.xyz[None], cloud.t_rel[None])
    return g[0]


def encoder_backward(
    enc: PointFeatureEncoder,
    head: TemporalAttentionHead,
    cloud: AggregatedCloud,
    upstream: np.ndarray,
) -> EncoderGrads:
    """Exact parameter gradients of upstream . g, including the softmax
    coupling between recency logits and the pooled feature."""
    _, cache = _forward_cached(enc, head, cloud.xyz[None], cloud.t_rel[None])
    upstream = np.asarray(upstream, dtype=np.float64).reshape(1, -1)
    return _backward_cached(enc, head, cache, upstream)


# --------------------------------------------------------------------------
# Batched core (training path)


def _forward_cached(enc, head, xyz: np.ndarray, t_rel: np.ndarray):
    """xyz (B, N, 3), t_rel (B, N) -> g (B, D) plus cache for backward."""
    feats, feat_cache = mlp_forward(enc.layers, xyz)
    logits, head_cache = mlp_forward(head.layers, t_rel[..., None])
    weights = _softmax(logits[..., 0])
    g = np.einsum("bn,bnd->bd", weights, feats)
    return g, (feat_cache, head_cache, feats, weights)


def _backward_cached(enc, head, cache, d_g: np.ndarray) -> EncoderGrads:
    feat_cache, head_cache, feats, weights = cache
    d_feats = weights[..., None] * d_g[:, None, :]
    d_weights = np.einsum("bd,bnd->bn", d_g, feats)
    # softmax backward: dlogit_i = w_i (dw_i - sum_j w_j dw_j)
    d_logits = weights * (d_weights - (weights * d_weights).sum(axis=-1, keepdims=True))
    enc_grads, _ = mlp_backward(enc.layers, feat_cache, d_feats)
    head_grads, _ = mlp_backward(head.layers, head_cache, d_logits[..., None])
    return EncoderGrads(enc_grads, head_grads)


def encoder_forward_batch(enc, head, xyz: np.ndarray, t_rel: np.ndarray):
    """Batched forward used by training; returns (g, cache)."""
    return _forward_cached(enc, head, xyz, t_rel)


def encoder_backward_batch(enc, head, cache, d_g: np.ndarray) -> EncoderGrads:
    """Gradients summed over the batch in a fixed order."""
    return _backward_cached(enc, head, cache, d_g)


# --------------------------------------------------------------------------
# Max-pooling sibling (ablation without time-aware attention)


def max_pool_forward(enc: PointFeatureEncoder, cloud: AggregatedCloud) -> np.ndarray:
    """Elementwise max over per-point features of a single-frame cloud."""
    g, _ = max_pool_forward_batch(enc, cloud.xyz[None])
    return g[0]


def max_pool_forward_batch(enc: PointFeatureEncoder, xyz: np.ndarray):
    feats, feat_cache = mlp_forward(enc.layers, xyz)
    arg = feats.argmax(axis=1)  # (B, D)
    g = np.take_along_axis(feats, arg[:, None, :], axis=1)[:, 0, :]
    return g, (feat_cache, feats.shape, arg)


def max_pool_backward_batch(enc: PointFeatureEncoder, cache, d_g: np.ndarray):
    """Routes the upstream gradient to each feature's argmax point."""
    feat_cache, shape, arg = cache
    d_feats = np.zeros(shape)
    np.put_along_axis(d_feats, arg[:, None, :], d_g[:, None, :], axis=1)
    enc_grads, _ = mlp_backward(enc.layers, feat_cache, d_feats)
    return EncoderGrads(enc_grads, [])
