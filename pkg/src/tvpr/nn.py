"""Transformer building blocks shared by every encoder.

All layers operate on token arrays of shape (*leading, S, d): any number of
leading batch axes is allowed, so the visual encoder can fold (batch, frame)
or (batch, patch) grouping axes in front of the sequence axis and run one
vectorized attention call per grouping.
"""

from __future__ import annotations

import numpy as np

from . import tensor as tn
from .errors import ConfigError
from .params import ParameterStore
from .tensor import MASK_FILL, Tensor


class LinearMap:
    """Affine map y = x W + b with W (d_in, d_out)."""

    def __init__(self, store: ParameterStore, name: str, d_in: int, d_out: int):
        self.w = store.add(f"{name}/w", (d_in, d_out))
        self.b = store.add(f"{name}/b", (d_out,), init="zeros")

    def __call__(self, x: Tensor) -> Tensor:
        return tn.matmul(x, self.w) + self.b


class LayerNorm:
    def __init__(self, store: ParameterStore, name: str, d: int):
        self.gain = store.add(f"{name}/gain", (d,), init="ones")
        self.bias = store.add(f"{name}/bias", (d,), init="zeros")

    def __call__(self, x: Tensor) -> Tensor:
        return tn.layer_norm(x, self.gain, self.bias)


def split_heads(x: Tensor, num_heads: int) -> Tensor:
    """(*L, S, d) -> (*L, H, S, d/H)."""
    *lead, s, d = x.shape
    head_dim = d // num_heads
    x = tn.reshape(x, (*lead, s, num_heads, head_dim))
    nd = x.ndim
    perm = list(range(nd - 3)) + [nd - 2, nd - 3, nd - 1]
    return tn.transpose(x, perm)


def merge_heads(x: Tensor) -> Tensor:
    """(*L, H, S, d/H) -> (*L, S, d)."""
    nd = x.ndim
    perm = list(range(nd - 3)) + [nd - 2, nd - 3, nd - 1]
    x = tn.transpose(x, perm)
    *lead, s, h, head_dim = x.shape
    return tn.reshape(x, (*lead, s, h * head_dim))


def key_mask_bias(mask: np.ndarray) -> np.ndarray:
    """Boolean keep-mask over keys -> additive attention bias.

    mask has shape (*L, S_k); the returned bias broadcasts over heads and
    query positions as (*L, 1, 1, S_k).
    """
    mask = np.asarray(mask, dtype=bool)
    bias = np.where(mask, 0.0, MASK_FILL).astype(np.float32)
    return np.expand_dims(np.expand_dims(bias, -2), -2)


class MultiHeadAttention:
    """Scaled dot-product attention with learned q/k/v/out projections.

    Self-attention by default; pass ``kv`` for cross-attention (queries from
    one token set, keys and values from another).  ``key_mask`` marks which
    key positions are real (True) versus padding (False).
    """

    def __init__(self, store: ParameterStore, name: str, d: int, num_heads: int):
        if d % num_heads:
            raise ConfigError(f"model width {d} not divisible by {num_heads} heads")
        self.num_heads = num_heads
        self.scale = 1.0 / float(np.sqrt(d // num_heads))
        self.wq = LinearMap(store, f"{name}/wq", d, d)
        self.wk = LinearMap(store, f"{name}/wk", d, d)
        self.wv = LinearMap(store, f"{name}/wv", d, d)
        self.wo = LinearMap(store, f"{name}/wo", d, d)

    def __call__(self, x: Tensor, kv: Tensor | None = None,
                 key_mask: np.ndarray | None = None) -> Tensor:
        source = x if kv is None else kv
        q = split_heads(self.wq(x), self.num_heads)
        k = split_heads(self.wk(source), self.num_heads)
        v = split_heads(self.wv(source), self.num_heads)
        nd = k.ndim
        scores = tn.matmul(q, tn.transpose(k, list(range(nd - 2)) + [nd - 1, nd - 2]))
        scores = scores * self.scale
        if key_mask is not None:
            scores = scores + Tensor(key_mask_bias(key_mask))
        attn = tn.softmax(scores, axis=-1)
        return self.wo(merge_heads(tn.matmul(attn, v)))


class FeedForward:
    """Two-layer position-wise MLP with a GELU between (hidden = ratio * d)."""

    def __init__(self, store: ParameterStore, name: str, d: int, ratio: int = 4):
        self.lin1 = LinearMap(store, f"{name}/lin1", d, ratio * d)
        self.lin2 = LinearMap(store, f"{name}/lin2", ratio * d, d)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(tn.gelu(self.lin1(x)))


class TransformerBlock:
    """Pre-layer-norm residual block: MSA sublayer then MLP sublayer.

    Dropout, when active (train=True, rate > 0), is applied to each
    sublayer's output before the residual addition.
    """

    def __init__(self, store: ParameterStore, name: str, d: int, num_heads: int,
                 dropout: float = 0.0):
        self.ln1 = LayerNorm(store, f"{name}/ln1", d)
        self.attn = MultiHeadAttention(store, f"{name}/attn", d, num_heads)
        self.ln2 = LayerNorm(store, f"{name}/ln2", d)
        self.mlp = FeedForward(store, f"{name}/mlp", d)
        self.dropout = dropout

    def _drop(self, x: Tensor, train: bool, rng: np.random.Generator | None) -> Tensor:
        if train and self.dropout > 0.0:
            if rng is None:
                raise ConfigError("training-mode dropout needs a random generator")
            return tn.dropout(x, self.dropout, rng)
        return x

    def __call__(self, x: Tensor, key_mask: np.ndarray | None = None,
                 train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        h = x + self._drop(self.attn(self.ln1(x), key_mask=key_mask), train, rng)
        return h + self._drop(self.mlp(self.ln2(h)), train, rng)


class TransformerEncoder:
    """A stack of pre-layer-norm blocks; returns tokens, no final norm.

    A zero-layer stack is the identity, so callers that read a single row
    out of the stack see exactly their input embedding in that case.
    """

    def __init__(self, store: ParameterStore, name: str, d: int, num_heads: int,
                 num_layers: int, dropout: float = 0.0):
        self.blocks = [TransformerBlock(store, f"{name}/block{i}", d, num_heads, dropout)
                       for i in range(num_layers)]

    def __call__(self, x: Tensor, key_mask: np.ndarray | None = None,
                 train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        for block in self.blocks:
            x = block(x, key_mask=key_mask, train=train, rng=rng)
        return x
