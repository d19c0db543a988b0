"""Video encoder: patch tokens, divided space-time attention, CLS readout.

Frames are cut into non-overlapping square patches, projected, tagged with
learned temporal (per frame) and spatial (per patch position) embedding rows,
and prefixed with a learned CLS token.  Each block then runs attention twice:
a temporal pass where each patch position attends across frames, and a
spatial pass where each frame's patches attend to each other and to CLS.

Residual wiring inside a block is deliberately non-standard: the spatial
attention output adds back to the block *input*, not to the temporal
sublayer's output.  That is the one place this architecture departs from a
plain ViT block, and the tests pin it.
"""

from __future__ import annotations

import numpy as np

from . import tensor as tn
from .errors import ConfigError, ShapeError
from .nn import FeedForward, LayerNorm, LinearMap, MultiHeadAttention
from .params import ParameterStore
from .tensor import Tensor


def patch_count(height: int, width: int, patch: int) -> int:
    """Patches per frame: H·W / P² with divisibility enforced."""
    if height % patch or width % patch:
        raise ConfigError(
            f"frame size {height}x{width} not divisible by patch size {patch}")
    return (height * width) // (patch * patch)


def patchify(frames: Tensor, patch: int) -> Tensor:
    """(B, T, 3, H, W) -> (B, T, N, 3·P²), raster order within each frame."""
    b, t, c, h, w = frames.shape
    if c != 3:
        raise ShapeError(f"expected 3 channels, got {c}")
    n = patch_count(h, w, patch)
    hp, wp = h // patch, w // patch
    x = tn.reshape(frames, (b, t, c, hp, patch, wp, patch))
    x = tn.transpose(x, (0, 1, 3, 5, 2, 4, 6))
    return tn.reshape(x, (b, t, n, c * patch * patch))


class SpaceTimeBlock:
    """One divided space-time attention block over (B, 1+T·N, d) tokens."""

    def __init__(self, store: ParameterStore, name: str, d: int, num_heads: int):
        self.ln_t = LayerNorm(store, f"{name}/ln_t", d)
        self.attn_t = MultiHeadAttention(store, f"{name}/attn_t", d, num_heads)
        self.ln_s = LayerNorm(store, f"{name}/ln_s", d)
        self.attn_s = MultiHeadAttention(store, f"{name}/attn_s", d, num_heads)
        self.ln_m = LayerNorm(store, f"{name}/ln_m", d)
        self.mlp = FeedForward(store, f"{name}/mlp", d)

    def __call__(self, x: Tensor, num_frames: int, patches_per_frame: int) -> Tensor:
        b, s, d = x.shape
        t, n = num_frames, patches_per_frame
        if s != 1 + t * n:
            raise ShapeError(f"token count {s} != 1 + {t}*{n}")

        # temporal pass: each patch position attends across frames; CLS skips it
        h = self.ln_t(x)
        h_patches = tn.reshape(h[:, 1:], (b, t, n, d))
        by_position = tn.transpose(h_patches, (0, 2, 1, 3))           # (B, N, T, d)
        t_out = tn.transpose(self.attn_t(by_position), (0, 2, 1, 3))  # (B, T, N, d)
        a_patches = tn.reshape(x[:, 1:], (b, t, n, d)) + t_out
        a = tn.concat([x[:, 0:1], tn.reshape(a_patches, (b, t * n, d))], axis=1)

        # spatial pass: per frame over [CLS; that frame's patches], plus one
        # global CLS pass over all T*N patch tokens; CLS updates are averaged
        h2 = self.ln_s(a)
        h2_cls = h2[:, 0:1]                                           # (B, 1, d)
        h2_patches = tn.reshape(h2[:, 1:], (b, t, n, d))
        cls_tiled = tn.broadcast_to(tn.reshape(h2_cls, (b, 1, 1, d)), (b, t, 1, d))
        per_frame = tn.concat([cls_tiled, h2_patches], axis=2)        # (B, T, 1+N, d)
        s_out = self.attn_s(per_frame)
        s_patches = tn.reshape(s_out[:, :, 1:], (b, t * n, d))
        cls_global = self.attn_s(h2_cls, kv=tn.reshape(h2_patches, (b, t * n, d)))
        cls_update = (s_out[:, :, 0].sum(axis=1, keepdims=True)
                      + cls_global) / float(t + 1)
        # residual to the block input, not to the temporal output
        update = tn.concat([cls_update, s_patches], axis=1)
        bmid = x + update

        return bmid + self.mlp(self.ln_m(bmid))


class VisualEncoder:
    """Patch projection + positional tables + L space-time blocks + CLS norm."""

    def __init__(self, store: ParameterStore, d_vis: int, patch: int,
                 height: int, width: int, max_frames: int,
                 num_layers: int, num_heads: int):
        self.d_vis = d_vis
        self.patch = patch
        self.height = height
        self.width = width
        self.max_frames = max_frames
        self.n = patch_count(height, width, patch)
        self.proj = LinearMap(store, "visual/patch_proj", 3 * patch * patch, d_vis)
        self.cls = store.add("visual/cls", (1, d_vis))
        self.pos_temporal = store.add("visual/pos_temporal", (max_frames, d_vis))
        self.pos_spatial = store.add("visual/pos_spatial", (self.n, d_vis))
        self.blocks = [SpaceTimeBlock(store, f"visual/block{i}", d_vis, num_heads)
                       for i in range(num_layers)]
        self.out_ln = LayerNorm(store, "visual/out_ln", d_vis)

    def embed(self, frames: Tensor) -> Tensor:
        """(B, T, 3, H, W) -> (B, 1+T·N, d) with positions added, CLS at 0.

        Token (frame t, patch p) sits at index 1 + t·N + p and receives
        temporal row t plus spatial row p; CLS receives no positional row.
        """
        b, t = frames.shape[0], frames.shape[1]
        if t < 1 or t > self.max_frames:
            raise ConfigError(
                f"clip has {t} frames; this model holds temporal rows for "
                f"1..{self.max_frames}")
        tokens = self.proj(patchify(frames, self.patch))              # (B, T, N, d)
        temporal = tn.reshape(self.pos_temporal[0:t], (1, t, 1, self.d_vis))
        spatial = tn.reshape(self.pos_spatial, (1, 1, self.n, self.d_vis))
        tokens = tokens + temporal + spatial
        flat = tn.reshape(tokens, (b, t * self.n, self.d_vis))
        cls = tn.broadcast_to(tn.reshape(self.cls, (1, 1, self.d_vis)),
                              (b, 1, self.d_vis))
        return tn.concat([cls, flat], axis=1)

    def __call__(self, frames: Tensor) -> Tensor:
        """Encode (B, T, 3, H, W) clips to (B, d_vis) CLS embeddings."""
        t = frames.shape[1]
        x = self.embed(frames)
        for block in self.blocks:
            x = block(x, t, self.n)
        return self.out_ln(x[:, 0])
