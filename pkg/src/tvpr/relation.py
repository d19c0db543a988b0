"""Shared-space projection, the relation score, and the contrastive loss.

Caption and video embeddings are linearly projected into one d_RN space.
The default relation score is the scaled-shifted cosine (cos + 1) / 2, a
parameter-free scalar in [0, 1]; a small learned MLP head with a sigmoid
output can be enabled instead.

The loss is the batch contrastive objective over the B x B score matrix
whose entry (j, i) relates caption j to video i.  Its published form leaves
the positive pair out of the denominator (``paper_exclusive``, the default,
which permits unbounded negative loss); ``standard_inclusive`` keeps it.  An
optional symmetric mode averages the caption-to-video direction with the
video-to-caption direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as tn
from .errors import ConfigError, DegenerateEmbeddingError, ShapeError
from .nn import LinearMap
from .params import ParameterStore
from .tensor import MASK_FILL, Tensor

DENOMINATOR_MODES = ("paper_exclusive", "standard_inclusive")


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.05
    denominator_mode: str = "paper_exclusive"
    symmetric: bool = False

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.denominator_mode not in DENOMINATOR_MODES:
            raise ConfigError(
                f"denominator_mode {self.denominator_mode!r} not in {DENOMINATOR_MODES}")


def _normalize_rows(x: Tensor, side: str) -> Tensor:
    sq = (x * x).sum(axis=-1, keepdims=True)
    if (sq.data == 0.0).any():
        raise DegenerateEmbeddingError(
            f"{side} embedding has zero norm; cosine relation score is undefined")
    return x / tn.sqrt(sq)


def relation_scores(caps: Tensor, vids: Tensor) -> Tensor:
    """All pairwise scores: entry (j, i) = (cosine(cap_j, vid_i) + 1) / 2."""
    if caps.ndim != 2 or vids.ndim != 2 or caps.shape[1] != vids.shape[1]:
        raise ShapeError(
            f"caption block {caps.shape} and video block {vids.shape} disagree")
    cn = _normalize_rows(caps, "caption")
    vn = _normalize_rows(vids, "video")
    cos = tn.matmul(cn, tn.transpose(vn, (1, 0)))
    return (cos + 1.0) * 0.5


def relation_score(cap: Tensor, vid: Tensor) -> Tensor:
    """Single-pair form of :func:`relation_scores` (scalar in [0, 1])."""
    m = relation_scores(tn.reshape(cap, (1, cap.size)), tn.reshape(vid, (1, vid.size)))
    return tn.reshape(m, ())


class MLPRelationHead:
    """Learned alternative score: two-layer MLP over [cap; vid], sigmoid out."""

    def __init__(self, store: ParameterStore, d_rn: int, hidden: int | None = None):
        hidden = hidden or d_rn
        self.lin1 = LinearMap(store, "relation/mlp/lin1", 2 * d_rn, hidden)
        self.lin2 = LinearMap(store, "relation/mlp/lin2", hidden, 1)

    def __call__(self, caps: Tensor, vids: Tensor) -> Tensor:
        b_cap, d = caps.shape
        b_vid = vids.shape[0]
        c = tn.broadcast_to(tn.reshape(caps, (b_cap, 1, d)), (b_cap, b_vid, d))
        v = tn.broadcast_to(tn.reshape(vids, (1, b_vid, d)), (b_cap, b_vid, d))
        h = tn.gelu(self.lin1(tn.concat([c, v], axis=2)))
        logits = tn.reshape(self.lin2(h), (b_cap, b_vid))
        # sigmoid via tanh keeps every op in the differentiable core
        return (tn.tanh(logits * 0.5) + 1.0) * 0.5


def _one_direction(z: Tensor, mode: str) -> Tensor:
    """Mean over columns i of [z_ii - log sum_j exp(z_ji)] with j per mode."""
    b = z.shape[0]
    if mode == "paper_exclusive":
        z_den = z + Tensor(np.float32(MASK_FILL) * np.eye(b, dtype=np.float32))
    else:
        z_den = z
    # stabilized log-sum-exp down each column; the max is a detached constant
    m = z_den.data.max(axis=0, keepdims=True)
    lse = tn.log(tn.exp(z_den - Tensor(m)).sum(axis=0)) + Tensor(m.reshape(b))
    diag = z[np.arange(b), np.arange(b)]
    return (lse - diag).mean()


def contrastive_loss(scores: Tensor, cfg: LossConfig) -> Tensor:
    """Batch loss over the score matrix; lower is better, can go negative."""
    if scores.ndim != 2 or scores.shape[0] != scores.shape[1]:
        raise ShapeError(f"score matrix must be square, got {scores.shape}")
    b = scores.shape[0]
    if b < 2 and cfg.denominator_mode == "paper_exclusive":
        raise ConfigError(
            "paper_exclusive mode needs a batch of at least 2: with a single "
            "pair the denominator (all non-matching captions) is empty")
    z = scores / cfg.temperature
    loss = _one_direction(z, cfg.denominator_mode)
    if cfg.symmetric:
        zt = tn.transpose(z, (1, 0))
        loss = (loss + _one_direction(zt, cfg.denominator_mode)) * 0.5
    return loss
