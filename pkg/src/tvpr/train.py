"""Adam and the contrastive training loop."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np

from .config import TrainConfig
from .data.clips import VideoClip, load_clip
from .data.manifest import (ManifestEntry, entries_for_split, resolve_frames_dir,
                            split_manifest)
from .errors import ConfigError
from .model import TVPRModel
from .motion import load_motion_features
from .caption import build_vocabulary
from .relation import LossConfig, contrastive_loss
from .tensor import Tensor


class Adam:
    """Adam with bias correction; moment buffers persist across steps."""

    def __init__(self, tensors: list[Tensor], lr: float,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.tensors = tensors
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in tensors]
        self.v = [np.zeros_like(p.data) for p in tensors]

    def step(self) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.tensors, self.m, self.v):
            if p.grad is None:
                raise ConfigError(
                    "a parameter has no gradient; run backward before stepping")
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data = p.data - self.lr * update


def load_clip_batch(entries: list[ManifestEntry], manifest_path: str | Path,
                    num_frames: int) -> dict[str, VideoClip]:
    """Load and subsample every entry's clip once, keyed by clip id."""
    clips = {}
    for entry in entries:
        clip = load_clip(resolve_frames_dir(manifest_path, entry), entry.clip_id)
        clips[entry.clip_id] = clip.subsample(num_frames)
    return clips


def _stack_clips(clips: list[VideoClip]) -> tuple[Tensor, np.ndarray]:
    frames = Tensor(np.stack([c.frames for c in clips]))
    times = np.stack([c.timestamps for c in clips])
    return frames, times


def train_model(tc: TrainConfig, entries: list[ManifestEntry],
                manifest_path: str | Path,
                log: Callable[[str], None] | None = None) -> tuple[TVPRModel, list[float]]:
    """Train on the given entries; returns the model and per-epoch mean losses.

    Each sample is a (caption, clip) pair with the caption drawn per epoch
    from the clip's two descriptions.  Trailing batches smaller than two are
    skipped under paper_exclusive (their denominator would be empty).
    """
    if not entries:
        raise ConfigError("training needs a nonempty entry list")
    say = log or (lambda line: None)
    cfg = tc.model()
    vocab = build_vocabulary([c for e in entries for c in e.captions])
    model = TVPRModel(cfg, vocab, seed=tc.seed)
    say(f"model: preset={cfg.preset} ablation={cfg.ablation} "
        f"params={len(model.store)} vocab={vocab.size}")

    clips = load_clip_batch(entries, manifest_path, tc.num_frames)
    token_ids = {e.clip_id: [model.tokenize_batch([c])[0] for c in e.captions]
                 for e in entries}
    loss_cfg = LossConfig(tc.temperature, tc.denominator_mode, tc.symmetric)
    imported = None
    if tc.motion_features:
        imported = load_motion_features(tc.motion_features)

    adam = Adam(model.store.tensors(), tc.learning_rate)
    rng = np.random.default_rng(tc.seed)
    min_batch = 2 if tc.denominator_mode == "paper_exclusive" else 1
    order_ids = [e.clip_id for e in entries]
    losses: list[float] = []

    for epoch in range(tc.epochs):
        perm = rng.permutation(len(entries))
        caption_pick = rng.integers(0, 2, size=len(entries))
        epoch_losses = []
        for start in range(0, len(entries), tc.batch_size):
            batch_idx = perm[start:start + tc.batch_size]
            if batch_idx.size < min_batch:
                continue
            batch_ids = [order_ids[i] for i in batch_idx]
            ids = np.stack([token_ids[cid][caption_pick[i]]
                            for cid, i in zip(batch_ids, batch_idx)])
            frames, times = _stack_clips([clips[cid] for cid in batch_ids])
            motion_features = None
            if imported is not None:
                feats = Tensor(np.stack([imported[cid][1] for cid in batch_ids]))
                ftimes = np.stack([imported[cid][0] for cid in batch_ids])
                motion_features = (feats, ftimes)

            caps = model.encode_captions(ids, train=True, rng=rng)
            vids = model.encode_videos(frames, times, train=True, rng=rng,
                                       motion_features=motion_features)
            scores = model.score_matrix(caps, vids)
            loss = contrastive_loss(scores, loss_cfg)
            model.store.zero_grads()
            loss.backward()
            adam.step()
            epoch_losses.append(loss.item())
        mean_loss = float(np.mean(epoch_losses)) if epoch_losses else float("nan")
        losses.append(mean_loss)
        say(f"epoch {epoch + 1}/{tc.epochs} loss {mean_loss:.6f}")
    return model, losses


def run_training(tc: TrainConfig, manifest_path: str | Path,
                 out_checkpoint: str | Path,
                 entries: list[ManifestEntry],
                 log: Callable[[str], None] | None = None) -> tuple[TVPRModel, list[float]]:
    """Split the manifest, train on the train subset, write the checkpoint."""
    assignment = split_manifest(entries, tc.split.ratios, tc.split.seed,
                                fixed_counts=tc.split.fixed_counts,
                                identity_disjoint=tc.split.identity_disjoint)
    train_entries = entries_for_split(entries, assignment, "train")
    model, losses = train_model(tc, train_entries, manifest_path, log=log)
    loss_txt = " ".join(f"{x:.6f}" for x in losses)
    model.save(out_checkpoint, extra_metadata={
        "train_config": tc.to_json(),
        "epoch_losses": loss_txt,
    })
    return model, losses
