"""Full retrieval model: paired encoders, optional fusion, shared projection.

The caption side is always the text encoder followed by a linear projection
into the shared d_rn space.  The video side depends on the configured
component set:

- ``visual_only``:   project the clip embedding through the visual adapter
- ``motion_only``:   project the motion aggregator through the motion adapter
- ``vis_mo_concat``: adapt both, concatenate, mix with one linear map
- ``full_ffa``:      run the fusion aggregator over both token groups

Only the modules a configuration uses are constructed, so every registered
parameter sits on the active gradient path and checkpoints carry exactly the
weights the configuration needs (plus the config and vocabulary required to
rebuild the model from the file alone).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import tensor as tn
from .caption import CaptionEncoder, Vocabulary, tokenize
from .config import ModelConfig
from .errors import CheckpointError, ConfigError
from .fusion import FusionAggregator
from .motion import MotionEncoder
from .nn import LinearMap
from .params import ParameterStore, load_checkpoint, save_checkpoint
from .relation import MLPRelationHead, relation_scores
from .tensor import Tensor
from .visual import VisualEncoder

CHECKPOINT_KIND = "tvpr-model"


class TVPRModel:
    def __init__(self, cfg: ModelConfig, vocab: Vocabulary, seed: int = 0):
        self.cfg = cfg
        self.vocab = vocab
        self.seed = seed
        self.store = ParameterStore(seed)
        ab = cfg.ablation

        self.caption_encoder = CaptionEncoder(
            self.store, vocab.size, cfg.d_txt, cfg.max_len,
            cfg.txt_layers, cfg.txt_heads, cfg.txt_dropout)

        self.visual_encoder = None
        if ab != "motion_only":
            self.visual_encoder = VisualEncoder(
                self.store, cfg.d_vis, cfg.patch, cfg.height, cfg.width,
                cfg.max_frames, cfg.vis_layers, cfg.vis_heads)

        self.motion_encoder = None
        if ab != "visual_only":
            self.motion_encoder = MotionEncoder(
                self.store, cfg.d_mo, cfg.mo_mid, cfg.max_seconds,
                cfg.mo_layers, cfg.mo_heads, cfg.mo_dropout)

        self.fusion = None
        self.ll_vis = None
        self.ll_mo = None
        self.concat_proj = None
        if ab == "full_ffa":
            self.fusion = FusionAggregator(
                self.store, cfg.d_vis, cfg.d_mo, cfg.d_ffa,
                cfg.ffa_layers, cfg.ffa_heads, cfg.ffa_dropout)
        else:
            if ab != "motion_only":
                self.ll_vis = LinearMap(self.store, "fusion/ll_vis",
                                        cfg.d_vis, cfg.d_ffa)
            if ab != "visual_only":
                self.ll_mo = LinearMap(self.store, "fusion/ll_mo",
                                       cfg.d_mo, cfg.d_ffa)
            if ab == "vis_mo_concat":
                self.concat_proj = LinearMap(self.store, "fusion/concat_proj",
                                             2 * cfg.d_ffa, cfg.d_ffa)

        self.lp_cap = LinearMap(self.store, "relation/lp_cap", cfg.d_txt, cfg.d_rn)
        self.lp_vid = LinearMap(self.store, "relation/lp_vid", cfg.d_ffa, cfg.d_rn)
        self.mlp_head = (MLPRelationHead(self.store, cfg.d_rn)
                         if cfg.relation_head == "mlp" else None)

    # -- encoding ------------------------------------------------------------

    def tokenize_batch(self, captions: list[str]) -> np.ndarray:
        return np.stack([tokenize(c, self.vocab, self.cfg.max_len)
                         for c in captions])

    def encode_captions(self, ids: np.ndarray, train: bool = False,
                        rng: np.random.Generator | None = None) -> Tensor:
        """Token id batch -> projected caption embeddings (B, d_rn)."""
        return self.lp_cap(self.caption_encoder(ids, train=train, rng=rng))

    def encode_videos(self, frames: Tensor, timestamps: np.ndarray,
                      train: bool = False,
                      rng: np.random.Generator | None = None,
                      motion_features: tuple[Tensor, np.ndarray] | None = None
                      ) -> Tensor:
        """Clip batch (B, T, 3, H, W) -> projected video embeddings (B, d_rn).

        ``motion_features`` (features (B, K, d_mo), times (B, K)) bypasses the
        extractor, e.g. when features were imported from an external table.
        """
        ab = self.cfg.ablation
        vis = self.visual_encoder(frames) if self.visual_encoder else None

        motion_rows = None
        if self.motion_encoder:
            if motion_features is not None:
                feats, times = motion_features
                motion_rows = self.motion_encoder.encode_features(
                    feats, times, train=train, rng=rng)
            else:
                motion_rows = self.motion_encoder(frames, timestamps,
                                                  train=train, rng=rng)

        if ab == "full_ffa":
            vid = self.fusion(vis, motion_rows, train=train, rng=rng)
        elif ab == "visual_only":
            vid = self.ll_vis(vis)
        elif ab == "motion_only":
            vid = self.ll_mo(motion_rows[:, 0])
        else:  # vis_mo_concat
            vid = self.concat_proj(tn.concat(
                [self.ll_vis(vis), self.ll_mo(motion_rows[:, 0])], axis=1))
        return self.lp_vid(vid)

    def score_matrix(self, cap_proj: Tensor, vid_proj: Tensor) -> Tensor:
        """(B_cap, d_rn) x (B_vid, d_rn) -> scores in [0, 1], entry (j, i)."""
        if self.mlp_head is not None:
            return self.mlp_head(cap_proj, vid_proj)
        return relation_scores(cap_proj, vid_proj)

    # -- persistence -----------------------------------------------------------

    def save(self, path: str | Path, extra_metadata: dict[str, str] | None = None
             ) -> None:
        metadata = {
            "kind": CHECKPOINT_KIND,
            "model_config": self.cfg.to_json(),
            "vocab": self.vocab.dumps(),
            "seed": str(self.seed),
        }
        if extra_metadata:
            overlap = set(extra_metadata) & set(metadata)
            if overlap:
                raise ConfigError(f"metadata keys {sorted(overlap)} are reserved")
            metadata.update(extra_metadata)
        save_checkpoint(path, self.store.state_arrays(), metadata)

    @classmethod
    def load(cls, path: str | Path) -> tuple["TVPRModel", dict[str, str]]:
        arrays, metadata = load_checkpoint(path)
        if metadata.get("kind") != CHECKPOINT_KIND:
            raise CheckpointError(
                f"{path}: not a model checkpoint (kind={metadata.get('kind')!r})")
        cfg = ModelConfig.from_json(metadata["model_config"])
        vocab = Vocabulary.loads(metadata["vocab"])
        model = cls(cfg, vocab, seed=int(metadata.get("seed", "0")))
        model.store.load_state_arrays(arrays)
        return model, metadata
