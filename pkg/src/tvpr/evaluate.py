"""Retrieval evaluation: caption queries against a video gallery.

Every caption of every gallery video becomes one query (two queries per
video).  The gallery is ordered by clip id so tie-breaking and reports never
depend on manifest order.  Evaluation runs with graph recording off and
never touches parameter values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data.manifest import ManifestEntry
from .errors import ConfigError
from .metrics import RetrievalResult, result_from_score_matrix
from .model import TVPRModel
from .tensor import Tensor, no_grad
from .train import load_clip_batch, _stack_clips


@dataclass
class QueryRecord:
    caption: str
    truth_clip_id: str
    rank: int


@dataclass
class EvalReport:
    result: RetrievalResult
    queries: list[QueryRecord]
    gallery_ids: list[str]

    @property
    def num_queries(self) -> int:
        return len(self.queries)


def encode_gallery(model: TVPRModel, entries: list[ManifestEntry],
                   manifest_path: str | Path, num_frames: int,
                   batch_size: int = 16,
                   motion_features: dict | None = None) -> tuple[list[str], np.ndarray]:
    """Encode every entry's clip; returns (clip ids, (V, d_rn) array)."""
    ordered = sorted(entries, key=lambda e: e.clip_id)
    clips = load_clip_batch(ordered, manifest_path, num_frames)
    blocks = []
    with no_grad():
        for start in range(0, len(ordered), batch_size):
            chunk = ordered[start:start + batch_size]
            frames, times = _stack_clips([clips[e.clip_id] for e in chunk])
            mf = None
            if motion_features is not None:
                feats = Tensor(np.stack([motion_features[e.clip_id][1] for e in chunk]))
                ftimes = np.stack([motion_features[e.clip_id][0] for e in chunk])
                mf = (feats, ftimes)
            blocks.append(model.encode_videos(frames, times,
                                              motion_features=mf).data)
    return [e.clip_id for e in ordered], np.concatenate(blocks, axis=0)


def evaluate_model(model: TVPRModel, entries: list[ManifestEntry],
                   manifest_path: str | Path, num_frames: int,
                   batch_size: int = 16,
                   motion_features: dict | None = None) -> EvalReport:
    if not entries:
        raise ConfigError("evaluation needs a nonempty entry set")
    gallery_ids, vid_proj = encode_gallery(model, entries, manifest_path,
                                           num_frames, batch_size,
                                           motion_features)
    by_id = {e.clip_id: e for e in entries}
    captions: list[str] = []
    truth_cols: list[int] = []
    for col, clip_id in enumerate(gallery_ids):
        for cap in by_id[clip_id].captions:
            captions.append(cap)
            truth_cols.append(col)

    cap_blocks = []
    with no_grad():
        for start in range(0, len(captions), batch_size):
            ids = model.tokenize_batch(captions[start:start + batch_size])
            cap_blocks.append(model.encode_captions(ids).data)
        cap_proj = np.concatenate(cap_blocks, axis=0)
        scores = model.score_matrix(Tensor(cap_proj), Tensor(vid_proj)).data

    result = result_from_score_matrix(scores, truth_cols, gallery_ids)
    queries = [QueryRecord(captions[q], gallery_ids[truth_cols[q]], result.ranks[q])
               for q in range(len(captions))]
    return EvalReport(result, queries, gallery_ids)


def rank_videos_for_text(model: TVPRModel, query: str,
                         gallery_ids: list[str], vid_proj: np.ndarray,
                         topk: int) -> list[tuple[str, float]]:
    """Top-k (clip_id, score) for one free-text query, ties by clip id."""
    with no_grad():
        ids = model.tokenize_batch([query])
        cap = model.encode_captions(ids)
        scores = model.score_matrix(cap, Tensor(vid_proj)).data[0]
    order = sorted(range(len(gallery_ids)),
                   key=lambda i: (-scores[i], gallery_ids[i]))
    return [(gallery_ids[i], float(scores[i])) for i in order[:topk]]
