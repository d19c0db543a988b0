"""Retrieval metrics: per-query ranks, recall at rank N, median rank.

A query's rank is the 1-based position of its ground-truth video when the
gallery is ordered by descending score; equal scores are ordered by clip id
so results never depend on gallery presentation order.  R@N is the
percentage of queries with rank <= N; MdR is the median rank (mean of the
two middle ranks for even query counts).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ShapeError

RECALL_RANKS = (1, 5, 10, 50)


def rank_of_truth(scores: np.ndarray, truth_index: int,
                  clip_ids: Sequence[str]) -> int:
    """Rank of the true video among all gallery videos for one query."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 1 or len(clip_ids) != scores.size:
        raise ShapeError(
            f"need one score per gallery clip: {scores.shape} vs {len(clip_ids)} ids")
    order = sorted(range(scores.size), key=lambda i: (-scores[i], clip_ids[i]))
    return order.index(truth_index) + 1


def ranks_from_score_matrix(scores: np.ndarray, truth_columns: Sequence[int],
                            clip_ids: Sequence[str]) -> list[int]:
    """Row q of ``scores`` ranks the gallery for query q; truth_columns[q] is its video."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape[0] != len(truth_columns):
        raise ShapeError(
            f"{scores.shape[0]} query rows but {len(truth_columns)} truth labels")
    return [rank_of_truth(scores[q], truth_columns[q], clip_ids)
            for q in range(scores.shape[0])]


def recall_at(ranks: Sequence[int], n: int) -> float:
    """Percentage of queries whose rank is at most n."""
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ShapeError("recall needs at least one query")
    # count first: the percentage is then exact whenever 100*count/size is
    return float((ranks <= n).sum() * 100.0 / ranks.size)


def median_rank(ranks: Sequence[int]) -> float:
    ranks = np.sort(np.asarray(ranks, dtype=np.float64))
    if ranks.size == 0:
        raise ShapeError("median rank needs at least one query")
    mid = ranks.size // 2
    if ranks.size % 2:
        return float(ranks[mid])
    return float((ranks[mid - 1] + ranks[mid]) / 2.0)


@dataclass
class RetrievalResult:
    ranks: list[int]
    r_at: dict[int, float] = field(init=False)
    mdr: float = field(init=False)

    def __post_init__(self):
        self.r_at = {n: recall_at(self.ranks, n) for n in RECALL_RANKS}
        self.mdr = median_rank(self.ranks)

    def summary_line(self) -> str:
        parts = [f"R@{n}={self.r_at[n]:.2f}" for n in RECALL_RANKS]
        return " ".join(parts) + f" MdR={self.mdr:.1f} (n={len(self.ranks)})"


def result_from_score_matrix(scores: np.ndarray, truth_columns: Sequence[int],
                             clip_ids: Sequence[str]) -> RetrievalResult:
    return RetrievalResult(ranks_from_score_matrix(scores, truth_columns, clip_ids))
