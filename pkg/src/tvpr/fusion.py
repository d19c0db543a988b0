"""Feature fusion: project both modalities to a shared width and aggregate.

The visual representation contributes one token; the motion encoder
contributes one token per output row (aggregator first).  Each token gets
its modality's learned type row so the aggregator can tell the two groups
apart, a joint transformer runs over the concatenation, and the fused video
embedding is the mean of the two aggregate-level outputs: the visual token
(index 0) and the motion aggregator token (index 1).
"""

from __future__ import annotations

import numpy as np

from . import tensor as tn
from .errors import ShapeError
from .nn import LinearMap, TransformerEncoder
from .params import ParameterStore
from .tensor import Tensor

VISUAL_TYPE = 0
MOTION_TYPE = 1


class FusionAggregator:
    def __init__(self, store: ParameterStore, d_vis: int, d_mo: int, d_ffa: int,
                 num_layers: int, num_heads: int, dropout: float = 0.0):
        self.d_ffa = d_ffa
        self.ll_vis = LinearMap(store, "fusion/ll_vis", d_vis, d_ffa)
        self.ll_mo = LinearMap(store, "fusion/ll_mo", d_mo, d_ffa)
        self.type_rows = store.add("fusion/type_rows", (2, d_ffa))
        self.encoder = TransformerEncoder(store, "fusion/encoder", d_ffa,
                                          num_heads, num_layers, dropout)

    def build_tokens(self, vis: Tensor, motion_rows: Tensor) -> Tensor:
        """vis (B, d_vis) + motion rows (B, K+1, d_mo) -> tokens (B, K+2, d_ffa)."""
        if vis.ndim != 2 or motion_rows.ndim != 3 or vis.shape[0] != motion_rows.shape[0]:
            raise ShapeError(
                f"fusion inputs disagree: visual {vis.shape}, motion {motion_rows.shape}")
        b = vis.shape[0]
        v = tn.reshape(self.ll_vis(vis), (b, 1, self.d_ffa))
        m = self.ll_mo(motion_rows)
        tokens = tn.concat([v, m], axis=1)
        types = np.full(tokens.shape[1], MOTION_TYPE, dtype=np.int64)
        types[VISUAL_TYPE] = VISUAL_TYPE
        return tokens + tn.embedding_lookup(self.type_rows, types)

    def __call__(self, vis: Tensor, motion_rows: Tensor, train: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        """Fused video embedding (B, d_ffa)."""
        tokens = self.build_tokens(vis, motion_rows)
        out = self.encoder(tokens, train=train, rng=rng)
        return (out[:, 0] + out[:, 1]) * 0.5
