"""Motion branch: spatiotemporal feature extraction and the motion encoder.

A small stack of separable 3-d convolutions turns a clip into K timed motion
feature vectors (K = ceil(T / total temporal stride)).  An aggregator vector
is initialized as the elementwise maximum over all K features, the sequence
[aggregator, F_1..F_K] is tagged with learned per-second temporal rows, and
a transformer encoder contextualizes it.  The aggregator's output row is the
motion representation.

Precomputed motion features can be imported from a binary table (one record
per clip: id, K, width, times, values), bypassing the extractor entirely so
features from an external extractor can be dropped in.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from . import tensor as tn
from .errors import CheckpointError, ConfigError
from .nn import TransformerEncoder
from .params import ParameterStore
from .tensor import Tensor

MOTION_FEATURES_MAGIC = b"TVPRM1\n"

TEMPORAL_KERNEL = 3          # first temporal conv; shortest usable clip
TOTAL_TEMPORAL_STRIDE = 2    # product of the stack's temporal strides


class MotionEncoder:
    """Extractor + aggregator + temporal rows + transformer over (K+1) tokens."""

    def __init__(self, store: ParameterStore, d_mo: int, mid_channels: int,
                 max_seconds: int, num_layers: int, num_heads: int,
                 dropout: float = 0.0):
        self.d_mo = d_mo
        self.max_seconds = max_seconds
        self.spatial1 = store.add("motion/conv1/spatial", (mid_channels, 3, 3, 3))
        self.temporal1 = store.add("motion/conv1/temporal",
                                   (mid_channels, mid_channels, TEMPORAL_KERNEL))
        self.spatial2 = store.add("motion/conv2/spatial", (d_mo, mid_channels, 3, 3))
        self.temporal2 = store.add("motion/conv2/temporal", (d_mo, d_mo, TEMPORAL_KERNEL))
        # rows 0..max_seconds-1 hold the per-second buckets; the last row is
        # the aggregator's own temporal row
        self.temporal_table = store.add("motion/temporal_table",
                                        (max_seconds + 1, d_mo))
        self.encoder = TransformerEncoder(store, "motion/encoder", d_mo,
                                          num_heads, num_layers, dropout)

    # -- feature extraction --------------------------------------------------

    def extract(self, frames: Tensor, timestamps: np.ndarray) -> tuple[Tensor, np.ndarray]:
        """(B, T, 3, H, W) -> features (B, K, d_mo) and their times (B, K).

        Each retained time step is the global spatial average of the final
        convolution's response; its time is the source-frame timestamp at the
        temporal window's center.
        """
        b, t = frames.shape[0], frames.shape[1]
        if t < TEMPORAL_KERNEL:
            raise ConfigError(
                f"motion extraction needs at least {TEMPORAL_KERNEL} frames, got {t}; "
                f"pad or repeat frames, or use a visual-only configuration")
        h = tn.gelu(tn.separable_conv3d(frames, self.spatial1, self.temporal1, (1, 2, 2)))
        h = tn.gelu(tn.separable_conv3d(h, self.spatial2, self.temporal2, (2, 2, 2)))
        features = h.mean(axis=(3, 4))                      # (B, K, d_mo)
        k = features.shape[1]
        centers = np.minimum(np.arange(k) * TOTAL_TEMPORAL_STRIDE, t - 1)
        times = np.asarray(timestamps, dtype=np.float64)[:, centers]
        return features, times

    # -- sequence assembly (Eq.-level contract) -------------------------------

    def time_rows(self, times: np.ndarray) -> np.ndarray:
        """Map feature times to temporal-table row indices ([t, t+1) -> row t)."""
        times = np.asarray(times, dtype=np.float64)
        if (times < 0).any() or (times >= self.max_seconds).any():
            bad = float(times.min()) if (times < 0).any() else float(times.max())
            raise ConfigError(
                f"feature time {bad} outside [0, {self.max_seconds}) seconds")
        return np.floor(times).astype(np.int64)

    def build_sequence(self, features: Tensor, times: np.ndarray) -> Tensor:
        """Features (B, K, d) + times (B, K) -> embedded tokens (B, K+1, d).

        Row 0 is the aggregator (elementwise max over the K features) plus its
        dedicated temporal row; row i+1 is F_i plus the row for its second.
        """
        b, k = features.shape[0], features.shape[1]
        agg = tn.reshape(tn.max_pool_over_axis(features, axis=1), (b, 1, self.d_mo))
        seq = tn.concat([agg, features], axis=1)
        rows = np.concatenate(
            [np.full((b, 1), self.max_seconds, dtype=np.int64), self.time_rows(times)],
            axis=1)
        return seq + tn.embedding_lookup(self.temporal_table, rows)

    def __call__(self, frames: Tensor, timestamps: np.ndarray,
                 train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        """Encode clips to all output token rows (B, K+1, d_mo); row 0 is MO(V)."""
        features, times = self.extract(frames, timestamps)
        return self.encode_features(features, times, train=train, rng=rng)

    def encode_features(self, features: Tensor, times: np.ndarray,
                        train: bool = False,
                        rng: np.random.Generator | None = None) -> Tensor:
        tokens = self.build_sequence(features, times)
        return self.encoder(tokens, train=train, rng=rng)


# ---------------------------------------------------------------------------
# precomputed-feature interchange format
# ---------------------------------------------------------------------------

def save_motion_features(path: str | Path,
                         records: dict[str, tuple[np.ndarray, np.ndarray]]) -> None:
    """Write {clip_id: (times (K,), values (K, d))} to one binary table."""
    with open(path, "wb") as fh:
        fh.write(MOTION_FEATURES_MAGIC)
        fh.write(struct.pack("<I", len(records)))
        for clip_id, (times, values) in records.items():
            times = np.asarray(times, dtype="<f4")
            values = np.asarray(values, dtype="<f4")
            if values.ndim != 2 or times.shape != (values.shape[0],):
                raise ConfigError(
                    f"record {clip_id!r}: values must be (K, d) with K times, "
                    f"got {values.shape} and {times.shape}")
            ident = clip_id.encode("utf-8")
            fh.write(struct.pack("<H", len(ident)))
            fh.write(ident)
            fh.write(struct.pack("<II", values.shape[0], values.shape[1]))
            fh.write(times.tobytes())
            fh.write(values.tobytes())


def load_motion_features(path: str | Path) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    raw = Path(path).read_bytes()
    if not raw.startswith(MOTION_FEATURES_MAGIC):
        raise CheckpointError(f"{path}: not a motion-feature table")
    pos = len(MOTION_FEATURES_MAGIC)
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    records: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for _ in range(count):
        (id_len,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        clip_id = raw[pos:pos + id_len].decode("utf-8")
        pos += id_len
        k, d = struct.unpack_from("<II", raw, pos)
        pos += 8
        times = np.frombuffer(raw, dtype="<f4", count=k, offset=pos).copy()
        pos += 4 * k
        values = np.frombuffer(raw, dtype="<f4", count=k * d, offset=pos).reshape(k, d).copy()
        pos += 4 * k * d
        records[clip_id] = (times, values)
    if pos != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - pos} trailing bytes")
    return records
