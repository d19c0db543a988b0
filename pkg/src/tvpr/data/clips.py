"""Clip storage: in-memory representation and on-disk readers/writers.

A clip directory holds either a raw tensor blob (``frames.npy``, shape
(T, 3, H, W)) or individual lossless images (``frame_0.png`` ...), plus an
optional ``times.npy`` sidecar with per-frame seconds.  Without the sidecar,
frames are assumed one second apart starting at zero.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ManifestError

_FRAME_FILE = re.compile(r"frame_(\d+)\.png$")


@dataclass
class VideoClip:
    frames: np.ndarray      # (T, 3, H, W), float32 in [0, 1]
    timestamps: np.ndarray  # (T,) nonnegative nondecreasing seconds
    clip_id: str

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float32)
        self.timestamps = np.asarray(self.timestamps, dtype=np.float64)
        if self.frames.ndim != 4 or self.frames.shape[1] != 3:
            raise ManifestError(
                f"{self.clip_id}: frames must be (T, 3, H, W), got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise ManifestError(f"{self.clip_id}: clip has no frames")
        if self.timestamps.shape != (self.frames.shape[0],):
            raise ManifestError(
                f"{self.clip_id}: {self.frames.shape[0]} frames but "
                f"{self.timestamps.shape} timestamps")
        if (self.timestamps < 0).any() or (np.diff(self.timestamps) < 0).any():
            raise ManifestError(
                f"{self.clip_id}: timestamps must be nonnegative and nondecreasing")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def resolution(self) -> tuple[int, int]:
        return self.frames.shape[2], self.frames.shape[3]

    def subsample(self, num_frames: int) -> "VideoClip":
        """Uniform-stride frame selection down (or up, repeating) to a count."""
        t = self.num_frames
        idx = np.linspace(0, t - 1, num_frames).round().astype(np.int64)
        return VideoClip(self.frames[idx], self.timestamps[idx], self.clip_id)


def default_timestamps(num_frames: int, spacing: float = 1.0) -> np.ndarray:
    return np.arange(num_frames, dtype=np.float64) * spacing


def save_clip(directory: str | Path, clip: VideoClip) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.save(directory / "frames.npy", clip.frames)
    np.save(directory / "times.npy", clip.timestamps)


def _load_png_frames(directory: Path) -> np.ndarray:
    import matplotlib.image as mpimg

    numbered = []
    for path in directory.iterdir():
        m = _FRAME_FILE.search(path.name)
        if m:
            numbered.append((int(m.group(1)), path))
    if not numbered:
        raise ManifestError(f"{directory}: no frames.npy and no frame_*.png files")
    frames = []
    for _, path in sorted(numbered):
        img = np.asarray(mpimg.imread(path), dtype=np.float32)
        if img.ndim == 2:
            img = np.repeat(img[..., None], 3, axis=-1)
        if img.shape[-1] == 4:
            img = img[..., :3]
        if img.max() > 1.0:
            img = img / 255.0
        frames.append(img.transpose(2, 0, 1))
    return np.stack(frames)


def load_clip(directory: str | Path, clip_id: str | None = None) -> VideoClip:
    directory = Path(directory)
    if not directory.is_dir():
        raise ManifestError(f"clip directory {directory} does not exist")
    blob = directory / "frames.npy"
    if blob.exists():
        frames = np.asarray(np.load(blob), dtype=np.float32)
        if frames.max(initial=0.0) > 1.0:
            frames = frames / 255.0
    else:
        frames = _load_png_frames(directory)
    times_file = directory / "times.npy"
    if times_file.exists():
        timestamps = np.load(times_file)
    else:
        timestamps = default_timestamps(frames.shape[0])
    return VideoClip(frames, timestamps, clip_id or directory.name)


def clip_resolution(directory: str | Path) -> tuple[int, int]:
    """Resolution check without loading pixel data where possible."""
    directory = Path(directory)
    blob = directory / "frames.npy"
    if blob.exists():
        shape = np.load(blob, mmap_mode="r").shape
        if len(shape) != 4 or shape[1] != 3:
            raise ManifestError(f"{directory}: frames blob has shape {shape}")
        return shape[2], shape[3]
    return load_clip(directory).resolution
