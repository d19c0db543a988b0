"""Manifest records, validation, and deterministic split assignment.

A manifest is a line-delimited text file: one JSON object per line with
fields clip_id, frames_path, captions (exactly two), identity_id, and
sub_dataset.  Paths are resolved relative to the manifest file's directory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, ManifestError
from .clips import clip_resolution


@dataclass
class ManifestEntry:
    clip_id: str
    frames_path: str
    captions: tuple[str, str]
    identity_id: str
    sub_dataset: str = "synthetic"

    def __post_init__(self):
        if len(self.captions) != 2:
            raise ManifestError(
                f"{self.clip_id}: every video needs exactly 2 captions, "
                f"got {len(self.captions)}")
        self.captions = tuple(self.captions)

    def to_json(self) -> str:
        return json.dumps({
            "clip_id": self.clip_id,
            "frames_path": self.frames_path,
            "captions": list(self.captions),
            "identity_id": self.identity_id,
            "sub_dataset": self.sub_dataset,
        }, sort_keys=True)


def write_manifest(entries: list[ManifestEntry], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for entry in entries:
            fh.write(entry.to_json() + "\n")


def load_manifest(path: str | Path, check_frames: bool = True) -> list[ManifestEntry]:
    """Parse and validate; empty file -> empty list."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest {path} does not exist")
    base = path.parent
    entries: list[ManifestEntry] = []
    seen: set[str] = set()
    resolution: tuple[int, int] | None = None
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: not a valid record: {exc}") from exc
        try:
            entry = ManifestEntry(
                clip_id=raw["clip_id"], frames_path=raw["frames_path"],
                captions=tuple(raw["captions"]), identity_id=raw["identity_id"],
                sub_dataset=raw.get("sub_dataset", "synthetic"))
        except KeyError as exc:
            raise ManifestError(f"{path}:{lineno}: missing field {exc}") from exc
        if entry.clip_id in seen:
            raise ManifestError(f"{path}:{lineno}: duplicate clip_id {entry.clip_id!r}")
        seen.add(entry.clip_id)
        if check_frames:
            clip_dir = base / entry.frames_path
            res = clip_resolution(clip_dir)
            if resolution is None:
                resolution = res
            elif res != resolution:
                raise ManifestError(
                    f"{entry.clip_id}: resolution {res} differs from {resolution}")
        entries.append(entry)
    return entries


def resolve_frames_dir(manifest_path: str | Path, entry: ManifestEntry) -> Path:
    return Path(manifest_path).parent / entry.frames_path


@dataclass
class SplitAssignment:
    train: list[str]
    val: list[str]
    test: list[str]
    ratios: tuple[float, float, float]

    def subset(self, name: str) -> list[str]:
        if name == "all":
            return self.train + self.val + self.test
        if name not in ("train", "val", "test"):
            raise ConfigError(f"unknown split {name!r}")
        return getattr(self, name)


def split_manifest(entries: list[ManifestEntry],
                   ratios: tuple[float, float, float],
                   seed: int,
                   fixed_counts: tuple[int, int, int] | None = None,
                   identity_disjoint: bool = False) -> SplitAssignment:
    """Seeded shuffle, then contiguous partition.

    Sizes are floor(train ratio * n) and floor(val ratio * n), remainder to
    test, unless ``fixed_counts`` pins the three sizes exactly.  With
    ``identity_disjoint`` the shuffle operates over identities and whole
    identity groups are assigned to one side (sizes then only approximate
    the ratios).
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"ratios must be three nonnegative reals, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must sum to 1, got sum {sum(ratios)!r}")
    n = len(entries)
    rng = np.random.default_rng(seed)

    if fixed_counts is not None:
        n_train, n_val, n_test = (int(c) for c in fixed_counts)
        if n_train < 0 or n_val < 0 or n_test < 0 or n_train + n_val + n_test != n:
            raise ConfigError(
                f"fixed counts {fixed_counts} do not partition {n} entries")
    else:
        n_train = int(np.floor(ratios[0] * n))
        n_val = int(np.floor(ratios[1] * n))
        n_test = n - n_train - n_val

    if identity_disjoint:
        identities: dict[str, list[str]] = {}
        for e in entries:
            identities.setdefault(e.identity_id, []).append(e.clip_id)
        order = rng.permutation(sorted(identities))
        shuffled: list[str] = []
        for ident in order:
            shuffled.extend(identities[ident])
        # move group boundaries so no identity straddles a cut
        cut1 = n_train
        while 0 < cut1 < n and _same_identity(entries, shuffled, cut1):
            cut1 += 1
        cut2 = max(cut1, n_train + n_val)
        while cut1 < cut2 < n and _same_identity(entries, shuffled, cut2):
            cut2 += 1
        return SplitAssignment(shuffled[:cut1], shuffled[cut1:cut2], shuffled[cut2:],
                               ratios)

    order = rng.permutation(n)
    shuffled = [entries[i].clip_id for i in order]
    return SplitAssignment(shuffled[:n_train],
                           shuffled[n_train:n_train + n_val],
                           shuffled[n_train + n_val:], ratios)


def _same_identity(entries: list[ManifestEntry], shuffled: list[str], cut: int) -> bool:
    ident = {e.clip_id: e.identity_id for e in entries}
    return ident[shuffled[cut - 1]] == ident[shuffled[cut]]


def entries_for_split(entries: list[ManifestEntry], assignment: SplitAssignment,
                      name: str) -> list[ManifestEntry]:
    wanted = set(assignment.subset(name))
    return [e for e in entries if e.clip_id in wanted]
