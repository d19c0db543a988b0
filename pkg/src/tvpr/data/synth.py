"""Procedural person-video corpus with attribute-level caption ground truth.

Each scene is a two-band figure (torso color, legs color) executing one of
five motion programs over T frames, optionally with the legs band occluded
for a window of frames.  The closed attribute space is 6 torso colors x 6
legs colors x 5 motion programs x occlusion on/off = 360 identities.

Every clip carries two captions produced from two fixed paraphrase
templates.  Captions state attributes, not pixels: an occluded clip's
captions still name the legs color.  The template map is invertible, so
tests can recover the generating attributes from any caption.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .clips import VideoClip, default_timestamps, save_clip
from .manifest import ManifestEntry, write_manifest

PALETTE: dict[str, tuple[float, float, float]] = {
    "red": (0.85, 0.10, 0.10),
    "green": (0.10, 0.70, 0.15),
    "blue": (0.15, 0.25, 0.85),
    "yellow": (0.90, 0.85, 0.10),
    "purple": (0.55, 0.15, 0.75),
    "orange": (0.95, 0.55, 0.05),
}

MOTION_PROGRAMS = ("walk_left", "walk_right", "pause", "turn", "approach")

# paraphrase pairs; each program's phrases share one unique keyword so a
# caption can be mapped back to its program
MOTION_PHRASES: dict[str, tuple[str, str]] = {
    "walk_left": ("walks to the left", "moving to the left"),
    "walk_right": ("walks to the right", "moving to the right"),
    "pause": ("stands still in place", "staying still in place"),
    "turn": ("turns around on the spot", "spinning around on the spot"),
    "approach": ("walks toward the camera", "moving toward the camera"),
}

_MOTION_KEYWORDS = {"left": "walk_left", "right": "walk_right",
                    "still": "pause", "spot": "turn", "camera": "approach"}

BACKGROUND = 0.10
OCCLUDER = 0.50
NOISE_STD = 0.01


@dataclass
class SyntheticScene:
    torso_color: str
    legs_color: str
    motion_program: str
    occlusion: tuple[int, int] | None  # [start, end) frame window over the legs band
    frame_count: int
    height: int
    width: int

    def __post_init__(self):
        for color in (self.torso_color, self.legs_color):
            if color not in PALETTE:
                raise ConfigError(f"color {color!r} not in palette {sorted(PALETTE)}")
        if self.motion_program not in MOTION_PROGRAMS:
            raise ConfigError(
                f"motion {self.motion_program!r} not in {MOTION_PROGRAMS}")
        if self.frame_count < 1:
            raise ConfigError("scene needs at least one frame")

    @property
    def identity_id(self) -> str:
        occ = "occluded" if self.occlusion else "clear"
        return f"{self.torso_color}-{self.legs_color}-{self.motion_program}-{occ}"


def make_captions(scene: SyntheticScene) -> tuple[str, str]:
    p1, p2 = MOTION_PHRASES[scene.motion_program]
    return (
        f"a person wearing a {scene.torso_color} shirt and {scene.legs_color} "
        f"pants {p1}",
        f"someone dressed in a {scene.torso_color} top and {scene.legs_color} "
        f"trousers {p2}",
    )


def parse_caption(caption: str) -> tuple[str, str, str]:
    """Inverse template map: caption -> (torso_color, legs_color, motion)."""
    words = caption.lower().split()
    colors = [w for w in words if w in PALETTE]
    if len(colors) != 2:
        raise ConfigError(
            f"caption does not match the templates (found colors {colors}): "
            f"{caption!r}")
    motions = {_MOTION_KEYWORDS[w] for w in words if w in _MOTION_KEYWORDS}
    if len(motions) != 1:
        raise ConfigError(f"caption has no unique motion keyword: {caption!r}")
    return colors[0], colors[1], motions.pop()


def _figure_geometry(scene: SyntheticScene, t: int) -> tuple[int, int, int, int, int]:
    """Per-frame (torso_top, split, legs_bottom, cx, half_width) in pixels."""
    h, w, n = scene.height, scene.width, scene.frame_count
    phase = t / (n - 1) if n > 1 else 0.0
    torso_top, split, legs_bottom = 0.20 * h, 0.50 * h, 0.80 * h
    cx = 0.50 * w
    half_width = 0.15 * w
    program = scene.motion_program
    if program == "walk_left":
        cx = (0.75 - 0.50 * phase) * w
    elif program == "walk_right":
        cx = (0.25 + 0.50 * phase) * w
    elif program == "turn":
        half_width *= 0.25 + 0.75 * abs(np.cos(np.pi * phase))
    elif program == "approach":
        scale = 0.55 + 0.45 * phase
        center = 0.50 * h
        torso_top = center - (center - torso_top) * scale
        split = center - (center - split) * scale
        legs_bottom = center + (legs_bottom - center) * scale
        half_width *= scale
    return (int(round(torso_top)), int(round(split)), int(round(legs_bottom)),
            int(round(cx)), max(1, int(round(half_width))))


def render_scene(scene: SyntheticScene, rng: np.random.Generator) -> np.ndarray:
    """Render (T, 3, H, W) float32 frames in [0, 1]."""
    h, w, n = scene.height, scene.width, scene.frame_count
    frames = np.full((n, 3, h, w), BACKGROUND, dtype=np.float32)
    torso_rgb = PALETTE[scene.torso_color]
    legs_rgb = PALETTE[scene.legs_color]
    for t in range(n):
        top, split, bottom, cx, hw = _figure_geometry(scene, t)
        left, right = max(0, cx - hw), min(w, cx + hw)
        for c in range(3):
            frames[t, c, top:split, left:right] = torso_rgb[c]
            frames[t, c, split:bottom, left:right] = legs_rgb[c]
        if scene.occlusion is not None:
            start, end = scene.occlusion
            if start <= t < end:
                frames[t, :, split:bottom, :] = OCCLUDER
    frames += rng.normal(0.0, NOISE_STD, size=frames.shape).astype(np.float32)
    return np.clip(frames, 0.0, 1.0)


@dataclass
class GeneratorConfig:
    num_clips: int
    frames: int = 8
    height: int = 32
    width: int = 32
    seed: int = 0
    occlusion: str = "mixed"       # "on" | "off" | "mixed"
    num_color_pairs: int = 0       # 0 = all 36 (torso, legs) pairs available
    frame_spacing: float = 1.0     # seconds between frames

    def __post_init__(self):
        if self.num_clips < 1:
            raise ConfigError("num_clips must be positive")
        if self.occlusion not in ("on", "off", "mixed"):
            raise ConfigError(f"occlusion mode {self.occlusion!r} not on/off/mixed")
        if self.num_color_pairs < 0 or self.num_color_pairs > len(PALETTE) ** 2:
            raise ConfigError(
                f"num_color_pairs must be in 0..{len(PALETTE) ** 2}")


def _sample_attribute_triples(config: GeneratorConfig,
                              rng: np.random.Generator) -> list[tuple[str, str, str]]:
    colors = sorted(PALETTE)
    pairs = [(tc, lc) for tc in colors for lc in colors]
    if config.num_color_pairs:
        idx = rng.permutation(len(pairs))[:config.num_color_pairs]
        pairs = [pairs[i] for i in sorted(idx)]
    triples = [(tc, lc, m) for tc, lc in pairs for m in MOTION_PROGRAMS]
    if config.num_clips > len(triples):
        raise ConfigError(
            f"cannot draw {config.num_clips} clips with distinct captions from "
            f"{len(triples)} available (color pair, motion) combinations; raise "
            f"num_color_pairs or lower num_clips")
    order = rng.permutation(len(triples))[:config.num_clips]
    return [triples[i] for i in order]


def generate_scene(seed: int | np.random.SeedSequence,
                   scene: SyntheticScene) -> tuple[VideoClip, tuple[str, str]]:
    """Deterministic render + captions for one fully specified scene."""
    rng = np.random.default_rng(seed)
    frames = render_scene(scene, rng)
    clip = VideoClip(frames, default_timestamps(scene.frame_count), scene.identity_id)
    return clip, make_captions(scene)


def generate_corpus(config: GeneratorConfig,
                    out_dir: str | Path) -> list[ManifestEntry]:
    """Write clips + manifest.jsonl under out_dir; return the entries.

    Attribute triples (torso, legs, motion) are sampled without replacement
    so all captions are distinct; the occlusion flag rides on top and is not
    captioned.  Every clip's randomness comes from its own spawned seed, so
    regenerating any subset reproduces identical pixels.
    """
    out_dir = Path(out_dir)
    (out_dir / "clips").mkdir(parents=True, exist_ok=True)
    root_rng = np.random.default_rng(config.seed)
    triples = _sample_attribute_triples(config, root_rng)
    occ_flags = {
        "on": np.ones(config.num_clips, dtype=bool),
        "off": np.zeros(config.num_clips, dtype=bool),
        "mixed": root_rng.random(config.num_clips) < 0.5,
    }[config.occlusion]
    child_seeds = np.random.SeedSequence(config.seed).spawn(config.num_clips)

    entries: list[ManifestEntry] = []
    for i, (torso, legs, motion) in enumerate(triples):
        t = config.frames
        occlusion = (t // 4, max(t // 4 + 1, (3 * t) // 4)) if occ_flags[i] else None
        scene = SyntheticScene(torso, legs, motion, occlusion,
                               t, config.height, config.width)
        rng = np.random.default_rng(child_seeds[i])
        frames = render_scene(scene, rng)
        clip_id = f"clip{i:04d}"
        clip = VideoClip(frames,
                         default_timestamps(t, config.frame_spacing), clip_id)
        save_clip(out_dir / "clips" / clip_id, clip)
        entries.append(ManifestEntry(
            clip_id=clip_id, frames_path=f"clips/{clip_id}",
            captions=make_captions(scene), identity_id=scene.identity_id))
    write_manifest(entries, out_dir / "manifest.jsonl")
    return entries
