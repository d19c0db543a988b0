from .clips import VideoClip, load_clip, save_clip
from .manifest import (ManifestEntry, SplitAssignment, entries_for_split,
                       load_manifest, split_manifest, write_manifest)
from .synth import (GeneratorConfig, SyntheticScene, generate_corpus,
                    generate_scene, make_captions, parse_caption)

__all__ = [
    "VideoClip", "load_clip", "save_clip",
    "ManifestEntry", "SplitAssignment", "entries_for_split",
    "load_manifest", "split_manifest", "write_manifest",
    "GeneratorConfig", "SyntheticScene", "generate_corpus", "generate_scene",
    "make_captions", "parse_caption",
]
