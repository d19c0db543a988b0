"""Configuration: model presets, training settings, INI file parsing.

Config files use INI key-value syntax (configparser).  The ``TVPR_SEED``
environment variable, when set, overrides every seed a config file supplies
so sweeps can be driven externally without editing files.
"""

from __future__ import annotations

import configparser
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from .errors import ConfigError

ABLATIONS = ("visual_only", "motion_only", "vis_mo_concat", "full_ffa")
RELATION_HEADS = ("cosine", "mlp")
SEED_ENV_VAR = "TVPR_SEED"


@dataclass(frozen=True)
class ModelConfig:
    preset: str
    ablation: str = "full_ffa"
    # visual branch
    d_vis: int = 64
    patch: int = 8
    height: int = 32
    width: int = 32
    max_frames: int = 16
    vis_layers: int = 2
    vis_heads: int = 4
    # motion branch
    d_mo: int = 32
    mo_mid: int = 16
    mo_layers: int = 2
    mo_heads: int = 2
    mo_dropout: float = 0.1
    max_seconds: int = 16
    # caption branch
    d_txt: int = 64
    max_len: int = 32
    txt_layers: int = 2
    txt_heads: int = 2
    txt_dropout: float = 0.1
    # fusion
    d_ffa: int = 64
    ffa_layers: int = 2
    ffa_heads: int = 4
    ffa_dropout: float = 0.1
    # relation
    d_rn: int = 64
    relation_head: str = "cosine"

    def __post_init__(self):
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation {self.ablation!r} not in {ABLATIONS}")
        if self.relation_head not in RELATION_HEADS:
            raise ConfigError(
                f"relation_head {self.relation_head!r} not in {RELATION_HEADS}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))


_PRESETS: dict[str, dict] = {
    # single-workstation scale: every acceptance check runs on one CPU core
    "desk": {},
    # dimensions reported for the full system; provided for completeness,
    # not trained here (needs the real corpus and pretrained encoders)
    "paper": dict(
        d_vis=768, patch=16, height=224, width=224, max_frames=15,
        vis_layers=12, vis_heads=12,
        d_mo=256, mo_mid=64, mo_layers=4, mo_heads=4,
        d_txt=768, max_len=64, txt_layers=12, txt_heads=12,
        d_ffa=512, ffa_layers=12, ffa_heads=12,
        d_rn=512),
}


def model_config(preset: str = "desk", ablation: str = "full_ffa",
                 **overrides) -> ModelConfig:
    if preset not in _PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(_PRESETS)}")
    fields = dict(_PRESETS[preset])
    fields.update(overrides)
    return ModelConfig(preset=preset, ablation=ablation, **fields)


@dataclass(frozen=True)
class SplitConfig:
    ratios: tuple[float, float, float] = (0.6, 0.05, 0.35)
    seed: int = 0
    identity_disjoint: bool = False
    fixed_counts: tuple[int, int, int] | None = None


@dataclass(frozen=True)
class TrainConfig:
    preset: str = "desk"
    ablation: str = "full_ffa"
    learning_rate: float = 3e-5
    epochs: int = 30
    batch_size: int = 8
    seed: int = 0
    num_frames: int = 8
    temperature: float = 0.05
    denominator_mode: str = "paper_exclusive"
    symmetric: bool = False
    relation_head: str = "cosine"
    split: SplitConfig = field(default_factory=SplitConfig)
    motion_features: str | None = None
    model_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.batch_size < 2 and self.denominator_mode == "paper_exclusive":
            raise ConfigError(
                "batch_size must be at least 2 under paper_exclusive: a batch "
                "of one leaves the loss denominator empty")
        if self.epochs < 1 or self.num_frames < 1:
            raise ConfigError("epochs and num_frames must be positive")

    def model(self) -> ModelConfig:
        return model_config(self.preset, self.ablation,
                            relation_head=self.relation_head,
                            **self.model_overrides)

    def to_json(self) -> str:
        d = asdict(self)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        d = json.loads(text)
        sp = d.pop("split")
        if sp.get("fixed_counts") is not None:
            sp["fixed_counts"] = tuple(sp["fixed_counts"])
        sp["ratios"] = tuple(sp["ratios"])
        return cls(split=SplitConfig(**sp), **d)


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{SEED_ENV_VAR}={raw!r} is not an integer") from exc


def _read_ini(path: str | Path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    found = parser.read(path)
    if not found:
        raise ConfigError(f"config file {path} does not exist or is unreadable")
    return parser


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.replace(",", " ").split())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.replace(",", " ").split())


_MODEL_INT_KEYS = {
    "d_vis", "patch", "height", "width", "max_frames", "vis_layers", "vis_heads",
    "d_mo", "mo_mid", "mo_layers", "mo_heads", "max_seconds",
    "d_txt", "max_len", "txt_layers", "txt_heads",
    "d_ffa", "ffa_layers", "ffa_heads", "d_rn",
}
_MODEL_FLOAT_KEYS = {"mo_dropout", "txt_dropout", "ffa_dropout"}


def train_config_from_parser(parser: configparser.ConfigParser) -> TrainConfig:
    t = parser["train"] if parser.has_section("train") else {}
    loss = parser["loss"] if parser.has_section("loss") else {}
    sp = parser["split"] if parser.has_section("split") else {}

    overrides: dict = {}
    if parser.has_section("model"):
        for key, value in parser["model"].items():
            if key in _MODEL_INT_KEYS:
                overrides[key] = int(value)
            elif key in _MODEL_FLOAT_KEYS:
                overrides[key] = float(value)
            else:
                raise ConfigError(f"unknown model override {key!r}")

    defaults = TrainConfig()
    seed = int(t.get("seed", defaults.seed))
    split_seed = int(sp.get("seed", seed))
    env = _env_seed()
    if env is not None:
        seed = env
        split_seed = env

    fixed = sp.get("fixed_counts")
    split = SplitConfig(
        ratios=_floats(sp.get("ratios", "0.6 0.05 0.35")),
        seed=split_seed,
        identity_disjoint=str(sp.get("identity_disjoint", "false")).lower()
        in ("1", "true", "yes", "on"),
        fixed_counts=_ints(fixed) if fixed else None)

    return TrainConfig(
        preset=t.get("preset", defaults.preset),
        ablation=t.get("ablation", defaults.ablation),
        learning_rate=float(t.get("learning_rate", defaults.learning_rate)),
        epochs=int(t.get("epochs", defaults.epochs)),
        batch_size=int(t.get("batch_size", defaults.batch_size)),
        seed=seed,
        num_frames=int(t.get("num_frames", defaults.num_frames)),
        temperature=float(loss.get("temperature", defaults.temperature)),
        denominator_mode=loss.get("denominator_mode", defaults.denominator_mode),
        symmetric=str(loss.get("symmetric", "false")).lower()
        in ("1", "true", "yes", "on"),
        relation_head=t.get("relation_head", defaults.relation_head),
        split=split,
        motion_features=t.get("motion_features") or None,
        model_overrides=overrides)


def load_train_config(path: str | Path) -> TrainConfig:
    return train_config_from_parser(_read_ini(path))


def load_generator_config(path: str | Path):
    from .data.synth import GeneratorConfig

    parser = _read_ini(path)
    if not parser.has_section("generate"):
        raise ConfigError(f"{path}: missing [generate] section")
    g = parser["generate"]
    seed = int(g.get("seed", 0))
    env = _env_seed()
    if env is not None:
        seed = env
    return GeneratorConfig(
        num_clips=int(g.get("num_clips", "0") or 0),
        frames=int(g.get("frames", 8)),
        height=int(g.get("height", 32)),
        width=int(g.get("width", 32)),
        seed=seed,
        occlusion=g.get("occlusion", "mixed"),
        num_color_pairs=int(g.get("num_color_pairs", 0)),
        frame_spacing=float(g.get("frame_spacing", 1.0)))
