"""Command-line interface.

Subcommands: gen-data (synthesize a corpus), train, eval, ablate, retrieve.
All configuration files are INI key-value documents; the TVPR_SEED
environment variable overrides any configured seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .ablate import run_ablation
from .config import TrainConfig, load_generator_config, load_train_config
from .data.manifest import entries_for_split, load_manifest, split_manifest
from .data.synth import generate_corpus
from .errors import CheckpointError, ConfigError, ManifestError
from .evaluate import encode_gallery, evaluate_model, rank_videos_for_text
from .model import TVPRModel
from .motion import load_motion_features
from .train import run_training


def _cmd_gen_data(args) -> int:
    cfg = load_generator_config(args.config)
    entries = generate_corpus(cfg, args.out)
    print(f"wrote {len(entries)} clips ({cfg.frames}x3x{cfg.height}x{cfg.width}) "
          f"and manifest.jsonl under {args.out}")
    return 0


def _cmd_train(args) -> int:
    tc = load_train_config(args.config)
    entries = load_manifest(args.manifest)
    _, losses = run_training(tc, args.manifest, args.out, entries, log=print)
    print(f"checkpoint written to {args.out} (final loss {losses[-1]:.6f})")
    return 0


def _stored_train_config(metadata: dict[str, str]) -> TrainConfig:
    raw = metadata.get("train_config")
    return TrainConfig.from_json(raw) if raw else TrainConfig()


def _cmd_eval(args) -> int:
    model, metadata = TVPRModel.load(args.ckpt)
    tc = _stored_train_config(metadata)
    entries = load_manifest(args.manifest)
    assignment = split_manifest(entries, tc.split.ratios, tc.split.seed,
                                fixed_counts=tc.split.fixed_counts,
                                identity_disjoint=tc.split.identity_disjoint)
    subset = entries_for_split(entries, assignment, args.split)
    if not subset:
        raise ConfigError(f"split {args.split!r} selects no entries; "
                          f"sizes are train={len(assignment.train)} "
                          f"val={len(assignment.val)} test={len(assignment.test)}")
    motion_features = (load_motion_features(tc.motion_features)
                       if tc.motion_features else None)
    report = evaluate_model(model, subset, args.manifest, tc.num_frames,
                            motion_features=motion_features)
    from .reporting import write_eval_report

    meta = {"checkpoint": str(args.ckpt), "manifest": str(args.manifest),
            "split": args.split, "ablation": model.cfg.ablation,
            "num_frames": str(tc.num_frames)}
    paths = write_eval_report(args.report, report, meta)
    print(report.result.summary_line())
    print("report files: " + " ".join(str(p) for p in paths))
    return 0


def _cmd_ablate(args) -> int:
    rows = run_ablation(args.grid, log=print)
    from .reporting import write_ablation_report

    paths = write_ablation_report(args.report, rows)
    print("report files: " + " ".join(str(p) for p in paths))
    return 0


def _cmd_retrieve(args) -> int:
    model, metadata = TVPRModel.load(args.ckpt)
    tc = _stored_train_config(metadata)
    entries = load_manifest(args.manifest)
    motion_features = (load_motion_features(tc.motion_features)
                       if tc.motion_features else None)
    gallery_ids, vid_proj = encode_gallery(model, entries, args.manifest,
                                           tc.num_frames,
                                           motion_features=motion_features)
    hits = rank_videos_for_text(model, args.query, gallery_ids, vid_proj,
                                args.topk)
    by_id = {e.clip_id: e for e in entries}
    print(f"query: {args.query}")
    for rank, (clip_id, score) in enumerate(hits, 1):
        entry = by_id[clip_id]
        print(f"{rank:3d}  {score:.4f}  {clip_id}  {entry.identity_id}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tvpr",
        description="text-to-video person retrieval: corpus generation, "
                    "contrastive training, retrieval evaluation, ablations")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-data", help="synthesize a captioned video corpus")
    gen.add_argument("--config", required=True, help="generator INI file")
    gen.add_argument("--out", required=True, help="output corpus directory")
    gen.set_defaults(handler=_cmd_gen_data)

    tr = sub.add_parser("train", help="train a retrieval model")
    tr.add_argument("--config", required=True, help="training INI file")
    tr.add_argument("--manifest", required=True, help="corpus manifest")
    tr.add_argument("--out", required=True, help="checkpoint output path")
    tr.set_defaults(handler=_cmd_train)

    ev = sub.add_parser("eval", help="evaluate retrieval quality on a split")
    ev.add_argument("--ckpt", required=True, help="model checkpoint")
    ev.add_argument("--manifest", required=True, help="corpus manifest")
    ev.add_argument("--split", default="test",
                    choices=["train", "val", "test", "all"])
    ev.add_argument("--report", required=True,
                    help="report base path (writes .txt, .tsv, figures)")
    ev.set_defaults(handler=_cmd_eval)

    ab = sub.add_parser("ablate", help="run a component/frame-count grid")
    ab.add_argument("--grid", required=True, help="grid INI file")
    ab.add_argument("--report", required=True, help="report base path")
    ab.set_defaults(handler=_cmd_ablate)

    rt = sub.add_parser("retrieve", help="rank gallery videos for a text query")
    rt.add_argument("--ckpt", required=True)
    rt.add_argument("--manifest", required=True)
    rt.add_argument("--query", required=True)
    rt.add_argument("--topk", type=int, default=5)
    rt.set_defaults(handler=_cmd_retrieve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except (ConfigError, ManifestError, CheckpointError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
