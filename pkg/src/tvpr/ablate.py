"""Component ablation harness: train/evaluate a grid of configurations.

A grid file is an INI document with the usual [train]/[loss]/[split]/[model]
sections as a shared base, plus:

    [data]
    manifest = corpus/manifest.jsonl

    [grid]
    seeds = 0 1 2
    cells = visual_only:1 visual_only:8 vis_mo_concat:8 full_ffa:8

Each cell is ``<components>:<num_frames>``.  Every cell is trained and
evaluated once per seed with the split held fixed across the whole grid, and
the report records the median metric over seeds.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path
from typing import Callable

import numpy as np

from .config import ABLATIONS, TrainConfig, _read_ini, train_config_from_parser
from .data.manifest import entries_for_split, load_manifest, split_manifest
from .errors import ConfigError
from .evaluate import evaluate_model
from .train import train_model


def parse_grid(path: str | Path) -> tuple[Path, TrainConfig, list[tuple[str, int]], list[int]]:
    parser = _read_ini(path)
    if not parser.has_section("data") or "manifest" not in parser["data"]:
        raise ConfigError(f"{path}: grid file needs [data] manifest = <path>")
    manifest = Path(path).parent / parser["data"]["manifest"]
    base = train_config_from_parser(parser)
    if not parser.has_section("grid") or "cells" not in parser["grid"]:
        raise ConfigError(f"{path}: grid file needs [grid] cells = <cell list>")
    cells = []
    for token in parser["grid"]["cells"].replace(",", " ").split():
        ablation, _, frames = token.partition(":")
        if ablation not in ABLATIONS or not frames.isdigit():
            raise ConfigError(
                f"{path}: bad cell {token!r}; expected <components>:<frames> "
                f"with components in {ABLATIONS}")
        cells.append((ablation, int(frames)))
    seeds = [int(s) for s in parser["grid"].get("seeds", "0").replace(",", " ").split()]
    return manifest, base, cells, seeds


def run_cell(base: TrainConfig, ablation: str, num_frames: int, seed: int,
             manifest_path: Path, entries, assignment,
             log: Callable[[str], None] | None = None) -> dict[str, float]:
    tc = replace(base, ablation=ablation, num_frames=num_frames, seed=seed)
    train_entries = entries_for_split(entries, assignment, "train")
    test_entries = entries_for_split(entries, assignment, "test")
    if not test_entries:
        raise ConfigError("grid evaluation needs a nonempty test split")
    model, _ = train_model(tc, train_entries, manifest_path, log=log)
    ev = evaluate_model(model, test_entries, manifest_path, num_frames)
    return {"r1": ev.result.r_at[1], "r5": ev.result.r_at[5],
            "r10": ev.result.r_at[10], "r50": ev.result.r_at[50],
            "mdr": ev.result.mdr}


def run_ablation(grid_path: str | Path,
                 log: Callable[[str], None] | None = None) -> list[dict]:
    """Run the whole grid; returns one median-metrics row per cell."""
    say = log or (lambda line: None)
    manifest_path, base, cells, seeds = parse_grid(grid_path)
    entries = load_manifest(manifest_path)
    assignment = split_manifest(entries, base.split.ratios, base.split.seed,
                                fixed_counts=base.split.fixed_counts,
                                identity_disjoint=base.split.identity_disjoint)
    rows = []
    for idx, (ablation, num_frames) in enumerate(cells, 1):
        per_seed = {k: [] for k in ("r1", "r5", "r10", "r50", "mdr")}
        for seed in seeds:
            say(f"cell {idx}/{len(cells)} {ablation}:{num_frames} seed {seed}")
            metrics = run_cell(base, ablation, num_frames, seed,
                               manifest_path, entries, assignment)
            for key, value in metrics.items():
                per_seed[key].append(value)
        row = {key: float(np.median(vals)) for key, vals in per_seed.items()}
        row.update(cell=f"exp{idx}", ablation=ablation, num_frames=num_frames,
                   seeds=len(seeds))
        say(f"cell {idx}: median R@1 {row['r1']:.2f} MdR {row['mdr']:.1f}")
        rows.append(row)
    return rows
