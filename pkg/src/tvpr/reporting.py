"""Report rendering: aligned text tables, TSV records, and figures.

Every report is written as a family of sibling files derived from one base
path: ``<base>.txt`` (human-readable), ``<base>.tsv`` (machine-readable),
and PNG figures.  Nothing in a report depends on wall-clock time, so two
identical runs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluate import EvalReport
from .metrics import RECALL_RANKS

# strip the library's version stamp so reruns are byte-identical
_PNG_METADATA = {"Software": ""}

_FIG_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _report_paths(base: str | Path) -> tuple[Path, Path]:
    base = Path(base)
    stem = base.with_suffix("") if base.suffix == ".txt" else base
    txt = stem.with_suffix(".txt")
    tsv = stem.with_suffix(".tsv")
    return txt, tsv


def format_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    widths = [max(len(str(h)), *(len(str(r[i])) for r in rows)) if rows else len(str(h))
              for i, h in enumerate(headers)]
    def line(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(headers), sep] + [line(r) for r in rows])


def _save_fig(fig, path: Path) -> None:
    fig.savefig(path, metadata=_PNG_METADATA)
    plt.close(fig)


def _recall_figure(report: EvalReport, path: Path) -> None:
    with plt.rc_context(_FIG_STYLE):
        fig, ax = plt.subplots()
        xs = np.arange(len(RECALL_RANKS))
        values = [report.result.r_at[n] for n in RECALL_RANKS]
        ax.bar(xs, values, color="#3b6ea5")
        ax.set_xticks(xs, [f"R@{n}" for n in RECALL_RANKS])
        ax.set_ylim(0, 100)
        ax.set_ylabel("recall (%)")
        ax.set_title("recall at rank")
        for x, v in zip(xs, values):
            ax.annotate(f"{v:.1f}", (x, v), ha="center", va="bottom", fontsize=9)
        _save_fig(fig, path)


def _rank_histogram(report: EvalReport, path: Path) -> None:
    ranks = np.asarray(report.result.ranks)
    with plt.rc_context(_FIG_STYLE):
        fig, ax = plt.subplots()
        bins = np.arange(1, max(ranks.max() + 2, 3)) - 0.5
        ax.hist(ranks, bins=bins, color="#a5543b")
        ax.set_xlabel("rank of the correct video")
        ax.set_ylabel("queries")
        ax.set_title(f"rank distribution (MdR = {report.result.mdr:.1f})")
        _save_fig(fig, path)


def write_eval_report(base: str | Path, report: EvalReport,
                      meta: dict[str, str]) -> list[Path]:
    """Write <base>.txt/.tsv plus recall and rank figures; returns the paths."""
    txt_path, tsv_path = _report_paths(base)
    recall_png = txt_path.with_name(txt_path.stem + "_recall.png")
    ranks_png = txt_path.with_name(txt_path.stem + "_ranks.png")
    ranks_tsv = txt_path.with_name(txt_path.stem + "_queries.tsv")

    res = report.result
    metric_rows = [[f"R@{n}", f"{res.r_at[n]:.2f}"] for n in RECALL_RANKS]
    metric_rows += [["MdR", f"{res.mdr:.1f}"],
                    ["queries", str(report.num_queries)],
                    ["gallery", str(len(report.gallery_ids))]]

    lines = ["text-to-video retrieval evaluation",
             "protocol: every caption queries the full gallery "
             "(two queries per video; ties broken by clip id)",
             ""]
    lines += [f"{key}: {value}" for key, value in sorted(meta.items())]
    lines += ["", format_table(["metric", "value"], metric_rows), ""]
    txt_path.write_text("\n".join(lines), encoding="utf-8")

    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("metric\tvalue\n")
        for name, value in metric_rows:
            fh.write(f"{name}\t{value}\n")

    with open(ranks_tsv, "w", encoding="utf-8") as fh:
        fh.write("query\trank\ttruth_clip_id\tcaption\n")
        for q, rec in enumerate(report.queries):
            fh.write(f"{q}\t{rec.rank}\t{rec.truth_clip_id}\t{rec.caption}\n")

    _recall_figure(report, recall_png)
    _rank_histogram(report, ranks_png)
    return [txt_path, tsv_path, ranks_tsv, recall_png, ranks_png]


def write_ablation_report(base: str | Path, rows: list[dict]) -> list[Path]:
    """rows: one dict per grid cell with keys cell, ablation, num_frames,
    seeds, r1, r5, r10, r50, mdr (medians over seeds)."""
    txt_path, tsv_path = _report_paths(base)
    png_path = txt_path.with_name(txt_path.stem + "_r1.png")

    headers = ["cell", "components", "frames", "seeds",
               "R@1", "R@5", "R@10", "R@50", "MdR"]
    table_rows = [[r["cell"], r["ablation"], str(r["num_frames"]), str(r["seeds"]),
                   f"{r['r1']:.2f}", f"{r['r5']:.2f}", f"{r['r10']:.2f}",
                   f"{r['r50']:.2f}", f"{r['mdr']:.1f}"] for r in rows]
    lines = ["component ablation (medians over seeds, test split)",
             "",
             format_table(headers, table_rows), ""]
    txt_path.write_text("\n".join(lines), encoding="utf-8")

    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(h.lower().replace("@", "_at_") for h in headers) + "\n")
        for r in table_rows:
            fh.write("\t".join(r) + "\n")

    with plt.rc_context(_FIG_STYLE):
        fig, ax = plt.subplots()
        xs = np.arange(len(rows))
        ax.bar(xs, [r["r1"] for r in rows], color="#3b6ea5")
        labels = [f"{r['ablation']}\n{r['num_frames']}f" for r in rows]
        ax.set_xticks(xs, labels, fontsize=8)
        ax.set_ylabel("R@1 (%)")
        ax.set_title("R@1 by component set")
        _save_fig(fig, png_path)
    return [txt_path, tsv_path, png_path]
