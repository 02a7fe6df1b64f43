"""Result rendering: CSV tables, aligned markdown, figures, run manifests.

All writers format numbers with fixed precision so a rerun with the same
seed produces byte-identical artifacts. Figures are rendered with the Agg
backend and written next to the delimited output they illustrate.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from . import __version__
from .experiments import CompareReport, ExperimentResult, TimingResult

FLOAT_FMT = "{:.6f}"


@dataclass
class RunManifest:
    """Everything needed to re-execute a run bit-identically with mocks."""

    command: str
    argv: list[str]
    config: dict
    global_seed: int
    backend: dict
    tool_version: str = __version__
    python_version: str = field(default_factory=lambda: sys.version.split()[0])
    platform: str = field(default_factory=platform.platform)
    started_at: str = ""
    finished_at: str = ""

    def write(self, path: str | Path) -> None:
        payload = asdict(self)
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def read(cls, path: str | Path) -> "RunManifest":
        payload = json.loads(Path(path).read_text("utf-8"))
        return cls(**payload)


def now_iso() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _fmt(value: float | None) -> str:
    return "" if value is None else FLOAT_FMT.format(value)


def write_results_csv(results: Sequence[ExperimentResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(
            ["dataset", "method", "train_size", "n_aug", "keep_fraction",
             "n_runs", "mean", "std", "accuracies"]
        )
        for r in results:
            writer.writerow([
                r.dataset,
                r.method,
                r.train_size,
                r.n_aug,
                _fmt(r.keep_fraction),
                r.n_runs,
                _fmt(r.mean),
                _fmt(r.std),
                "|".join(FLOAT_FMT.format(a) for a in r.accuracies),
            ])


def read_results_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def results_markdown(results: Sequence[ExperimentResult]) -> str:
    """Aligned markdown table with the usual mean +/- std percent cells."""
    header = ["method", "n_aug", "keep", "accuracy (%)", "runs"]
    rows = []
    for r in results:
        keep = "" if r.keep_fraction is None else f"{r.keep_fraction:g}"
        n_aug = "" if r.method in ("vanilla",) else str(r.n_aug)
        rows.append([
            r.method,
            n_aug,
            keep,
            f"{100 * r.mean:.2f} ± {100 * r.std:.2f}",
            str(r.n_runs),
        ])
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    def line(cells):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
    out = [line(header), "|" + "|".join("-" * (w + 2) for w in widths) + "|"]
    out.extend(line(row) for row in rows)
    return "\n".join(out) + "\n"


def write_compare_report(report: CompareReport, out_dir: str | Path, stem: str = "compare") -> dict:
    """CSV + markdown + bar figure for a method-comparison run."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    md_path = out_dir / f"{stem}.md"
    fig_path = out_dir / f"{stem}.png"
    write_results_csv(report.results, csv_path)
    md = results_markdown(report.results)
    if report.failures:
        md += "\nfailed cells:\n"
        for fl in report.failures:
            md += (
                f"- {fl.method} n_aug={fl.n_aug} keep={fl.keep_fraction} "
                f"run={fl.run}: {fl.error}\n"
            )
    md_path.write_text(md, encoding="utf-8")
    figure_compare(report.results, fig_path)
    return {"csv": str(csv_path), "markdown": str(md_path), "figure": str(fig_path)}


def figure_compare(results: Sequence[ExperimentResult], path: str | Path) -> None:
    if not results:
        return
    labels = []
    for r in results:
        tag = r.method
        if r.method not in ("vanilla",):
            tag += f" x{r.n_aug}"
        if r.keep_fraction is not None and r.keep_fraction < 1.0:
            tag += f" keep={r.keep_fraction:g}"
        labels.append(tag)
    means = [100 * r.mean for r in results]
    stds = [100 * r.std for r in results]
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(labels)), 4))
    ax.bar(range(len(labels)), means, yerr=stds, capsize=3, color="#4878a8")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("test accuracy (%)")
    ax.set_title(f"{results[0].dataset}: augmentation comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_size_curve(results: Sequence[ExperimentResult], out_dir: str | Path, stem: str = "curve") -> dict:
    """CSV + accuracy-vs-size figure."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    fig_path = out_dir / f"{stem}.png"
    write_results_csv(results, csv_path)

    sizes = [r.train_size for r in results]
    means = [100 * r.mean for r in results]
    stds = [100 * r.std for r in results]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(sizes, means, yerr=stds, marker="o", capsize=3, color="#4878a8")
    ax.set_xlabel("training set size")
    ax.set_ylabel("test accuracy (%)")
    ax.set_title(f"{results[0].dataset}: training size vs accuracy" if results else "")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(fig_path, dpi=150)
    plt.close(fig)
    return {"csv": str(csv_path), "figure": str(fig_path)}


def write_tsne(
    coords: np.ndarray,
    ids: Sequence[int],
    is_augmented: Sequence[bool],
    out_dir: str | Path,
    stem: str = "tsne",
) -> dict:
    """Coordinate CSV (id, is_augmented, x, y) + SVG scatter of real vs augmented."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    svg_path = out_dir / f"{stem}.svg"
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["id", "is_augmented", "x", "y"])
        for i, (point_id, aug) in enumerate(zip(ids, is_augmented)):
            writer.writerow([
                point_id,
                int(aug),
                FLOAT_FMT.format(coords[i, 0]),
                FLOAT_FMT.format(coords[i, 1]),
            ])

    aug_mask = np.array(list(is_augmented), dtype=bool)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(coords[~aug_mask, 0], coords[~aug_mask, 1], s=14, alpha=0.7,
               color="#4878a8", label="real")
    ax.scatter(coords[aug_mask, 0], coords[aug_mask, 1], s=14, alpha=0.7,
               color="#d1605e", label="augmented")
    ax.legend()
    ax.set_xticks([])
    ax.set_yticks([])
    ax.set_title("real vs augmented representations")
    fig.tight_layout()
    fig.savefig(svg_path, metadata={"Date": None})
    plt.close(fig)
    return {"csv": str(csv_path), "figure": str(svg_path)}


def write_timing_csv(rows: Sequence[TimingResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["method", "model", "param_count", "n_sentences", "seconds"])
        for row in rows:
            writer.writerow([
                row.method,
                row.model,
                row.param_count if row.param_count is not None else "",
                row.n_sentences,
                FLOAT_FMT.format(row.seconds),
            ])
