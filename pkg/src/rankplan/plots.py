"""Figure rendering for experiment reports.

Renders a small set of matplotlib figures next to the delimited report:
coverage per method, cross-validated training quality, and geometric-mean
search effort.  Uses the Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .harness import ReportTable  # noqa: E402

BAR_COLOR = "#4878a8"
ACCENT_COLOR = "#c44e52"


def _bar(ax, labels, values, title, ylabel, color=BAR_COLOR, log=False):
    xs = range(len(labels))
    ax.bar(xs, [0 if v is None else v for v in values], color=color)
    for x, v in zip(xs, values):
        if v is None:
            ax.text(x, 0, "None", ha="center", va="bottom", fontsize=8, rotation=90)
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_title(title, fontsize=10)
    ax.set_ylabel(ylabel, fontsize=9)
    if log:
        ax.set_yscale("log")


def render_report_figures(table: ReportTable, out_dir) -> list[Path]:
    """Write coverage/quality/effort PNGs; returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [r.method for r in table.rows]
    created: list[Path] = []

    fig, ax = plt.subplots(figsize=(6, 3.5))
    _bar(ax, labels, [r.solved for r in table.rows],
         f"{table.family}: problems solved (of {table.rows[0].test_count if table.rows else 0})",
         "coverage")
    fig.tight_layout()
    path = out_dir / "coverage.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    created.append(path)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.5))
    _bar(ax1, labels, [r.cv_tau for r in table.rows],
         "cross-validated rank correlation", "cv tau")
    ax1.set_ylim(-1.05, 1.05)
    _bar(ax2, labels, [r.cv_rmse for r in table.rows],
         "cross-validated RMSE", "cv RMSE", color=ACCENT_COLOR)
    fig.tight_layout()
    path = out_dir / "training-quality.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    created.append(path)

    fig, ax = plt.subplots(figsize=(6, 3.5))
    _bar(ax, labels, [r.geo_expansions for r in table.rows],
         "geometric mean expansions (solved only)", "expansions", log=True)
    fig.tight_layout()
    path = out_dir / "search-effort.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    created.append(path)
    return created


def write_report(table: ReportTable, out_dir, figures: bool = True) -> list[Path]:
    """Write report.csv (machine contract), report.txt, and the figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    csv_path.write_text(table.to_csv())
    txt_path = out_dir / "report.txt"
    txt_path.write_text(table.to_text())
    created = [csv_path, txt_path]
    if figures:
        created += render_report_figures(table, out_dir)
    return created
