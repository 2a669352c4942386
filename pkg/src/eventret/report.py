"""Evaluation and training reports: delimited records, a plain-text table,
and matplotlib figures rendered to files alongside them."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .jsonl import write_records


def format_metrics_table(reports) -> str:
    """Fixed-width table, one row per variant, one column per k."""
    ks = sorted({k for report in reports for k in report.hits})
    header = ["variant".ljust(16)] + [f"Hits@{k}".rjust(9) for k in ks] + ["queries".rjust(9)]
    lines = ["".join(header)]
    for report in reports:
        cells = [report.variant.ljust(16)]
        for k in ks:
            value = report.hits.get(k)
            cells.append(("n/a" if value is None else f"{value:.4f}").rjust(9))
        cells.append(str(report.n_queries).rjust(9))
        lines.append("".join(cells))
    return "\n".join(lines) + "\n"


def write_metrics(reports, records_path, table_path) -> None:
    records = []
    for report in reports:
        records.extend(report.to_records())
    write_records(records_path, records)
    Path(table_path).write_text(format_metrics_table(reports), encoding="utf-8")


def render_hits_figure(reports, path) -> None:
    """Grouped bar chart of Hits@k per variant."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ks = sorted({k for report in reports for k in report.hits})
    fig, ax = plt.subplots(figsize=(7, 4))
    group_width = 0.8
    bar_width = group_width / max(len(reports), 1)
    for i, report in enumerate(reports):
        xs = [j + i * bar_width for j in range(len(ks))]
        ys = [report.hits.get(k) or 0.0 for k in ks]
        ax.bar(xs, ys, width=bar_width * 0.95, label=report.variant or "run")
    ax.set_xticks([j + group_width / 2 - bar_width / 2 for j in range(len(ks))])
    ax.set_xticklabels([f"Hits@{k}" for k in ks])
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("hit rate")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_loss_figure(trace, path) -> None:
    """Per-epoch training loss curve."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(1, len(trace) + 1), trace)
    ax.set_xlabel("epoch")
    ax.set_ylabel("mean loss")
    ax.set_yscale("log")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
