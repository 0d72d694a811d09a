"""Report emission: JSON, fixed-width text table, per-pair CSV, and figures.

Output is deterministic for a deterministic run: stable key order, repr
floats in the CSV, %.4f in the table, and Agg-rendered PNGs at a fixed dpi.
Set SOURCE_DATE_EPOCH to pin the report timestamp for byte-stable reruns.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .harness import AGGREGATE_KEYS, MetricReport, pair_scalars

TABLE_COLUMNS = (
    ("Correctness", "judge_correctness"),
    ("Detail", "judge_detail"),
    ("Context", "judge_context"),
    ("Temporal", "judge_temporal"),
    ("CIDEr", "cider"),
    ("Rouge-L", "rouge_l"),
    ("AutoDQ", "autodq"),
    ("TEM", "tem"),
)


def render_text_table(report: MetricReport) -> str:
    """One aggregate row in benchmark-table column order."""
    headers = ["Pairs"] + [label for label, _ in TABLE_COLUMNS]
    values = [str(report.metadata["pair_count"])]
    for _, key in TABLE_COLUMNS:
        value = report.aggregates.get(key)
        values.append("-" if value is None else f"{value:.4f}")
    widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
    header_row = "  ".join(h.rjust(w) for h, w in zip(headers, widths))
    value_row = "  ".join(v.rjust(w) for v, w in zip(values, widths))
    lines = [
        f"backend: {report.metadata['backend']}",
        f"timestamp: {report.metadata['timestamp']}",
        f"config: {report.metadata['config_hash'][:12]}",
        "",
        header_row,
        value_row,
    ]
    if report.metadata["error_count"]:
        lines.append("")
        lines.append(f"pairs with errors: {report.metadata['error_count']}")
    return "\n".join(lines) + "\n"


def write_csv(report: MetricReport, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["id"] + [key for _, key in TABLE_COLUMNS] + ["errors"])
        for record in report.pairs:
            scalars = pair_scalars(record)
            row = [record["id"]]
            for _, key in TABLE_COLUMNS:
                value = scalars.get(key)
                row.append("" if value is None else repr(value))
            row.append("; ".join(f"{k}: {v}" for k, v in record["errors"].items()))
            writer.writerow(row)


def render_figures(report: MetricReport, figures_dir: Path) -> list[Path]:
    """Bar chart of aggregates plus per-pair score histograms."""
    written: list[Path] = []
    present = [
        (label, key, report.aggregates[key])
        for label, key in TABLE_COLUMNS
        if report.aggregates.get(key) is not None
    ]
    if present:
        figures_dir.mkdir(parents=True, exist_ok=True)
        labels = [label for label, _, _ in present]
        values = [value for _, _, value in present]
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.bar(range(len(values)), values, color="#4878a8")
        ax.set_xticks(range(len(values)))
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylabel("aggregate score")
        ax.set_title(f"Aggregate scores ({report.metadata['backend']})")
        fig.tight_layout()
        path = figures_dir / "aggregate_scores.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    distributions = []
    for label, key in TABLE_COLUMNS:
        values = [
            pair_scalars(record)[key]
            for record in report.pairs
            if key in pair_scalars(record)
        ]
        if values:
            distributions.append((label, values))
    if distributions:
        figures_dir.mkdir(parents=True, exist_ok=True)
        fig, axes = plt.subplots(
            1, len(distributions), figsize=(3 * len(distributions), 3), squeeze=False
        )
        for ax, (label, values) in zip(axes[0], distributions):
            ax.hist(values, bins=10, color="#4878a8")
            ax.set_title(label)
            ax.set_xlabel("score")
        axes[0][0].set_ylabel("pairs")
        fig.tight_layout()
        path = figures_dir / "score_distributions.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
    return written


def write_report(report: MetricReport, out_dir: Path | str) -> dict[str, Path]:
    """Write report.json, report.txt, per_pair.csv, and figures under out_dir."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out_dir / "report.json",
        "text": out_dir / "report.txt",
        "csv": out_dir / "per_pair.csv",
    }
    paths["json"].write_text(
        json.dumps(report.to_dict(), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    paths["text"].write_text(render_text_table(report), encoding="utf-8")
    write_csv(report, paths["csv"])
    for figure_path in render_figures(report, out_dir / "figures"):
        paths[figure_path.stem] = figure_path
    return paths


def render_compare_text(delta: dict) -> str:
    """Fixed-width delta table for two compared runs."""
    lines = [
        f"shared pairs: {len(delta['shared_ids'])}",
        f"only in A: {len(delta['only_in_a'])}, only in B: {len(delta['only_in_b'])}",
        "",
    ]
    label_by_key = {key: label for label, key in TABLE_COLUMNS}
    header = f"{'metric':<12} {'delta (B-A)':>12}"
    lines.append(header)
    lines.append("-" * len(header))
    for key in AGGREGATE_KEYS:
        value = delta["aggregate_deltas"].get(key)
        rendered = "-" if value is None else f"{value:+.4f}"
        lines.append(f"{label_by_key.get(key, key):<12} {rendered:>12}")
    changed = {
        pair_id: {key: value for key, value in metrics.items() if value != 0.0}
        for pair_id, metrics in delta["pair_deltas"].items()
    }
    changed = {pair_id: metrics for pair_id, metrics in changed.items() if metrics}
    lines.append("")
    lines.append(f"pairs with changed scores: {len(changed)}")
    for pair_id in sorted(changed):
        parts = ", ".join(
            f"{key} {value:+.4f}" for key, value in sorted(changed[pair_id].items())
        )
        lines.append(f"  {pair_id}: {parts}")
    return "\n".join(lines) + "\n"
