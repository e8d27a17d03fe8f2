"""Comparison reports: per-method metric means, text table, CSV, and figures.

Report JSON is fully derived from the input records and settings, with no
timestamps or absolute paths, so identical runs produce identical bytes.
"""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Sequence

from .config import Settings
from .corpus import METHODS
from .evaluate import METRICS, EvalRecord

logger = logging.getLogger(__name__)


def build_report(records: Sequence[EvalRecord], settings: Settings) -> dict:
    """Aggregate records into the per-method mean table."""
    methods = [m for m in METHODS if any(r.method == m for r in records)]
    per_method: dict[str, dict] = {}
    for method in methods:
        rows = [r for r in records if r.method == method]
        metrics = {}
        for metric in METRICS:
            values = [r.scores[metric] for r in rows if r.scores.get(metric) is not None]
            missing = len(rows) - len(values)
            metrics[metric] = {
                "mean": round(sum(values) / len(values), 6) if values else None,
                "count": len(values),
                "missing": missing,
            }
        per_method[method] = {
            "questions": len(rows),
            "metrics": metrics,
        }
    return {
        "settings": {
            "k": settings.k,
            "retrieval_mode": settings.retrieval_mode,
            "hops": settings.hops,
            "prompt_budget_chars": settings.prompt_budget_chars,
            "triple_budget_chars": settings.triple_budget_chars,
        },
        "methods": per_method,
        "metric_names": list(METRICS),
    }


def format_report_text(report: dict) -> str:
    """Fixed-width table, one row per metric and one column per method."""
    methods = list(report["methods"])
    header = ["metric"] + methods
    rows = [header]
    for metric in report["metric_names"]:
        row = [metric]
        for method in methods:
            cell = report["methods"][method]["metrics"][metric]
            mean = cell["mean"]
            text = f"{mean:.4f}" if mean is not None else "n/a"
            if cell["missing"]:
                text += f" ({cell['missing']} missing)"
            row.append(text)
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)))
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    counts = ", ".join(
        f"{m}: {report['methods'][m]['questions']} questions" for m in methods
    )
    tail = (
        f"\nretrieval k={report['settings']['k']}"
        f" mode={report['settings']['retrieval_mode']}"
        f" hops={report['settings']['hops']}"
    )
    return "\n".join(lines) + "\n\n" + counts + tail + "\n"


def write_report_json(report: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_metrics_csv(report: dict, path: str | Path) -> None:
    """Delimited per-metric data behind the bar charts."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    methods = list(report["methods"])
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric"] + methods)
        for metric in report["metric_names"]:
            row = [metric]
            for method in methods:
                mean = report["methods"][method]["metrics"][metric]["mean"]
                row.append("" if mean is None else f"{mean:.6f}")
            writer.writerow(row)


def render_figures(report: dict, out_dir: str | Path) -> list[Path]:
    """Grouped per-metric bars plus an overall-mean bar, written as PNGs."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    methods = list(report["methods"])
    metrics = report["metric_names"]
    written = []

    fig, ax = plt.subplots(figsize=(10, 5))
    width = 0.8 / max(1, len(methods))
    for mi, method in enumerate(methods):
        values = [
            report["methods"][method]["metrics"][metric]["mean"] or 0.0
            for metric in metrics
        ]
        positions = [i + mi * width for i in range(len(metrics))]
        ax.bar(positions, values, width=width, label=method)
    ax.set_xticks([i + width * (len(methods) - 1) / 2 for i in range(len(metrics))])
    ax.set_xticklabels(metrics, rotation=30, ha="right")
    ax.set_ylim(0, 1)
    ax.set_ylabel("mean score")
    ax.set_title("Per-metric comparison")
    ax.legend()
    fig.tight_layout()
    by_metric = out_dir / "comparison_by_metric.png"
    fig.savefig(by_metric)
    plt.close(fig)
    written.append(by_metric)

    fig, ax = plt.subplots(figsize=(5, 4))
    overall = []
    for method in methods:
        means = [
            report["methods"][method]["metrics"][metric]["mean"]
            for metric in metrics
        ]
        present = [m for m in means if m is not None]
        overall.append(sum(present) / len(present) if present else 0.0)
    ax.bar(methods, overall, color=["#4c72b0", "#dd8452", "#55a868"][: len(methods)])
    ax.set_ylim(0, 1)
    ax.set_ylabel("mean of metric means")
    ax.set_title("Overall comparison")
    fig.tight_layout()
    overall_path = out_dir / "comparison_overall.png"
    fig.savefig(overall_path)
    plt.close(fig)
    written.append(overall_path)

    logger.info("wrote %d figure(s) to %s", len(written), out_dir)
    return written


def write_report_bundle(
    report: dict,
    out_json: str | Path,
    *,
    with_figures: bool = True,
) -> None:
    """report.json plus the text table, CSV data, and PNG figures beside it."""
    out_json = Path(out_json)
    write_report_json(report, out_json)
    stem = out_json.with_suffix("")
    Path(f"{stem}.txt").write_text(format_report_text(report), encoding="utf-8")
    write_metrics_csv(report, f"{stem}_metrics.csv")
    if with_figures:
        render_figures(report, out_json.parent / "figures")
