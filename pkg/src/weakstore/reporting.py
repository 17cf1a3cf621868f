"""Delimited and figure output for randomized run campaigns.

A campaign is a sequence of seeded runs of one program.  The report
directory gets three artifacts: ``report.csv`` with one row per
iteration, ``summary.json`` with aggregate assertion results, and
``coverage.png`` plotting distinct observable states against iterations
(with first assertion failures marked).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .history import Value


@dataclass
class RunRecord:
    iteration: int  # 1-based
    seed: int
    observable: tuple[Value, ...]
    assertions: dict[str, bool]  # name -> held?
    distinct_states: int  # cumulative count after this iteration


def summarize(records: list[RunRecord], isolation: str) -> dict:
    names: list[str] = []
    for record in records:
        for name in record.assertions:
            if name not in names:
                names.append(name)
    assertions = {}
    for name in names:
        failures = [r.iteration for r in records if not r.assertions.get(name, True)]
        assertions[name] = {
            "failures": len(failures),
            "first_failure_iteration": failures[0] if failures else None,
        }
    return {
        "isolation": isolation,
        "iterations": len(records),
        "distinct_states": records[-1].distinct_states if records else 0,
        "assertions": assertions,
    }


def write_report(directory: "str | Path", records: list[RunRecord], summary: dict) -> dict:
    """Write report.csv, summary.json and coverage.png; returns the paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = list(summary["assertions"])

    csv_path = directory / "report.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(
            ["iteration", "seed", "distinct_states", "observable"]
            + [f"holds:{name}" for name in names]
        )
        for r in records:
            writer.writerow(
                [r.iteration, r.seed, r.distinct_states, json.dumps(list(r.observable))]
                + [int(r.assertions.get(name, True)) for name in names]
            )

    summary_path = directory / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")

    figure_path = directory / "coverage.png"
    _render_coverage_figure(figure_path, records, summary)
    return {
        "csv": str(csv_path),
        "summary": str(summary_path),
        "figure": str(figure_path),
    }


def _render_coverage_figure(path: Path, records: list[RunRecord], summary: dict) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.2))
    xs = [r.iteration for r in records]
    ys = [r.distinct_states for r in records]
    ax.plot(xs, ys, lw=1.6, label="distinct observable states")
    for name, info in summary["assertions"].items():
        first = info["first_failure_iteration"]
        if first is not None:
            ax.axvline(first, ls="--", lw=1.0, alpha=0.7, color="tab:red")
            ax.annotate(
                f"{name} fails",
                xy=(first, max(ys) if ys else 1),
                rotation=90,
                fontsize=8,
                va="top",
                ha="right",
            )
    ax.set_xlabel("iteration")
    ax.set_ylabel("distinct states")
    ax.set_title(f"coverage under {summary['isolation']}")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
