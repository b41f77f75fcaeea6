"""Report rendering: outcome tables, intensity curves, ROC plots.

Tables go out as aligned-column text plus CSV; curves and ROC sweeps go
out as CSV plus standalone SVG line charts rendered headlessly.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from strainveil.evaluate import EvaluationReport, IntensitySeries, Outcome

TABLE_HEADER = ("Case", "% of videos", "% change")


def render_table_text(rows, noise_floor: float) -> str:
    """Aligned three-column outcome table with a header naming the
    statistic, since 'percent change' is ambiguous without it."""
    lines = [
        "# suppression outcome report",
        "# statistic: mean intensity over the event window (whole series when unannotated)",
        f"# noise_floor: {noise_floor:g}",
    ]
    body = [TABLE_HEADER]
    for case, pct_videos, mean_change in rows:
        change = "-" if mean_change is None else f"{round(mean_change)}%"
        body.append((case.value, f"{pct_videos}%", change))
    widths = [max(len(r[c]) for r in body) for c in range(3)]
    for r in body:
        lines.append("  ".join(r[c].ljust(widths[c]) for c in range(3)).rstrip())
    return "\n".join(lines) + "\n"


def write_report(report: EvaluationReport, out_dir: str | Path, noise_floor: float) -> list[Path]:
    """Write report.txt, report.csv and per_video.csv; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    txt = out_dir / "report.txt"
    txt.write_text(render_table_text(report.rows, noise_floor))

    table_csv = out_dir / "report.csv"
    with open(table_csv, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["case", "pct_videos", "mean_change_pct"])
        for case, pct_videos, mean_change in report.rows:
            w.writerow([case.value, pct_videos, "" if mean_change is None else repr(mean_change)])

    per_video = out_dir / "per_video.csv"
    with open(per_video, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["video_id", "case", "change_pct"])
        for vid, oc in report.per_video:
            w.writerow([vid, oc.case.value, repr(oc.change_pct)])
    return [txt, table_csv, per_video]


def emit_curves(before: IntensitySeries, after: IntensitySeries, path: str | Path) -> list[Path]:
    """Per-frame intensity before vs after as CSV plus an SVG line chart
    with the event window marked; `path` is the extensionless stem."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    csv_path = path.with_suffix(".csv")
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["frame", "before", "after"])
        for frame, b, a in zip(before.frames, before.scores, after.scores):
            w.writerow([int(frame), repr(float(b)), repr(float(a))])

    svg_path = path.with_suffix(".svg")
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(before.frames, before.scores, color="tab:green", label="before")
    ax.plot(after.frames, after.scores, color="tab:blue", label="after")
    if before.event_start is not None:
        for x in (before.event_start, before.event_end):
            ax.axvline(x, color="gray", linestyle="--", linewidth=0.8)
    ax.set_xlabel("frame")
    ax.set_ylabel("intensity")
    ax.set_title(before.video_id)
    ax.legend()
    fig.tight_layout()
    fig.savefig(svg_path)
    plt.close(fig)
    return [csv_path, svg_path]


def write_roc(curves: dict[str, tuple[list[tuple[float, float]], float]],
              out_dir: str | Path) -> list[Path]:
    """ROC sweeps (e.g. {'before': ..., 'after': ...}) as one CSV and one
    SVG; the legend carries each curve's AUC."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "roc.csv"
    with open(csv_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["curve", "fpr", "tpr"])
        for name, (points, _) in curves.items():
            for fpr, tpr in points:
                w.writerow([name, repr(fpr), repr(tpr)])

    svg_path = out_dir / "roc.svg"
    fig, ax = plt.subplots(figsize=(5, 5))
    palette = {"before": "tab:blue", "after": "tab:green"}
    for name, (points, auc) in curves.items():
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, color=palette.get(name), label=f"{name} (AUC {auc:.3f})")
    ax.plot([0, 1], [0, 1], color="gray", linestyle=":", linewidth=0.8)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(svg_path)
    plt.close(fig)
    return [csv_path, svg_path]
