"""Suppression outcome evaluation.

Expression-intensity scores from external detectors arrive as CSV, one row
per frame. Each video is classified as Removed, Reduced or Increased by
comparing the mean intensity over the annotated event window before vs
after suppression, and the corpus is aggregated into a three-row table.
ROC samples are per-frame scores labeled by event-window membership.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from strainveil.errors import InputError

NOISE_FLOOR_DEFAULT = 1.0
INCREASE_CAP_PCT = 999.0


class Outcome(enum.Enum):
    REMOVED = "Removed"
    REDUCED = "Reduced"
    INCREASED = "Increased"


@dataclass(frozen=True)
class OutcomeCase:
    case: Outcome
    change_pct: float

    def __post_init__(self):
        if self.case is Outcome.REMOVED and self.change_pct != 100.0:
            raise ValueError("Removed implies change_pct == 100")


@dataclass
class IntensitySeries:
    """Per-frame intensity of one expression in one video (0..99 scale or
    raw detector evidence), with an optional annotated event window."""

    video_id: str
    scores: np.ndarray
    frames: np.ndarray | None = None
    event_start: int | None = None
    event_end: int | None = None

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 1 or self.scores.size == 0:
            raise ValueError("scores must be a non-empty 1D array")
        if not np.isfinite(self.scores).all():
            raise ValueError("scores must be finite")
        if self.frames is None:
            self.frames = np.arange(self.scores.size)
        else:
            self.frames = np.asarray(self.frames, dtype=np.int64)
            if self.frames.shape != self.scores.shape:
                raise ValueError("frames and scores must have equal length")
        has_window = (self.event_start is None) != (self.event_end is None)
        if has_window:
            raise ValueError("event_start and event_end must be set together")
        if self.event_start is not None and not self.event_start < self.event_end:
            raise ValueError("event_start must be < event_end")

    def window_scores(self) -> np.ndarray:
        """Scores inside the event window; the whole series when unset."""
        if self.event_start is None:
            return self.scores
        inside = (self.frames >= self.event_start) & (self.frames <= self.event_end)
        return self.scores[inside]


@dataclass
class EvaluationReport:
    per_video: list[tuple[str, OutcomeCase]]
    # one row per case, fixed order Removed/Reduced/Increased:
    # (outcome, % of videos as integer, mean change_pct or None for an empty case)
    rows: list[tuple[Outcome, int, float | None]] = field(default_factory=list)


def load_intensity_csv(path: str | Path) -> list[IntensitySeries]:
    """Read `video_id,frame,score[,event_start,event_end]` rows into one
    series per video. Frames must be strictly increasing within a video;
    the event window, when given, must agree across the video's rows."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing intensity CSV: {path}")
    order: list[str] = []
    rows: dict[str, list[tuple[int, float]]] = {}
    windows: dict[str, tuple[int, int] | None] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        for lineno, row in enumerate(reader, start=1):
            if not row or (lineno == 1 and row[0].strip().lower() == "video_id"):
                continue
            if len(row) not in (3, 5):
                raise InputError(f"{path}:{lineno}: expected 3 or 5 columns, got {len(row)}")
            vid = row[0].strip()
            try:
                frame = int(row[1])
                score = float(row[2])
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric frame or score") from None
            if not math.isfinite(score):
                raise InputError(f"{path}:{lineno}: non-finite score")
            window = None
            if len(row) == 5 and (row[3].strip() or row[4].strip()):
                try:
                    window = (int(row[3]), int(row[4]))
                except ValueError:
                    raise InputError(f"{path}:{lineno}: non-numeric event window") from None
            if vid not in rows:
                order.append(vid)
                rows[vid] = []
                windows[vid] = window
            elif window is not None:
                if windows[vid] is not None and windows[vid] != window:
                    raise InputError(f"{path}:{lineno}: conflicting event window for '{vid}'")
                windows[vid] = window
            prev = rows[vid][-1][0] if rows[vid] else None
            if prev is not None and frame <= prev:
                kind = "duplicate" if frame == prev else "unordered"
                raise InputError(f"{path}:{lineno}: {kind} frame {frame} in video '{vid}'")
            rows[vid].append((frame, score))

    series = []
    for vid in order:
        frames = np.array([f for f, _ in rows[vid]], dtype=np.int64)
        scores = np.array([s for _, s in rows[vid]], dtype=np.float64)
        window = windows[vid]
        try:
            series.append(
                IntensitySeries(
                    vid,
                    scores,
                    frames=frames,
                    event_start=window[0] if window else None,
                    event_end=window[1] if window else None,
                )
            )
        except ValueError as e:
            raise InputError(f"{path}: video '{vid}': {e}") from e
    if not series:
        raise InputError(f"{path}: no intensity rows")
    return series


def classify_outcome(
    before: IntensitySeries,
    after: IntensitySeries,
    noise_floor: float = NOISE_FLOOR_DEFAULT,
) -> OutcomeCase:
    """Judge one video: Removed when the post-suppression mean falls at or
    under the noise floor, otherwise Increased/Reduced by relative change.
    """
    if before.video_id != after.video_id:
        raise ValueError(f"video_id mismatch: '{before.video_id}' vs '{after.video_id}'")
    if before.scores.size != after.scores.size:
        raise ValueError(
            f"length mismatch for '{before.video_id}': "
            f"{before.scores.size} vs {after.scores.size}"
        )
    b = float(before.window_scores().mean())
    a = float(after.window_scores().mean())
    if a <= noise_floor:
        return OutcomeCase(Outcome.REMOVED, 100.0)
    if a > b:
        if b <= 0.0:
            return OutcomeCase(Outcome.INCREASED, INCREASE_CAP_PCT)
        return OutcomeCase(Outcome.INCREASED, min((a - b) * 100.0 / b, INCREASE_CAP_PCT))
    if b == 0.0:
        return OutcomeCase(Outcome.REDUCED, 0.0)
    return OutcomeCase(Outcome.REDUCED, (b - a) * 100.0 / b)


def aggregate(outcomes: list[OutcomeCase]) -> list[tuple[Outcome, int, float | None]]:
    """Corpus table: per case the integer percent of videos and the mean
    change among that case's videos. Removed is 100% change by definition,
    so its row says 100 even when no video landed there; the other cases
    report None when empty."""
    if not outcomes:
        raise ValueError("need at least 1 outcome")
    n = len(outcomes)
    table = []
    for case in Outcome:
        changes = [o.change_pct for o in outcomes if o.case is case]
        pct_videos = round(len(changes) * 100.0 / n)
        if changes:
            mean_change = float(np.mean(changes))
        else:
            mean_change = 100.0 if case is Outcome.REMOVED else None
        table.append((case, pct_videos, mean_change))
    return table


def evaluate_corpus(
    before: list[IntensitySeries],
    after: list[IntensitySeries],
    noise_floor: float = NOISE_FLOOR_DEFAULT,
) -> EvaluationReport:
    """Pair the two corpora by video_id and build the full report."""
    after_by_id = {s.video_id: s for s in after}
    missing = [s.video_id for s in before if s.video_id not in after_by_id]
    if missing:
        raise InputError(f"videos missing from the after corpus: {', '.join(missing)}")
    extra = set(after_by_id) - {s.video_id for s in before}
    if extra:
        raise InputError(f"videos missing from the before corpus: {', '.join(sorted(extra))}")
    per_video = []
    for b in sorted(before, key=lambda s: s.video_id):
        try:
            per_video.append((b.video_id, classify_outcome(b, after_by_id[b.video_id], noise_floor)))
        except ValueError as e:
            raise InputError(str(e)) from e
    report = EvaluationReport(per_video=per_video)
    report.rows = aggregate([oc for _, oc in per_video])
    return report


def roc_curve(samples: list[tuple[float, bool]]) -> tuple[list[tuple[float, float]], float]:
    """Threshold sweep over distinct scores, descending, ties grouped.

    Returns the (fpr, tpr) polyline starting at (0, 0) and the trapezoidal
    area under it. Needs at least one sample of each class.
    """
    if not samples:
        raise ValueError("no samples")
    scores = np.array([s for s, _ in samples], dtype=np.float64)
    labels = np.array([bool(l) for _, l in samples])
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("need samples of both classes")
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    points = [(0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < scores.size:
        j = i
        while j < scores.size and scores[j] == scores[i]:
            j += 1
        tp += int(labels[i:j].sum())
        fp += (j - i) - int(labels[i:j].sum())
        points.append((fp / neg, tp / pos))
        i = j
    auc = 0.0
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return points, auc


def roc_samples(series_list: list[IntensitySeries]) -> list[tuple[float, bool]]:
    """Per-frame (score, inside-event-window) samples across all videos
    that carry a window annotation."""
    samples = []
    for s in series_list:
        if s.event_start is None:
            continue
        inside = (s.frames >= s.event_start) & (s.frames <= s.event_end)
        samples.extend(zip(s.scores.tolist(), inside.tolist()))
    return samples
