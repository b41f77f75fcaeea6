"""Face alignment from externally tracked landmarks.

Landmarks come from files (66 points per frame, the common tracker layout);
each frame is registered to a canonical template with a least-squares 2D
similarity transform and cropped by inverse-mapped bilinear warping.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from strainveil.errors import FormatError, InputError, PipelineError
from strainveil.frame_io import FrameSequence
from strainveil.kernels import bilinear_sample

NUM_LANDMARKS = 66

# Eye point ranges in the 66-point layout, used for inter-ocular distance.
RIGHT_EYE = slice(36, 42)
LEFT_EYE = slice(42, 48)


@dataclass(frozen=True)
class SimilarityTransform:
    """2D similarity p' = scale * R(rotation) @ p + (tx, ty)."""

    scale: float
    rotation: float
    tx: float
    ty: float

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite([self.scale, self.rotation, self.tx, self.ty]).all()):
            raise ValueError(f"invalid similarity parameters: {self}")

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, 0.0, 0.0, 0.0)

    @property
    def matrix(self) -> np.ndarray:
        """2x3 affine matrix [sR | t]."""
        c = self.scale * math.cos(self.rotation)
        s = self.scale * math.sin(self.rotation)
        return np.array([[c, -s, self.tx], [s, c, self.ty]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.matrix[:, :2].T + self.matrix[:, 2]

    def inverse(self) -> "SimilarityTransform":
        inv_scale = 1.0 / self.scale
        c = inv_scale * math.cos(-self.rotation)
        s = inv_scale * math.sin(-self.rotation)
        return SimilarityTransform(
            inv_scale, -self.rotation, -(c * self.tx - s * self.ty), -(s * self.tx + c * self.ty)
        )

    def compose(self, other: "SimilarityTransform") -> "SimilarityTransform":
        """Transform equal to applying `other` first, then self."""
        t = self.apply(np.array([[other.tx, other.ty]]))[0]
        return SimilarityTransform(
            self.scale * other.scale, self.rotation + other.rotation, t[0], t[1]
        )


def parse_landmarks(path: str | Path) -> list[np.ndarray]:
    """Read per-frame landmark sets from a `frame,idx,x,y` CSV.

    Requires exactly 66 points per frame with idx 0..65 and frame indices
    contiguous from 0. Returns one (66, 2) float array per frame.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing landmark file: {path}")
    per_frame: dict[int, np.ndarray] = {}
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:4]] != ["frame", "idx", "x", "y"]:
            raise FormatError(f"{path}: expected header 'frame,idx,x,y', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                frame, idx = int(row[0]), int(row[1])
                x, y = float(row[2]), float(row[3])
            except (ValueError, IndexError):
                raise FormatError(f"{path}:{lineno}: non-numeric landmark row {row}") from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise FormatError(f"{path}:{lineno}: non-finite coordinate")
            if not 0 <= idx < NUM_LANDMARKS:
                raise FormatError(f"{path}:{lineno}: landmark idx {idx} out of range 0..65")
            pts = per_frame.setdefault(frame, np.full((NUM_LANDMARKS, 2), np.nan))
            if not np.isnan(pts[idx]).all():
                raise FormatError(f"{path}:{lineno}: duplicate landmark {idx} for frame {frame}")
            pts[idx] = (x, y)
    if not per_frame:
        raise FormatError(f"{path}: no landmark rows")
    indices = sorted(per_frame)
    if indices != list(range(len(indices))):
        raise FormatError(f"{path}: non-contiguous frame indices {indices[:8]}...")
    out = []
    for frame in indices:
        pts = per_frame[frame]
        missing = int(np.isnan(pts[:, 0]).sum())
        if missing:
            raise FormatError(
                f"{path}: frame {frame}: expected {NUM_LANDMARKS} points, "
                f"{NUM_LANDMARKS - missing} found"
            )
        out.append(pts)
    return out


def write_landmarks(sets: list[np.ndarray], path: str | Path) -> None:
    """Write landmark sets in the `frame,idx,x,y` CSV layout."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "idx", "x", "y"])
        for frame, pts in enumerate(sets):
            for idx, (x, y) in enumerate(pts):
                writer.writerow([frame, idx, f"{x:.6f}", f"{y:.6f}"])


def parse_template(path: str | Path) -> np.ndarray:
    """Read a single-frame landmark CSV as the canonical template."""
    sets = parse_landmarks(path)
    if len(sets) != 1:
        raise FormatError(f"{path}: template must contain exactly 1 frame, got {len(sets)}")
    return sets[0]


def default_template(
    landmarks: np.ndarray, out_w: int, out_h: int, interocular: float | None = None
) -> np.ndarray:
    """Canonical template from one landmark set: centered in the crop with a
    fixed inter-ocular distance (96 px at a 256x256 crop, scaled with size)."""
    pts = np.asarray(landmarks, dtype=np.float64)
    target_iod = interocular if interocular is not None else 96.0 * min(out_w, out_h) / 256.0
    eye_r = pts[RIGHT_EYE].mean(axis=0)
    eye_l = pts[LEFT_EYE].mean(axis=0)
    iod = float(np.hypot(*(eye_l - eye_r)))
    if iod < 1e-9:
        raise InputError("degenerate landmarks: zero inter-ocular distance")
    centered = pts - pts.mean(axis=0)
    return centered * (target_iod / iod) + np.array([out_w / 2.0, out_h / 2.0])


def estimate_similarity(src: np.ndarray, template: np.ndarray) -> SimilarityTransform:
    """Least-squares similarity (Procrustes) mapping src points onto template.

    Closed form via the complex formulation: minimizes sum |a*z + b - w|^2
    over a, b with z=src, w=template viewed as complex numbers.
    """
    src = np.asarray(src, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    if src.shape != template.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError(f"point sets must both be (n, 2), got {src.shape} vs {template.shape}")
    if not (np.isfinite(src).all() and np.isfinite(template).all()):
        raise ValueError("landmark coordinates must be finite")
    z = src[:, 0] + 1j * src[:, 1]
    w = template[:, 0] + 1j * template[:, 1]
    zc = z - z.mean()
    denom = float(np.vdot(zc, zc).real)
    if denom < 1e-12:
        raise InputError("singular landmark configuration: source points have zero spread")
    a = np.vdot(zc, w - w.mean()) / denom  # vdot conjugates the first argument
    b = w.mean() - a * z.mean()
    scale = float(abs(a))
    if scale <= 0:
        raise InputError("singular landmark configuration: degenerate scale")
    return SimilarityTransform(scale, float(np.angle(a)), float(b.real), float(b.imag))


def warp_crop(frame: np.ndarray, t: SimilarityTransform, out_w: int, out_h: int) -> np.ndarray:
    """Warp a frame into the canonical crop by inverse-mapped bilinear sampling."""
    inv = t.inverse()
    xs, ys = np.meshgrid(np.arange(out_w, dtype=np.float64), np.arange(out_h, dtype=np.float64))
    m = inv.matrix
    src_x = m[0, 0] * xs + m[0, 1] * ys + m[0, 2]
    src_y = m[1, 0] * xs + m[1, 1] * ys + m[1, 2]
    if frame.ndim == 2:
        out = bilinear_sample(frame, src_x, src_y)
    else:
        out = np.stack(
            [bilinear_sample(frame[..., c], src_x, src_y) for c in range(frame.shape[2])], axis=-1
        )
    return np.rint(out).astype(np.uint8)


def align_sequence(
    seq: FrameSequence,
    landmark_sets: list[np.ndarray],
    template: np.ndarray,
    out_w: int = 256,
    out_h: int = 256,
) -> FrameSequence:
    """Align every frame to the template independently; output is uniform out_w x out_h."""
    if len(landmark_sets) != len(seq):
        raise InputError(
            f"landmark count ({len(landmark_sets)}) does not match frame count ({len(seq)})"
        )
    aligned = []
    for i in range(len(seq)):
        try:
            t = estimate_similarity(landmark_sets[i], template)
            aligned.append(warp_crop(seq[i], t, out_w, out_h))
        except (InputError, ValueError) as e:
            raise PipelineError("align", i, str(e)) from e
    return FrameSequence(np.stack(aligned), fps=seq.fps)
