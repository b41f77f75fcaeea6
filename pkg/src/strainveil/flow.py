"""Dense optical flow between consecutive gray frames.

Coarse-to-fine iterative Lucas-Kanade: per pixel, the regularized 2x2
structure-tensor system over a square window is solved in closed form;
the field is upscaled x2 between pyramid levels and refined by warping
the second frame toward the first. Pure vectorized numpy, so identical
inputs produce bit-identical fields regardless of caller threading.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from strainveil.errors import FormatError, PipelineError
from strainveil.frame_io import MIN_DIM
from strainveil.kernels import bilinear_sample, box_sum, downsample_half

_FLOW_MAGIC = b"SVFL"


@dataclass(frozen=True)
class FlowParams:
    """Tuning knobs for the pyramidal Lucas-Kanade solver."""

    pyramid_levels: int = 3
    window_radius: int = 7
    iterations_per_level: int = 3
    regularization_eps: float = 1e-4
    max_displacement: float = 16.0

    def __post_init__(self):
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if self.window_radius < 1:
            raise ValueError("window_radius must be >= 1")
        if self.iterations_per_level < 1:
            raise ValueError("iterations_per_level must be >= 1")
        if self.regularization_eps <= 0:
            raise ValueError("regularization_eps must be positive")
        if self.max_displacement <= 0:
            raise ValueError("max_displacement must be positive")


@dataclass(eq=False)
class FlowField:
    """Per-pixel displacement (u right, v down) in pixels/frame."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.u.shape != self.v.shape or self.u.ndim != 2:
            raise ValueError(f"u/v must be matching 2D arrays, got {self.u.shape} vs {self.v.shape}")
        if not (np.isfinite(self.u).all() and np.isfinite(self.v).all()):
            raise ValueError("flow field contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.shape


def build_pyramid(frame: np.ndarray, levels: int) -> list[np.ndarray]:
    """Gaussian pyramid: level 0 is the input, each level halves resolution.

    Frames are promoted to float64; downsampling applies a 5-tap binomial
    smoother before decimation.
    """
    if levels < 1:
        raise ValueError("levels must be >= 1")
    h, w = frame.shape[:2]
    if min(h, w) < MIN_DIM * 2 ** (levels - 1):
        raise ValueError(
            f"too many pyramid levels: {levels} levels need >= "
            f"{MIN_DIM * 2 ** (levels - 1)} px, frame is {w}x{h}"
        )
    pyr = [np.asarray(frame, dtype=np.float64)]
    for _ in range(levels - 1):
        pyr.append(downsample_half(pyr[-1]))
    return pyr


def max_levels_for(shape: tuple[int, int], requested: int) -> int:
    """Largest usable pyramid depth (coarsest level stays >= 16 px)."""
    allowed = 1 + int(math.floor(math.log2(min(shape) / MIN_DIM))) if min(shape) >= MIN_DIM else 1
    return max(1, min(requested, allowed))


def _gradients(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Central differences inside, one-sided at borders (edge-clamped stencil).
    gy, gx = np.gradient(img)
    return gx, gy


def _resize_double(a: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    h, w = out_shape
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64) * 0.5, np.arange(h, dtype=np.float64) * 0.5)
    return bilinear_sample(a, xs, ys)


def compute_flow(prev: np.ndarray, nxt: np.ndarray, params: FlowParams = FlowParams()) -> FlowField:
    """Dense flow from `prev` to `nxt` (gray frames of equal size).

    Returns (u, v) such that nxt(x + u, y + v) ~ prev(x, y). Pyramid depth
    is reduced automatically when frames are too small for the requested
    number of levels.
    """
    prev = np.asarray(prev)
    nxt = np.asarray(nxt)
    if prev.shape != nxt.shape:
        raise ValueError(f"frame dimension mismatch: {prev.shape} vs {nxt.shape}")
    if prev.ndim != 2:
        raise ValueError("flow operates on single-channel frames")
    levels = max_levels_for(prev.shape, params.pyramid_levels)
    # Work in [0, 1] so regularization_eps is scale-meaningful.
    pyr_prev = build_pyramid(prev.astype(np.float64) / 255.0, levels)
    pyr_next = build_pyramid(nxt.astype(np.float64) / 255.0, levels)

    r = params.window_radius
    eps = params.regularization_eps
    u = np.zeros_like(pyr_prev[-1])
    v = np.zeros_like(pyr_prev[-1])
    for level in range(levels - 1, -1, -1):
        p_img = pyr_prev[level]
        n_img = pyr_next[level]
        if u.shape != p_img.shape:
            u = _resize_double(u, p_img.shape) * 2.0
            v = _resize_double(v, p_img.shape) * 2.0
        h, w = p_img.shape
        xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
        clamp = params.max_displacement
        for _ in range(params.iterations_per_level):
            warped = bilinear_sample(n_img, xs + u, ys + v)
            gx, gy = _gradients(warped)
            it = warped - p_img
            sxx = box_sum(gx * gx, r) + eps
            syy = box_sum(gy * gy, r) + eps
            sxy = box_sum(gx * gy, r)
            bx = box_sum(gx * it, r)
            by = box_sum(gy * it, r)
            det = sxx * syy - sxy * sxy
            u -= (syy * bx - sxy * by) / det
            v -= (sxx * by - sxy * bx) / det
            np.clip(u, -clamp, clamp, out=u)
            np.clip(v, -clamp, clamp, out=v)
    return FlowField(u, v)


def compute_flow_sequence(
    luma_frames: np.ndarray, params: FlowParams = FlowParams(), threads: int = 1
) -> list[FlowField]:
    """Flow for every consecutive pair; entry k maps frame k to frame k+1.

    Pairs are independent, so they may run on a thread pool; results are
    assembled in frame order and are identical for any thread count.
    """
    n = len(luma_frames)
    if n < 2:
        raise ValueError("need at least 2 frames")

    def pair(k: int) -> FlowField:
        try:
            return compute_flow(luma_frames[k], luma_frames[k + 1], params)
        except ValueError as e:
            raise PipelineError("flow", k + 1, str(e)) from e

    if threads <= 1:
        return [pair(k) for k in range(n - 1)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(pair, range(n - 1)))


def warp_by_flow(frame: np.ndarray, field: FlowField) -> np.ndarray:
    """Backward-warp: out(x, y) = frame(x + u, y + v), bilinear, edge-clamped.

    uint8 input yields a rounded uint8 result; float input stays float64.
    """
    frame = np.asarray(frame)
    if frame.shape[:2] != field.shape:
        raise ValueError(f"frame/flow dimension mismatch: {frame.shape[:2]} vs {field.shape}")
    h, w = field.shape
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    xq, yq = xs + field.u, ys + field.v
    if frame.ndim == 2:
        out = bilinear_sample(frame, xq, yq)
    else:
        out = np.stack(
            [bilinear_sample(frame[..., c], xq, yq) for c in range(frame.shape[2])], axis=-1
        )
    if frame.dtype == np.uint8:
        return np.rint(out).astype(np.uint8)
    return out


def write_flow(field: FlowField, path: str | Path) -> None:
    """Dump a field as SVFL: magic, u32 w/h, f32 u then v planes, little-endian."""
    h, w = field.shape
    with open(path, "wb") as f:
        f.write(_FLOW_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(field.u.astype("<f4").tobytes())
        f.write(field.v.astype("<f4").tobytes())


def read_flow(path: str | Path) -> FlowField:
    buf = Path(path).read_bytes()
    if buf[:4] != _FLOW_MAGIC:
        raise FormatError(f"{path}: bad flow magic {buf[:4]!r}")
    w, h = struct.unpack_from("<II", buf, 4)
    plane = w * h * 4
    if len(buf) != 12 + 2 * plane:
        raise FormatError(f"{path}: truncated flow dump")
    u = np.frombuffer(buf, dtype="<f4", count=w * h, offset=12).reshape(h, w)
    v = np.frombuffer(buf, dtype="<f4", count=w * h, offset=12 + plane).reshape(h, w)
    return FlowField(u, v)
