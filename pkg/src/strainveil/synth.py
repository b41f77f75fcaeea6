"""Synthetic test sequences with exact ground-truth flow.

A textured base frame is warped by a parametric deformation field scaled
by a raised-cosine temporal envelope (onset, apex, offset). Because the
frames are generated by backward warping, the flow an estimator should
report between the base and frame t is the inverse of the generator
field, which is computed here to machine precision by fixed-point
iteration. That gives desk-scale ground truth standing in for real
expression footage.
"""

from __future__ import annotations

import numpy as np

from strainveil.align import NUM_LANDMARKS
from strainveil.flow import FlowField
from strainveil.frame_io import MIN_DIM, FrameSequence, validate_frame
from strainveil.kernels import bilinear_sample, convolve_separable, gaussian_kernel1d

DEFORM_KINDS = ("bulge", "shear", "none")
MAX_AMPLITUDE = 8.0

# Bulge support radius as a fraction of the short side. Keeps the
# deformed area under ~10% of the frame so percentile masks can cover it,
# while the slope amplitude*pi/R stays < 1 (invertible warp) up to
# amplitude 8 via the stability floor below.
BULGE_RADIUS_FRAC = 0.16


def make_texture(height: int, width: int, seed: int = 42, smooth_sigma: float = 3.0) -> np.ndarray:
    """Seeded band-limited texture: smoothed uniform noise stretched to
    the full [0, 255] range. Smoothness keeps gradients informative for
    flow estimation at every pyramid level."""
    if height < MIN_DIM or width < MIN_DIM:
        raise ValueError(f"texture must be at least {MIN_DIM}x{MIN_DIM}")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(0.0, 255.0, size=(height, width))
    if smooth_sigma > 0:
        noise = convolve_separable(noise, gaussian_kernel1d(smooth_sigma))
    lo, hi = noise.min(), noise.max()
    stretched = (noise - lo) * (255.0 / (hi - lo))
    return np.rint(stretched).astype(np.uint8)


def grid_landmarks(width: int, height: int) -> np.ndarray:
    """Static 11x6 grid of marker points, row-major, one per landmark
    slot. Synthetic sequences have no face, so a rigid grid stands in;
    aligning against it is the identity."""
    margin_x = 0.15 * (width - 1)
    margin_y = 0.15 * (height - 1)
    xs = np.linspace(margin_x, width - 1 - margin_x, 11)
    ys = np.linspace(margin_y, height - 1 - margin_y, 6)
    gx, gy = np.meshgrid(xs, ys)
    points = np.stack([gx.ravel(), gy.ravel()], axis=1)
    assert points.shape[0] == NUM_LANDMARKS
    return points


def raised_cosine_envelope(n_frames: int) -> np.ndarray:
    """e(t) = (1 - cos(2 pi t / n)) / 2: zero at t = 0, apex at n // 2,
    symmetric about the apex."""
    if n_frames < 2:
        raise ValueError("need at least 2 frames")
    t = np.arange(n_frames)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * t / n_frames))


def deformation_field(
    shape: tuple[int, int], deform: str, amplitude: float
) -> tuple[np.ndarray, np.ndarray]:
    """Unit-envelope displacement field (wu, wv) in pixels.

    bulge: radial push m(r) = A sin(pi r / R) inside a compact disk;
    shear: horizontal displacement proportional to the signed distance
    from the mid-row; none: zero.
    """
    if deform not in DEFORM_KINDS:
        raise ValueError(f"deform must be one of {DEFORM_KINDS}")
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if amplitude > MAX_AMPLITUDE:
        raise ValueError(
            f"amplitude {amplitude:g} too large for stable warping (max {MAX_AMPLITUDE:g})"
        )
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    if deform == "none" or amplitude == 0:
        return np.zeros(shape), np.zeros(shape)
    if deform == "bulge":
        # Radius floor keeps the radial slope A*pi/R below ~0.9 so the
        # warp stays invertible and the ground-truth iteration converges.
        radius = max(BULGE_RADIUS_FRAC * min(h, w), 3.5 * amplitude)
        dx, dy = xs - cx, ys - cy
        r = np.hypot(dx, dy)
        m = np.where(r < radius, amplitude * np.sin(np.pi * np.minimum(r, radius) / radius), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            ux = np.where(r > 0, m * dx / r, 0.0)
            uy = np.where(r > 0, m * dy / r, 0.0)
        return ux, uy
    # shear
    return amplitude * (ys - cy) / cy, np.zeros(shape)


def invert_field(
    wu: np.ndarray, wv: np.ndarray, tol: float = 1e-12, max_iter: int = 300
) -> tuple[np.ndarray, np.ndarray]:
    """Solve f = -W(x + f) by fixed-point iteration.

    Frames are built as frame(x) = base(x + W(x)), so the flow field an
    estimator should produce for (base, frame) satisfies exactly this
    equation. Converges because the fields here keep |grad W| < 1.
    """
    h, w = wu.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    fu = np.zeros_like(wu)
    fv = np.zeros_like(wv)
    for _ in range(max_iter):
        nu = -bilinear_sample(wu, xs + fu, ys + fv)
        nv = -bilinear_sample(wv, xs + fu, ys + fv)
        delta = max(np.abs(nu - fu).max(), np.abs(nv - fv).max())
        fu, fv = nu, nv
        if delta < tol:
            break
    return fu, fv


def synth_sequence(
    base: np.ndarray,
    deform: str = "bulge",
    amplitude: float = 4.0,
    n_frames: int = 20,
    fps: float = 30.0,
) -> tuple[FrameSequence, list[FlowField]]:
    """Generate n_frames by warping base with the envelope-scaled field.

    Returns the sequence plus n_frames - 1 ground-truth flow fields;
    ground_truth[k] is the displacement field a flow estimator should
    report for the pair (frames[0], frames[k + 1]).
    """
    validate_frame(base)
    if base.ndim != 2:
        raise ValueError("synthetic base frame must be grayscale")
    envelope = raised_cosine_envelope(n_frames)
    wu, wv = deformation_field(base.shape, deform, amplitude)
    base_f = base.astype(np.float64)
    h, w = base.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)

    frames = np.empty((n_frames, h, w), dtype=np.uint8)
    ground_truth: list[FlowField] = []
    for t in range(n_frames):
        e = envelope[t]
        if e == 0.0:
            frames[t] = base
        else:
            warped = bilinear_sample(base_f, xs + e * wu, ys + e * wv)
            frames[t] = np.rint(warped).astype(np.uint8)
        if t >= 1:
            if e == 0.0:
                ground_truth.append(FlowField(np.zeros((h, w)), np.zeros((h, w))))
            else:
                fu, fv = invert_field(e * wu, e * wv)
                ground_truth.append(FlowField(fu, fv))
    return FrameSequence(frames, fps=fps), ground_truth
