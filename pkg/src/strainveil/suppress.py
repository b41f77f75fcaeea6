"""Expression suppression: strain thresholding, pixel replacement, smoothing.

Per frame the normalized strain map is thresholded at a configurable
percentile into a replace/keep mask, masked pixels are copied from a
neutral reference frame, mask seams get 2D median smoothing, and a mild
Gaussian blur runs over the whole face crop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from strainveil.errors import InputError, PipelineError
from strainveil.flow import FlowParams, compute_flow_sequence
from strainveil.frame_io import FrameSequence, to_luma
from strainveil.kernels import convolve_separable, gaussian_kernel1d
from strainveil.strain import StrainMap, strain_sequence

REFERENCE_POLICIES = ("first_frame", "min_mean_strain")
NORMALIZE_SCOPES = ("per_frame", "per_sequence")


@dataclass(frozen=True)
class SuppressionConfig:
    threshold_percentile: float = 10.0
    reference_policy: str = "first_frame"
    reference_window: int | None = None
    median_kernel: int = 5
    edge_band: int = 3
    face_blur_sigma: float = 1.0
    mask_min_blob: int = 9
    normalize_scope: str = "per_frame"

    def __post_init__(self):
        if not 0.0 <= self.threshold_percentile <= 100.0:
            raise ValueError("threshold_percentile must be in [0, 100]")
        if self.reference_policy not in REFERENCE_POLICIES:
            raise ValueError(f"reference_policy must be one of {REFERENCE_POLICIES}")
        if self.median_kernel < 3 or self.median_kernel % 2 == 0:
            raise ValueError("median_kernel must be odd and >= 3")
        if self.edge_band < 1:
            raise ValueError("edge_band must be >= 1")
        if self.face_blur_sigma < 0:
            raise ValueError("face_blur_sigma must be >= 0")
        if self.mask_min_blob < 0:
            raise ValueError("mask_min_blob must be >= 0")
        if self.normalize_scope not in NORMALIZE_SCOPES:
            raise ValueError(f"normalize_scope must be one of {NORMALIZE_SCOPES}")


def parse_config(path: str | Path) -> tuple[SuppressionConfig, FlowParams]:
    """Read a `key = value` text config covering suppression and flow knobs."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"missing config file: {path}")
    values: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return build_configs(values, source=str(path))


def build_configs(
    values: dict[str, str], source: str = "config"
) -> tuple[SuppressionConfig, FlowParams]:
    sup_fields = {f.name: f for f in fields(SuppressionConfig)}
    flow_fields = {f.name: f for f in fields(FlowParams)}
    sup_kwargs: dict = {}
    flow_kwargs: dict = {}
    for key, raw in values.items():
        if key in sup_fields:
            target, fld = sup_kwargs, sup_fields[key]
        elif key in flow_fields:
            target, fld = flow_kwargs, flow_fields[key]
        else:
            raise InputError(f"{source}: unknown config key '{key}'")
        try:
            if key == "reference_window":
                target[key] = None if raw.lower() in ("none", "") else int(raw)
            elif fld.type in ("int", int):
                target[key] = int(raw)
            elif fld.type in ("float", float):
                target[key] = float(raw)
            else:
                target[key] = raw
        except ValueError:
            raise InputError(f"{source}: bad value for '{key}': {raw!r}") from None
    try:
        return SuppressionConfig(**sup_kwargs), FlowParams(**flow_kwargs)
    except ValueError as e:
        raise InputError(f"{source}: {e}") from e


def select_reference(
    strains: list[StrainMap], policy: str = "first_frame", window: int | None = None
) -> int:
    """Pick the reference position: 0 for first_frame, else the index of the
    lowest mean raw strain within the leading window (ties -> lowest index).

    Indices are positions in `strains`; suppress_sequence maps them onto
    frame numbers (strain k belongs to frame k+1).
    """
    if not strains:
        raise ValueError("need at least 1 strain map")
    if policy == "first_frame":
        return 0
    if policy != "min_mean_strain":
        raise ValueError(f"unknown reference policy '{policy}'")
    candidates = strains if window is None else strains[: max(1, window)]
    means = np.array([float(s.magnitude.mean()) for s in candidates])
    return int(means.argmin())


def nearest_rank_percentile(values: np.ndarray, percentile: float) -> float:
    """Smallest value with at least `percentile`% of samples <= it."""
    flat = np.asarray(values).ravel()
    rank = max(1, math.ceil(percentile / 100.0 * flat.size))
    k = rank - 1
    return float(np.partition(flat, k)[k])


_CROSS = [[0, 1, 0], [1, 1, 1], [0, 1, 0]]


def threshold_mask(smap: StrainMap, percentile: float, min_blob: int = 9) -> np.ndarray:
    """Replace/keep mask: normalized strain strictly above the nearest-rank
    percentile, despeckled in both polarities: 4-connected true blobs under
    min_blob px are cleared, then holes under min_blob px are filled. Both
    steps keep the mask monotone in the percentile and leave an all-false
    mask untouched."""
    if smap.normalized is None:
        raise ValueError("strain map has no normalized plane; run normalize_strain first")
    t = nearest_rank_percentile(smap.normalized, percentile)
    mask = smap.normalized > t
    if min_blob > 1 and mask.any():
        labels, _ = ndimage.label(mask, structure=_CROSS)
        sizes = np.bincount(labels.ravel())
        keep = sizes >= min_blob
        keep[0] = False
        mask = keep[labels]
    if min_blob > 1 and mask.any():
        holes, _ = ndimage.label(~mask, structure=_CROSS)
        sizes = np.bincount(holes.ravel())
        small = sizes < min_blob
        small[0] = False
        mask = mask | small[holes]
    return mask


def replace_pixels(current: np.ndarray, reference: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Copy masked pixels from the reference frame; all channels together."""
    if current.shape != reference.shape:
        raise ValueError(f"frame dimension mismatch: {current.shape} vs {reference.shape}")
    if mask.shape != current.shape[:2]:
        raise ValueError(f"mask dimension mismatch: {mask.shape} vs {current.shape[:2]}")
    m = mask if current.ndim == 2 else mask[..., None]
    return np.where(m, reference, current)


def _dilate(mask: np.ndarray, radius: int) -> np.ndarray:
    # Square structuring element, separable; outside the image counts False.
    out = mask
    for axis in (0, 1):
        p = np.pad(out, [(radius, radius) if a == axis else (0, 0) for a in (0, 1)])
        windows = np.lib.stride_tricks.sliding_window_view(p, 2 * radius + 1, axis=axis)
        out = windows.any(axis=-1)
    return out


def _erode(mask: np.ndarray, radius: int) -> np.ndarray:
    # Outside the image counts False here too, so border pixels erode away.
    out = mask
    for axis in (0, 1):
        p = np.pad(out, [(radius, radius) if a == axis else (0, 0) for a in (0, 1)])
        windows = np.lib.stride_tricks.sliding_window_view(p, 2 * radius + 1, axis=axis)
        out = windows.all(axis=-1)
    return out


def mask_edge_band(mask: np.ndarray, band: int) -> np.ndarray:
    """Boundary ribbon of a mask: dilate(m, band) AND NOT erode(m, band)."""
    if band < 1:
        raise ValueError("band must be >= 1")
    return _dilate(mask, band) & ~_erode(mask, band)


def median_smooth_edges(frame: np.ndarray, band: np.ndarray, kernel: int = 5) -> np.ndarray:
    """Median-filter only the pixels inside the band.

    Windows are edge-clamped and read the pre-smoothing frame, so results
    do not cascade; pixels outside the band are untouched.
    """
    if kernel < 3 or kernel % 2 == 0:
        raise ValueError("kernel must be odd and >= 3")
    if band.shape != frame.shape[:2]:
        raise ValueError(f"band dimension mismatch: {band.shape} vs {frame.shape[:2]}")
    if not band.any():
        return frame.copy()
    r = kernel // 2
    out = frame.copy()
    ys, xs = np.nonzero(band)
    planes = [frame] if frame.ndim == 2 else [frame[..., c] for c in range(frame.shape[2])]
    for c, plane in enumerate(planes):
        p = np.pad(plane, r, mode="edge")
        windows = np.lib.stride_tricks.sliding_window_view(p, (kernel, kernel))
        med = np.median(windows[ys, xs].reshape(len(ys), -1), axis=1)
        med = med.astype(frame.dtype) if frame.dtype != np.uint8 else np.rint(med).astype(np.uint8)
        if frame.ndim == 2:
            out[ys, xs] = med
        else:
            out[ys, xs, c] = med
    return out


def smooth_face(frame: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur over the whole crop; sigma 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return frame.copy()
    k = gaussian_kernel1d(sigma)
    planes = [frame] if frame.ndim == 2 else [frame[..., c] for c in range(frame.shape[2])]
    blurred = [convolve_separable(p, k) for p in planes]
    out = blurred[0] if frame.ndim == 2 else np.stack(blurred, axis=-1)
    if frame.dtype == np.uint8:
        return np.rint(out).astype(np.uint8)
    return out.astype(frame.dtype)


def suppress_sequence(
    aligned: FrameSequence,
    cfg: SuppressionConfig = SuppressionConfig(),
    flow_params: FlowParams = FlowParams(),
    threads: int = 1,
) -> tuple[FrameSequence, list[StrainMap], list[np.ndarray]]:
    """Run the full suppression chain over an aligned sequence.

    For each frame i >= 1: flow(i-1 -> i) on luma, strain map, percentile
    mask, pixel replacement from the reference frame, median smoothing of
    the mask boundary ribbon, then full-face Gaussian blur. Frame 0 and the
    reference frame pass through unmodified. Returns the suppressed
    sequence plus the per-pair strain maps and masks for inspection.
    """
    n = len(aligned)
    luma = np.stack([to_luma(aligned[i]) for i in range(n)])
    flows = compute_flow_sequence(luma, flow_params, threads=threads)
    strains = strain_sequence(flows, scope=cfg.normalize_scope)

    if cfg.reference_policy == "first_frame":
        ref_index = 0
    else:
        # strain k belongs to frame k+1
        ref_index = select_reference(strains, cfg.reference_policy, cfg.reference_window) + 1
    reference = aligned[ref_index]

    out = np.empty_like(aligned.frames)
    masks: list[np.ndarray] = []
    for i in range(n):
        if i >= 1:
            mask = threshold_mask(strains[i - 1], cfg.threshold_percentile, cfg.mask_min_blob)
            masks.append(mask)
        if i == 0 or i == ref_index:
            out[i] = aligned[i]
            continue
        try:
            replaced = replace_pixels(aligned[i], reference, mask)
            band = mask_edge_band(mask, cfg.edge_band)
            smoothed = median_smooth_edges(replaced, band, cfg.median_kernel)
            out[i] = smooth_face(smoothed, cfg.face_blur_sigma)
        except ValueError as e:
            raise PipelineError("suppress", i, str(e)) from e
    return FrameSequence(out, fps=aligned.fps), strains, masks
