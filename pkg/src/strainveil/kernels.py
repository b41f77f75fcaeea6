"""Shared per-pixel numerical kernels: sampling, windowed sums, separable blurs.

All kernels use edge-clamped (replicate) boundary handling and are plain
vectorized numpy, so results are bit-deterministic regardless of the thread
count of the surrounding pipeline.
"""

from __future__ import annotations

import math

import numpy as np


def bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Sample a 2D array at fractional coordinates with bilinear interpolation.

    Coordinates are clamped to the image rectangle, so out-of-bounds queries
    return the nearest edge value. Returns float64 with the shape of `x`.
    """
    h, w = img.shape[:2]
    img = np.asarray(img, dtype=np.float64)
    x = np.clip(x, 0.0, w - 1.0)
    y = np.clip(y, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.floor(y).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def box_sum(a: np.ndarray, radius: int) -> np.ndarray:
    """Sum of a over a (2*radius+1)^2 window per pixel, edge-replicated.

    Uses an integral image over the padded array; output matches a brute
    force windowed sum with clamped sampling.
    """
    if radius < 1:
        raise ValueError("radius must be >= 1")
    k = 2 * radius + 1
    p = np.pad(np.asarray(a, dtype=np.float64), radius, mode="edge")
    ii = np.zeros((p.shape[0] + 1, p.shape[1] + 1), dtype=np.float64)
    ii[1:, 1:] = p.cumsum(axis=0).cumsum(axis=1)
    return ii[k:, k:] - ii[:-k, k:] - ii[k:, :-k] + ii[:-k, :-k]


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalized 1D Gaussian with kernel radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    r = math.ceil(3.0 * sigma)
    t = np.arange(-r, r + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def convolve_separable(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Apply a 1D kernel along rows then columns with edge-clamped borders."""
    r = (kernel.size - 1) // 2
    out = np.asarray(a, dtype=np.float64)
    for axis in (1, 0):
        p = np.pad(out, [(0, 0), (r, r)] if axis == 1 else [(r, r), (0, 0)], mode="edge")
        acc = np.zeros_like(out)
        for i, kv in enumerate(kernel):
            if axis == 1:
                acc += kv * p[:, i : i + out.shape[1]]
            else:
                acc += kv * p[i : i + out.shape[0], :]
        out = acc
    return out


def downsample_half(a: np.ndarray) -> np.ndarray:
    """Halve resolution: 5-tap [1,4,6,4,1]/16 smoothing, then every 2nd sample."""
    k5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    smoothed = convolve_separable(a, k5)
    return smoothed[::2, ::2]
