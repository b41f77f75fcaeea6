"""Optical strain: deformation magnitude of a flow field.

The infinitesimal strain tensor of the displacement field w = (u, v) is
e = 0.5 * (grad w + grad w^T); its Frobenius norm

    e_m = sqrt(exx^2 + eyy^2 + 2 * exy^2)

measures local non-rigid deformation and is invariant to rigid translation.
Magnitudes are min-max normalized to a [0, 255] byte map per frame (or per
sequence) for thresholding and display.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from strainveil.errors import FormatError
from strainveil.flow import FlowField

_STRAIN_MAGIC = b"SVSM"


@dataclass(eq=False)
class StrainMap:
    """Raw per-pixel strain magnitudes plus an optional normalized byte plane."""

    magnitude: np.ndarray
    normalized: np.ndarray | None = None

    def __post_init__(self):
        self.magnitude = np.asarray(self.magnitude, dtype=np.float64)
        if self.magnitude.ndim != 2:
            raise ValueError(f"magnitude must be 2D, got {self.magnitude.shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitude.shape


def flow_gradients(field: FlowField) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Partials (du/dx, du/dy, dv/dx, dv/dy): unit-step central differences
    in the interior, one-sided at the borders."""
    du_dy, du_dx = np.gradient(field.u)
    dv_dy, dv_dx = np.gradient(field.v)
    return du_dx, du_dy, dv_dx, dv_dy


def strain_magnitude(field: FlowField) -> StrainMap:
    """Strain magnitude map (raw values only) from a flow field."""
    du_dx, du_dy, dv_dx, dv_dy = flow_gradients(field)
    exx = du_dx
    eyy = dv_dy
    exy = 0.5 * (du_dy + dv_dx)
    return StrainMap(np.sqrt(exx * exx + eyy * eyy + 2.0 * exy * exy))


def normalize_strain(
    smap: StrainMap, lo: float | None = None, hi: float | None = None
) -> StrainMap:
    """Fill the normalized byte plane by min-max scaling.

    Defaults to the map's own extrema; callers may pass shared (lo, hi)
    for sequence-global scaling. A degenerate range maps to all zeros.
    """
    m = smap.magnitude
    lo = float(m.min()) if lo is None else lo
    hi = float(m.max()) if hi is None else hi
    if hi <= lo:
        norm = np.zeros(m.shape, dtype=np.uint8)
    else:
        scaled = np.rint(255.0 * (np.clip(m, lo, hi) - lo) / (hi - lo))
        norm = scaled.astype(np.uint8)
    return StrainMap(m, norm)


def strain_sequence(flows: list[FlowField], scope: str = "per_frame") -> list[StrainMap]:
    """Normalized strain map per flow field, order preserved.

    scope 'per_frame' rescales each map independently; 'per_sequence' uses
    the global extrema so maps stay temporally comparable.
    """
    if not flows:
        raise ValueError("need at least 1 flow field")
    raw = [strain_magnitude(f) for f in flows]
    if scope == "per_frame":
        return [normalize_strain(s) for s in raw]
    if scope == "per_sequence":
        lo = min(float(s.magnitude.min()) for s in raw)
        hi = max(float(s.magnitude.max()) for s in raw)
        return [normalize_strain(s, lo, hi) for s in raw]
    raise ValueError(f"unknown normalization scope '{scope}'")


def write_strain(smap: StrainMap, path: str | Path) -> None:
    """Dump raw magnitudes as SVSM: magic, u32 w/h, f32 plane, little-endian."""
    h, w = smap.shape
    with open(path, "wb") as f:
        f.write(_STRAIN_MAGIC)
        f.write(struct.pack("<II", w, h))
        f.write(smap.magnitude.astype("<f4").tobytes())


def read_strain(path: str | Path) -> StrainMap:
    buf = Path(path).read_bytes()
    if buf[:4] != _STRAIN_MAGIC:
        raise FormatError(f"{path}: bad strain magic {buf[:4]!r}")
    w, h = struct.unpack_from("<II", buf, 4)
    if len(buf) != 12 + w * h * 4:
        raise FormatError(f"{path}: truncated strain dump")
    return StrainMap(np.frombuffer(buf, dtype="<f4", count=w * h, offset=12).reshape(h, w))
