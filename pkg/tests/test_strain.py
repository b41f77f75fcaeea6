"""Strain magnitude tests against closed-form deformation fields."""

import math

import numpy as np
import pytest

from strainveil.errors import FormatError
from strainveil.flow import FlowField
from strainveil.strain import (
    StrainMap,
    normalize_strain,
    read_strain,
    strain_magnitude,
    strain_sequence,
    write_strain,
)


def _coords(h=32, w=32):
    xs, ys = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    return xs, ys


# ---------------------------------------------------------------------------
# Magnitude oracles
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("a", [0.1, 0.5, 1.0])
def test_pure_shear_magnitude(a):
    # u = a*y, v = 0: exx = eyy = 0, exy = a/2, so e_m = a/sqrt(2) everywhere.
    # np.gradient is exact on linear fields, borders included.
    xs, ys = _coords()
    smap = strain_magnitude(FlowField(a * ys, np.zeros_like(ys)))
    assert np.allclose(smap.magnitude, a / math.sqrt(2.0), atol=1e-12)


def test_translation_has_zero_strain():
    xs, ys = _coords()
    smap = strain_magnitude(FlowField(np.full_like(xs, 3.7), np.full_like(ys, -1.2)))
    assert np.all(smap.magnitude == 0.0)


def test_uniform_dilation_magnitude():
    # u = a*x, v = a*y: exx = eyy = a, exy = 0, so e_m = a*sqrt(2).
    a = 0.25
    xs, ys = _coords()
    smap = strain_magnitude(FlowField(a * xs, a * ys))
    assert np.allclose(smap.magnitude, a * math.sqrt(2.0), atol=1e-12)


def test_magnitude_linear_in_field_scale():
    rng = np.random.default_rng(0)
    u = rng.normal(size=(24, 24))
    v = rng.normal(size=(24, 24))
    m1 = strain_magnitude(FlowField(u, v)).magnitude
    m3 = strain_magnitude(FlowField(3.0 * u, 3.0 * v)).magnitude
    assert np.allclose(m3, 3.0 * m1, atol=1e-12)


def test_quadratic_field_interior_values():
    # u = x^2 has du/dx = 2x; central differences are exact on quadratics in
    # the interior, so e_m = 2x there.
    xs, ys = _coords()
    smap = strain_magnitude(FlowField(xs * xs, np.zeros_like(xs)))
    interior = smap.magnitude[1:-1, 1:-1]
    assert np.allclose(interior, 2.0 * xs[1:-1, 1:-1], atol=1e-9)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


def test_normalize_spans_full_byte_range():
    smap = StrainMap(np.linspace(0.2, 0.7, 256).reshape(16, 16))
    norm = normalize_strain(smap).normalized
    assert norm.dtype == np.uint8
    assert norm.min() == 0 and norm.max() == 255


def test_normalize_constant_map_is_zero():
    norm = normalize_strain(StrainMap(np.full((16, 16), 0.4))).normalized
    assert np.all(norm == 0)


def test_normalize_with_shared_range_clips():
    smap = StrainMap(np.array([[0.0, 1.0], [2.0, 4.0]]))
    norm = normalize_strain(smap, lo=1.0, hi=3.0).normalized
    assert norm.tolist() == [[0, 0], [128, 255]]


def test_sequence_scopes_differ():
    # Power-of-two shear slopes keep the magnitude exactly constant, so the
    # per-frame min-max range is genuinely degenerate.
    xs, ys = _coords()
    weak = FlowField(0.25 * ys, np.zeros_like(ys))
    strong = FlowField(1.0 * ys, np.zeros_like(ys))
    per_frame = strain_sequence([weak, strong], scope="per_frame")
    per_seq = strain_sequence([weak, strong], scope="per_sequence")
    # Constant maps: per-frame normalization degenerates to zero for both,
    # per-sequence scaling keeps the weak/strong ordering.
    assert np.all(per_frame[0].normalized == 0)
    assert per_seq[1].normalized.max() == 255
    assert per_seq[0].normalized.max() < per_seq[1].normalized.max()


def test_sequence_rejects_unknown_scope():
    xs, ys = _coords()
    with pytest.raises(ValueError, match="scope"):
        strain_sequence([FlowField(xs, ys)], scope="per_pixel")
    with pytest.raises(ValueError, match="at least 1"):
        strain_sequence([])


# ---------------------------------------------------------------------------
# SVSM dumps
# ---------------------------------------------------------------------------


def test_strain_file_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    mag = rng.uniform(0.0, 2.0, size=(12, 18)).astype(np.float32).astype(np.float64)
    p = tmp_path / "s.svsm"
    write_strain(StrainMap(mag), p)
    assert np.array_equal(read_strain(p).magnitude, mag)


def test_strain_file_bad_magic(tmp_path):
    p = tmp_path / "s.svsm"
    p.write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(FormatError, match="magic"):
        read_strain(p)


def test_strain_file_truncated(tmp_path):
    p = tmp_path / "s.svsm"
    write_strain(StrainMap(np.zeros((8, 8))), p)
    p.write_bytes(p.read_bytes()[:-2])
    with pytest.raises(FormatError, match="truncated"):
        read_strain(p)
