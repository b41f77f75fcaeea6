"""Optical flow tests: solver accuracy on known motions, I/O, determinism."""

import numpy as np
import pytest

from strainveil.errors import FormatError, PipelineError
from strainveil.flow import (
    FlowField,
    FlowParams,
    build_pyramid,
    compute_flow,
    compute_flow_sequence,
    max_levels_for,
    read_flow,
    warp_by_flow,
    write_flow,
)
from strainveil.synth import make_texture


def _interior(a, margin=10):
    return a[margin:-margin, margin:-margin]


# ---------------------------------------------------------------------------
# Parameters and pyramid
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [
        {"pyramid_levels": 0},
        {"window_radius": 0},
        {"iterations_per_level": 0},
        {"regularization_eps": 0.0},
        {"max_displacement": -1.0},
    ],
)
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        FlowParams(**kwargs)


def test_build_pyramid_shapes():
    pyr = build_pyramid(np.zeros((64, 96)), 3)
    assert [p.shape for p in pyr] == [(64, 96), (32, 48), (16, 24)]


def test_build_pyramid_rejects_too_deep():
    with pytest.raises(ValueError, match="too many pyramid levels"):
        build_pyramid(np.zeros((32, 32)), 4)


def test_max_levels_clamps():
    assert max_levels_for((256, 256), 3) == 3
    assert max_levels_for((32, 32), 3) == 2
    assert max_levels_for((16, 16), 5) == 1


def test_flow_field_validation():
    with pytest.raises(ValueError, match="matching 2D"):
        FlowField(np.zeros((4, 4)), np.zeros((5, 4)))
    with pytest.raises(ValueError, match="non-finite"):
        FlowField(np.full((4, 4), np.nan), np.zeros((4, 4)))


# ---------------------------------------------------------------------------
# Solver on known motion
# ---------------------------------------------------------------------------


def test_identical_frames_give_zero_flow():
    tex = make_texture(64, 64, seed=1)
    field = compute_flow(tex, tex)
    assert np.all(field.u == 0.0)
    assert np.all(field.v == 0.0)


def test_recovers_integer_shift():
    # nxt is prev shifted right by 2: content at (x, y) moved from (x-2, y),
    # so nxt(x + u) = prev(x) holds with u = +2 under the solver's convention.
    tex = make_texture(96, 96, seed=2)
    shifted = np.roll(tex, 2, axis=1)
    field = compute_flow(tex, shifted)
    err_u = np.abs(_interior(field.u) - 2.0)
    err_v = np.abs(_interior(field.v))
    assert np.median(err_u) < 0.25
    assert np.median(err_v) < 0.25


def test_recovers_diagonal_shift():
    tex = make_texture(96, 96, seed=3)
    shifted = np.roll(np.roll(tex, -3, axis=0), 1, axis=1)
    field = compute_flow(tex, shifted)
    assert np.median(np.abs(_interior(field.u) - 1.0)) < 0.25
    assert np.median(np.abs(_interior(field.v) + 3.0)) < 0.25


def test_flow_respects_max_displacement():
    tex = make_texture(64, 64, seed=4)
    shifted = np.roll(tex, 10, axis=1)
    field = compute_flow(tex, shifted, FlowParams(max_displacement=2.0))
    assert np.max(np.abs(field.u)) <= 2.0
    assert np.max(np.abs(field.v)) <= 2.0


def test_flow_rejects_mismatched_frames():
    with pytest.raises(ValueError, match="mismatch"):
        compute_flow(np.zeros((32, 32)), np.zeros((32, 48)))
    with pytest.raises(ValueError, match="single-channel"):
        compute_flow(np.zeros((32, 32, 3)), np.zeros((32, 32, 3)))


def test_warp_by_flow_undoes_shift():
    tex = make_texture(64, 64, seed=5)
    shifted = np.roll(tex, 2, axis=1)
    field = compute_flow(tex, shifted)
    back = warp_by_flow(shifted, field)
    diff = np.abs(_interior(back).astype(float) - _interior(tex).astype(float))
    assert np.median(diff) <= 1.0


def test_warp_by_flow_zero_is_identity():
    tex = make_texture(32, 32, seed=6)
    zero = FlowField(np.zeros((32, 32)), np.zeros((32, 32)))
    assert np.array_equal(warp_by_flow(tex, zero), tex)


# ---------------------------------------------------------------------------
# Sequences and threading
# ---------------------------------------------------------------------------


def test_sequence_thread_invariance():
    rng = np.random.default_rng(7)
    base = make_texture(48, 48, seed=7)
    frames = np.stack([np.roll(base, k, axis=1) for k in range(5)])
    single = compute_flow_sequence(frames, threads=1)
    pooled = compute_flow_sequence(frames, threads=4)
    assert len(single) == len(pooled) == 4
    for a, b in zip(single, pooled):
        assert np.array_equal(a.u, b.u)
        assert np.array_equal(a.v, b.v)


def test_sequence_names_failing_pair():
    frames = [make_texture(48, 48, seed=8), np.zeros((48, 48, 3), dtype=np.uint8)]
    with pytest.raises(PipelineError, match="stage 'flow', frame 1"):
        compute_flow_sequence(frames)


# ---------------------------------------------------------------------------
# SVFL dumps
# ---------------------------------------------------------------------------


def test_flow_file_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    u = rng.normal(size=(20, 30)).astype(np.float32).astype(np.float64)
    v = rng.normal(size=(20, 30)).astype(np.float32).astype(np.float64)
    p = tmp_path / "f.svfl"
    write_flow(FlowField(u, v), p)
    back = read_flow(p)
    assert np.array_equal(back.u, u)
    assert np.array_equal(back.v, v)


def test_flow_file_bad_magic(tmp_path):
    p = tmp_path / "f.svfl"
    p.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(FormatError, match="magic"):
        read_flow(p)


def test_flow_file_truncated(tmp_path):
    p = tmp_path / "f.svfl"
    write_flow(FlowField(np.zeros((8, 8)), np.zeros((8, 8))), p)
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(FormatError, match="truncated"):
        read_flow(p)
