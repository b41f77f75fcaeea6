"""Frame I/O tests: PNM/PNG/Y4M round-trips, directory readers, luma."""

import numpy as np
import pytest

from strainveil.errors import FormatError, InputError
from strainveil.frame_io import (
    FrameSequence,
    read_frame,
    read_frame_dir,
    read_pnm,
    read_y4m,
    to_luma,
    validate_frame,
    write_frame,
    write_frame_dir,
    write_pnm,
    write_y4m,
)


def _gray(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(h, w), dtype=np.uint8)


def _rgb(h, w, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


# ---------------------------------------------------------------------------
# validate_frame / FrameSequence
# ---------------------------------------------------------------------------


def test_validate_frame_accepts_gray_and_rgb():
    validate_frame(_gray(16, 16))
    validate_frame(_rgb(16, 16))


def test_validate_frame_rejects_bad_dtype():
    with pytest.raises(FormatError, match="8-bit"):
        validate_frame(np.zeros((32, 32), dtype=np.float32))


def test_validate_frame_rejects_bad_channels():
    with pytest.raises(FormatError, match="3 channels"):
        validate_frame(np.zeros((32, 32, 4), dtype=np.uint8))


def test_validate_frame_rejects_small():
    with pytest.raises(FormatError, match="too small"):
        validate_frame(np.zeros((8, 32), dtype=np.uint8))


def test_sequence_needs_two_frames():
    with pytest.raises(FormatError, match="too short"):
        FrameSequence(np.zeros((1, 32, 32), dtype=np.uint8))


def test_sequence_rejects_bad_fps():
    with pytest.raises(FormatError, match="fps"):
        FrameSequence(np.zeros((2, 32, 32), dtype=np.uint8), fps=0.0)


def test_sequence_properties():
    seq = FrameSequence(np.zeros((3, 20, 40), dtype=np.uint8), fps=25.0)
    assert (len(seq), seq.height, seq.width, seq.channels) == (3, 20, 40, 1)
    rgb = FrameSequence(np.zeros((2, 16, 16, 3), dtype=np.uint8))
    assert rgb.channels == 3


# ---------------------------------------------------------------------------
# Luma conversion
# ---------------------------------------------------------------------------


def test_to_luma_gray_passthrough():
    g = _gray(16, 16)
    assert to_luma(g) is g


def test_to_luma_bt601_spot_values():
    # Y = round(0.299 R + 0.587 G + 0.114 B), full range.
    frame = np.array(
        [[[255, 0, 0], [0, 255, 0], [0, 0, 255], [255, 255, 255]]],
        dtype=np.uint8,
    )
    assert to_luma(frame).tolist() == [[76, 150, 29, 255]]


# ---------------------------------------------------------------------------
# PNM
# ---------------------------------------------------------------------------


def test_pgm_roundtrip(tmp_path):
    img = _gray(24, 31)
    p = tmp_path / "a.pgm"
    write_pnm(img, p)
    assert np.array_equal(read_pnm(p), img)


def test_ppm_roundtrip(tmp_path):
    img = _rgb(17, 23)
    p = tmp_path / "a.ppm"
    write_pnm(img, p)
    assert np.array_equal(read_pnm(p), img)


def test_pnm_header_comments(tmp_path):
    p = tmp_path / "c.pgm"
    body = bytes(range(16)) * 16
    p.write_bytes(b"P5\n# a comment\n16 # inline\n16\n255\n" + body)
    img = read_pnm(p)
    assert img.shape == (16, 16)
    assert img[0, 5] == 5


def test_pnm_rejects_bad_magic(tmp_path):
    p = tmp_path / "bad.pgm"
    p.write_bytes(b"P7\n2 2\n255\n" + bytes(4))
    with pytest.raises(FormatError, match="magic"):
        read_pnm(p)


def test_pnm_rejects_deep_samples(tmp_path):
    p = tmp_path / "deep.pgm"
    p.write_bytes(b"P5\n2 2\n65535\n" + bytes(8))
    with pytest.raises(FormatError, match="only 8-bit"):
        read_pnm(p)


def test_pnm_rejects_truncated(tmp_path):
    p = tmp_path / "short.pgm"
    p.write_bytes(b"P5\n16 16\n255\n" + bytes(100))
    with pytest.raises(FormatError, match="truncated"):
        read_pnm(p)


def test_pnm_rejects_junk_header(tmp_path):
    p = tmp_path / "junk.pgm"
    p.write_bytes(b"P5\nxx 16\n255\n" + bytes(256))
    with pytest.raises(FormatError, match="non-numeric"):
        read_pnm(p)


# ---------------------------------------------------------------------------
# PNG and extension dispatch
# ---------------------------------------------------------------------------


def test_png_roundtrip_gray_and_rgb(tmp_path):
    g = _gray(20, 20, seed=1)
    c = _rgb(20, 20, seed=2)
    write_frame(g, tmp_path / "g.png")
    write_frame(c, tmp_path / "c.png")
    assert np.array_equal(read_frame(tmp_path / "g.png"), g)
    assert np.array_equal(read_frame(tmp_path / "c.png"), c)


def test_read_frame_unknown_extension(tmp_path):
    p = tmp_path / "x.tiff"
    p.write_bytes(b"")
    with pytest.raises(InputError, match="unsupported frame format"):
        read_frame(p)


# ---------------------------------------------------------------------------
# Frame directories
# ---------------------------------------------------------------------------


def test_frame_dir_roundtrip(tmp_path):
    seq = FrameSequence(np.stack([_gray(16, 16, s) for s in range(4)]), fps=24.0)
    paths = write_frame_dir(seq, tmp_path / "out")
    assert len(paths) == 4
    assert paths[0].name == "frame_0000.pgm"
    back = read_frame_dir(tmp_path / "out", fps=24.0)
    assert np.array_equal(back.frames, seq.frames)
    assert back.fps == 24.0


def test_frame_dir_pattern(tmp_path):
    seq = FrameSequence(np.stack([_gray(16, 16, s) for s in range(3)]))
    write_frame_dir(seq, tmp_path)
    back = read_frame_dir(tmp_path / "frame_%04d.pgm")
    assert np.array_equal(back.frames, seq.frames)


def test_frame_dir_missing(tmp_path):
    with pytest.raises(InputError, match="missing file or directory"):
        read_frame_dir(tmp_path / "nope")


def test_frame_dir_too_short(tmp_path):
    write_frame(_gray(16, 16), tmp_path / "frame_0000.pgm")
    with pytest.raises(InputError, match="sequence too short: 1 frame"):
        read_frame_dir(tmp_path)


def test_frame_dir_names_bad_frame(tmp_path):
    seq = FrameSequence(np.stack([_gray(16, 16, s) for s in range(3)]))
    write_frame_dir(seq, tmp_path)
    write_frame(_gray(24, 24), tmp_path / "frame_0001.pgm")
    with pytest.raises(FormatError, match="frame 1"):
        read_frame_dir(tmp_path)


# ---------------------------------------------------------------------------
# Y4M
# ---------------------------------------------------------------------------


def test_y4m_gray_roundtrip(tmp_path):
    seq = FrameSequence(np.stack([_gray(18, 32, s) for s in range(5)]), fps=30.0)
    p = tmp_path / "v.y4m"
    write_y4m(seq, p)
    back = read_y4m(p)
    assert np.array_equal(back.frames, seq.frames)
    assert back.fps == 30.0


def test_y4m_rgb_luma_matches_to_luma(tmp_path):
    seq = FrameSequence(np.stack([_rgb(16, 16, s) for s in range(3)]))
    p = tmp_path / "v.y4m"
    write_y4m(seq, p)
    back = read_y4m(p)
    # Writer stores BT.601 luma; reader returns it untouched.
    want = np.stack([to_luma(seq[i]) for i in range(3)])
    assert np.array_equal(back.frames, want)


def test_y4m_accepts_420(tmp_path):
    w, h = 16, 16
    y0 = _gray(h, w, 7)
    y1 = _gray(h, w, 8)
    chroma = bytes((w // 2) * (h // 2) * 2)
    p = tmp_path / "v.y4m"
    p.write_bytes(
        b"YUV4MPEG2 W16 H16 F25:1 C420jpeg\n"
        + b"FRAME\n" + y0.tobytes() + chroma
        + b"FRAME\n" + y1.tobytes() + chroma
    )
    back = read_y4m(p)
    assert back.fps == 25.0
    assert np.array_equal(back[0], y0)
    assert np.array_equal(back[1], y1)


def test_y4m_rejects_bad_magic(tmp_path):
    p = tmp_path / "v.y4m"
    p.write_bytes(b"JUNK W16 H16\n")
    with pytest.raises(FormatError, match="YUV4MPEG2"):
        read_y4m(p)


def test_y4m_rejects_unknown_chroma(tmp_path):
    p = tmp_path / "v.y4m"
    p.write_bytes(b"YUV4MPEG2 W16 H16 F30:1 C410\nFRAME\n" + bytes(16 * 16 * 3))
    with pytest.raises(FormatError, match="chroma"):
        read_y4m(p)


def test_y4m_rejects_truncated_frame(tmp_path):
    seq = FrameSequence(np.stack([_gray(16, 16, s) for s in range(2)]))
    p = tmp_path / "v.y4m"
    write_y4m(seq, p)
    data = p.read_bytes()
    p.write_bytes(data[:-10])
    with pytest.raises(FormatError, match="truncated"):
        read_y4m(p)
