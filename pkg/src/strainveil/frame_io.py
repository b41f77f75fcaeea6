"""Frame sequence I/O: PGM/PPM/PNG frame directories and Y4M containers.

Frames are numpy uint8 arrays, (h, w) for grayscale or (h, w, 3) for RGB.
A FrameSequence stacks uniform frames into one (n, h, w[, 3]) array. Only
8-bit samples are supported anywhere in the pipeline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from strainveil.errors import FormatError, InputError

MIN_DIM = 16

# BT.601 luma weights for RGB -> gray.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def validate_frame(frame: np.ndarray) -> np.ndarray:
    """Check the pipeline frame contract: uint8, (h,w) or (h,w,3), >= 16x16."""
    frame = np.asarray(frame)
    if frame.dtype != np.uint8:
        raise FormatError(f"frames must be 8-bit, got dtype {frame.dtype}")
    if frame.ndim == 3 and frame.shape[2] != 3:
        raise FormatError(f"color frames must have 3 channels, got {frame.shape[2]}")
    if frame.ndim not in (2, 3):
        raise FormatError(f"frame must be 2D or 3D, got shape {frame.shape}")
    h, w = frame.shape[:2]
    if h < MIN_DIM or w < MIN_DIM:
        raise FormatError(f"frame too small: {w}x{h}, minimum {MIN_DIM}x{MIN_DIM}")
    return frame


@dataclass(eq=False)
class FrameSequence:
    """Ordered uniform frames plus playback rate metadata.

    frames: (n, h, w) or (n, h, w, 3) uint8 array, n >= 2.
    """

    frames: np.ndarray
    fps: float = 30.0

    def __post_init__(self):
        self.frames = np.asarray(self.frames)
        if self.frames.ndim not in (3, 4):
            raise FormatError(f"frame stack must be 3D or 4D, got shape {self.frames.shape}")
        if len(self.frames) < 2:
            raise FormatError("sequence too short: need at least 2 frames")
        validate_frame(self.frames[0])
        if self.fps <= 0:
            raise FormatError(f"fps must be positive, got {self.fps}")

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.frames[i]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.frames.ndim == 3 else self.frames.shape[3]


def to_luma(frame: np.ndarray) -> np.ndarray:
    """BT.601 luma Y = round(0.299R + 0.587G + 0.114B); gray passes through."""
    if frame.ndim == 2:
        return frame
    y = np.rint(frame.astype(np.float64) @ _LUMA_WEIGHTS)
    return y.astype(np.uint8)


# ---------------------------------------------------------------------------
# Single-image formats
# ---------------------------------------------------------------------------


def _read_pnm_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    # Skip whitespace and '#' comments between header tokens.
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError("truncated PNM header")
    return buf[start:pos], pos


def read_pnm(path: str | Path) -> np.ndarray:
    """Read a binary PGM (P5) or PPM (P6), maxval <= 255."""
    buf = Path(path).read_bytes()
    magic, pos = _read_pnm_token(buf, 0)
    if magic not in (b"P5", b"P6"):
        raise FormatError(f"{path}: unsupported PNM magic {magic!r} (binary P5/P6 only)")
    fields = []
    for _ in range(3):
        tok, pos = _read_pnm_token(buf, pos)
        try:
            fields.append(int(tok))
        except ValueError:
            raise FormatError(f"{path}: non-numeric PNM header field {tok!r}") from None
    w, h, maxval = fields
    if maxval > 255:
        raise FormatError(f"{path}: unsupported bit depth (maxval {maxval}, only 8-bit accepted)")
    if maxval < 1:
        raise FormatError(f"{path}: invalid maxval {maxval}")
    pos += 1  # single whitespace after maxval
    channels = 1 if magic == b"P5" else 3
    count = w * h * channels
    data = np.frombuffer(buf, dtype=np.uint8, count=count, offset=pos) if len(buf) - pos >= count else None
    if data is None:
        raise FormatError(f"{path}: truncated pixel data")
    img = data.reshape((h, w) if channels == 1 else (h, w, 3)).copy()
    return validate_frame(img)


def write_pnm(frame: np.ndarray, path: str | Path) -> None:
    """Write a frame as binary PGM (gray) or PPM (RGB), maxval 255."""
    frame = validate_frame(frame)
    magic = b"P5" if frame.ndim == 2 else b"P6"
    h, w = frame.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (w, h))
        f.write(frame.tobytes())


def read_png(path: str | Path) -> np.ndarray:
    """Read an 8-bit grayscale or RGB PNG."""
    with Image.open(path) as im:
        if im.mode not in ("L", "RGB"):
            raise FormatError(
                f"{path}: unsupported PNG mode '{im.mode}' (8-bit gray/RGB only)"
            )
        return validate_frame(np.asarray(im, dtype=np.uint8))


def write_png(frame: np.ndarray, path: str | Path) -> None:
    frame = validate_frame(frame)
    Image.fromarray(frame, mode="L" if frame.ndim == 2 else "RGB").save(path, format="PNG")


_READERS = {"pgm": read_pnm, "ppm": read_pnm, "png": read_png}
_WRITERS = {"pgm": write_pnm, "ppm": write_pnm, "png": write_png}


def read_frame(path: str | Path) -> np.ndarray:
    """Read one frame, dispatching on file extension."""
    ext = Path(path).suffix.lstrip(".").lower()
    reader = _READERS.get(ext)
    if reader is None:
        raise InputError(f"unsupported frame format '.{ext}': {path}")
    return reader(path)


def write_frame(frame: np.ndarray, path: str | Path) -> None:
    ext = Path(path).suffix.lstrip(".").lower()
    writer = _WRITERS.get(ext)
    if writer is None:
        raise InputError(f"unsupported frame format '.{ext}': {path}")
    writer(frame, path)


# ---------------------------------------------------------------------------
# Frame directories
# ---------------------------------------------------------------------------


def _expand_pattern(path_pattern: str | Path, fmt: str) -> list[Path]:
    path_pattern = str(path_pattern)
    if re.search(r"%0?\d*d", path_pattern):
        # printf-style index expansion, contiguous from 0
        paths = []
        i = 0
        while True:
            p = Path(path_pattern % i)
            if not p.exists():
                break
            paths.append(p)
            i += 1
        if not paths:
            raise InputError(f"missing file: {path_pattern % 0}")
        return paths
    base = Path(path_pattern)
    if not base.is_dir():
        raise InputError(f"missing file or directory: {path_pattern}")
    return sorted(base.glob(f"*.{fmt}"))


def read_frame_dir(path_pattern: str | Path, fmt: str = "pgm", fps: float = 30.0) -> FrameSequence:
    """Load a frame sequence from a directory or printf-style path pattern.

    `path_pattern` is either a directory (all *.fmt files, lexicographic
    order) or a pattern like 'frames/f%03d.pgm' expanded from index 0.
    All frames must share dimensions and channel count.
    """
    if fmt not in _READERS:
        raise InputError(f"unsupported frame format '{fmt}'")
    paths = _expand_pattern(path_pattern, fmt)
    if len(paths) < 2:
        raise InputError(f"sequence too short: {len(paths)} frame(s) under '{path_pattern}'")
    frames = []
    shape = None
    for i, p in enumerate(paths):
        try:
            f = read_frame(p)
        except FormatError as e:
            raise FormatError(f"frame {i}: {e}") from e
        if shape is None:
            shape = f.shape
        elif f.shape != shape:
            raise FormatError(
                f"frame {i} ({p.name}): dimension mismatch, {f.shape} vs expected {shape}"
            )
        frames.append(f)
    return FrameSequence(np.stack(frames), fps=fps)


def write_frame_dir(
    seq: FrameSequence,
    out_dir: str | Path,
    fmt: str = "pgm",
    name_pattern: str = "frame_%04d",
) -> list[Path]:
    """Write every frame as out_dir/<name_pattern>.<fmt>; returns the paths."""
    if fmt not in _WRITERS:
        raise InputError(f"unsupported frame format '{fmt}'")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(len(seq)):
        p = out_dir / f"{name_pattern % i}.{fmt}"
        write_frame(seq[i], p)
        paths.append(p)
    return paths


# ---------------------------------------------------------------------------
# YUV4MPEG2 (Y4M)
# ---------------------------------------------------------------------------

_CHROMA_SUBSAMPLED = {"420", "420jpeg", "420mpeg2", "420paldv"}


def _rgb_to_ycbcr(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Full-range BT.601
    f = frame.astype(np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    y = np.rint(0.299 * r + 0.587 * g + 0.114 * b)
    cb = np.rint(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b)
    cr = np.rint(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b)
    clip = lambda a: np.clip(a, 0, 255).astype(np.uint8)
    return clip(y), clip(cb), clip(cr)


def write_y4m(seq: FrameSequence, path: str | Path) -> None:
    """Write a sequence as YUV4MPEG2 C444.

    Gray input stores the samples as the luma plane with neutral (128)
    chroma; RGB input is converted to full-range BT.601 YCbCr. The luma
    plane round-trips bit-exactly through read_y4m.
    """
    rate = Fraction(seq.fps).limit_denominator(1_000_000)
    header = f"YUV4MPEG2 W{seq.width} H{seq.height} F{rate.numerator}:{rate.denominator} Ip A1:1 C444\n"
    neutral = np.full((seq.height, seq.width), 128, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for i in range(len(seq)):
            frame = seq[i]
            if frame.ndim == 2:
                y, cb, cr = frame, neutral, neutral
            else:
                y, cb, cr = _rgb_to_ycbcr(frame)
            f.write(b"FRAME\n")
            f.write(y.tobytes())
            f.write(cb.tobytes())
            f.write(cr.tobytes())


def read_y4m(path: str | Path) -> FrameSequence:
    """Read a YUV4MPEG2 file and return its luma plane as a gray sequence.

    Accepts 8-bit 4:4:4 and 4:2:0 variants; chroma planes are skipped since
    the pipeline computes flow on intensity only.
    """
    with open(path, "rb") as f:
        header = f.readline()
        if not header.startswith(b"YUV4MPEG2"):
            raise FormatError(f"{path}: missing YUV4MPEG2 magic")
        w = h = None
        fps = 30.0
        chroma = "420"
        for token in header.decode("ascii", "replace").split()[1:]:
            tag, val = token[0], token[1:]
            if tag == "W":
                w = int(val)
            elif tag == "H":
                h = int(val)
            elif tag == "F":
                num, den = val.split(":")
                fps = int(num) / int(den)
            elif tag == "C":
                chroma = val
        if w is None or h is None:
            raise FormatError(f"{path}: Y4M header lacks W/H")
        if chroma == "444":
            chroma_size = 2 * w * h
        elif chroma in _CHROMA_SUBSAMPLED:
            chroma_size = 2 * ((w + 1) // 2) * ((h + 1) // 2)
        else:
            raise FormatError(f"{path}: unsupported chroma tag 'C{chroma}' (8-bit 420/444 only)")
        frames = []
        while True:
            marker = f.readline()
            if not marker:
                break
            if not marker.startswith(b"FRAME"):
                raise FormatError(f"{path}: bad frame marker {marker[:16]!r}")
            y = f.read(w * h)
            if len(y) != w * h:
                raise FormatError(f"{path}: truncated frame {len(frames)}")
            if len(f.read(chroma_size)) != chroma_size:
                raise FormatError(f"{path}: truncated chroma in frame {len(frames)}")
            frames.append(np.frombuffer(y, dtype=np.uint8).reshape(h, w))
    if len(frames) < 2:
        raise FormatError(f"{path}: sequence too short ({len(frames)} frame(s))")
    return FrameSequence(np.stack(frames), fps=fps)
