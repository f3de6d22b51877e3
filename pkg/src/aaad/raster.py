"""Minimal PGM graymap I/O for surface and clutter-map export.

Output is always binary P5 with maxval 65535 (big-endian rows, the PGM
wire order), values taken from a float array in [0, 1].  Input accepts
binary P5 at maxval 255 or 65535 and normalizes back to [0, 1].
"""

from __future__ import annotations

import numpy as np

PGM_MAXVAL = 65535


class RasterError(ValueError):
    pass


def write_pgm(values: np.ndarray) -> bytes:
    """Encode a float array in [0, 1] as a 16-bit binary PGM."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 2:
        raise RasterError("graymap must be 2-D")
    if not np.isfinite(arr).all():
        raise RasterError("graymap values must be finite")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise RasterError("graymap values must lie in [0, 1]")
    h, w = arr.shape
    header = f"P5 {w} {h} {PGM_MAXVAL}\n".encode("ascii")
    data = np.round(arr * PGM_MAXVAL).astype(">u2")
    return header + data.tobytes()


def read_pgm(blob: bytes) -> np.ndarray:
    """Decode a binary P5 graymap into floats in [0, 1]."""
    if not blob.startswith(b"P5"):
        raise RasterError("not a binary PGM (P5) file")
    # header: magic, width, height, maxval as whitespace-separated tokens,
    # comments (#...) allowed between them
    tokens = []
    i = 2
    while len(tokens) < 3 and i < len(blob):
        c = blob[i:i + 1]
        if c == b"#":
            while i < len(blob) and blob[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(blob) and not blob[j:j + 1].isspace():
                j += 1
            tokens.append(blob[i:j])
            i = j
    if len(tokens) < 3 or i >= len(blob):
        raise RasterError("truncated PGM header")
    i += 1  # single whitespace byte after maxval
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise RasterError("malformed PGM header") from None
    if w < 1 or h < 1:
        raise RasterError("malformed PGM header")
    if maxval not in (255, PGM_MAXVAL):
        raise RasterError(f"unsupported PGM maxval {maxval}")
    dtype = np.dtype(np.uint8) if maxval == 255 else np.dtype(">u2")
    expected = w * h * dtype.itemsize
    raw = blob[i:]
    if len(raw) < expected:
        raise RasterError("truncated PGM pixel data")
    arr = np.frombuffer(raw[:expected], dtype=dtype).reshape(h, w)
    return arr.astype(float) / maxval
