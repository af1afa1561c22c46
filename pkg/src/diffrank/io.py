"""File formats used by the command line: matrix CSV, 8-bit PGM, masks.

Matrix CSV is one row per line, comma separated, with an optional first
line ``# rows cols`` that is checked against the data. PGM images are
read as P2 or P5 with maxval 255 and mapped to floats in [0, 1]; they
are always written as P5 after clamping and rounding ``x * 255``.
"""

from __future__ import annotations

import math
import os
from pathlib import Path

import numpy as np

from .densemat import ShapeError


class FormatError(ValueError):
    """A file could not be parsed in the expected format."""


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    with open(path) as fh:
        lines = [ln.strip() for ln in fh]
    declared = None
    rows = []
    for lineno, ln in enumerate(lines, 1):
        if not ln:
            continue
        if ln.startswith("#"):
            if declared is None and not rows:
                parts = ln[1:].split()
                if len(parts) == 2 and all(p.isdigit() for p in parts):
                    declared = (int(parts[0]), int(parts[1]))
            continue
        try:
            rows.append([float(x) for x in ln.split(",")])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: not a comma-separated row of numbers") from None
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ShapeError(f"{path}: ragged rows (row {i + 1} has {len(r)} entries, expected {width})")
    out = np.array(rows, dtype=np.float64)
    if declared is not None and declared != out.shape:
        raise ShapeError(f"{path}: header says {declared[0]}x{declared[1]} but data is "
                         f"{out.shape[0]}x{out.shape[1]}")
    return out


def write_matrix_csv(path, a, header: bool = True) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    with open(path, "w") as fh:
        if header:
            fh.write(f"# {a.shape[0]} {a.shape[1]}\n")
        for row in a:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_mask_csv(path, shape=None) -> np.ndarray:
    m = read_matrix_csv(path)
    if not np.all((m == 0) | (m == 1)):
        raise FormatError(f"{path}: mask entries must be 0 or 1")
    if shape is not None and m.shape != tuple(shape):
        raise ShapeError(f"{path}: mask is {m.shape[0]}x{m.shape[1]}, image is {shape[0]}x{shape[1]}")
    return m


def _pgm_tokens(data: bytes, count: int, start: int) -> tuple[list[bytes], int]:
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    toks = []
    i = start
    n = len(data)
    while len(toks) < count:
        while i < n and data[i:i + 1].isspace():
            i += 1
        if i < n and data[i:i + 1] == b"#":
            while i < n and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < n and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise FormatError("truncated PGM header")
        toks.append(data[i:j])
        i = j
    return toks, i


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise FormatError(f"{path}: not a P2/P5 PGM file")
    try:
        toks, pos = _pgm_tokens(data, 3, 2)
        width, height, maxval = (int(t) for t in toks)
    except (FormatError, ValueError):
        raise FormatError(f"{path}: bad PGM header") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: dimensions must be positive")
    if maxval != 255:
        raise FormatError(f"{path}: maxval must be 255, got {maxval}")
    count = width * height
    if magic == b"P5":
        body = data[pos + 1:pos + 1 + count]
        if len(body) != count:
            raise FormatError(f"{path}: expected {count} pixels, found {len(body)}")
        pix = np.frombuffer(body, dtype=np.uint8).astype(np.float64)
    else:
        try:
            pix = np.array([int(t) for t in data[pos:].split()], dtype=np.float64)
        except ValueError:
            raise FormatError(f"{path}: non-integer pixel") from None
        if pix.size != count:
            raise FormatError(f"{path}: expected {count} pixels, found {pix.size}")
        if pix.size and (pix.min() < 0 or pix.max() > 255):
            raise FormatError(f"{path}: pixel outside [0, 255]")
    return pix.reshape(height, width) / 255.0


def quantize(img) -> np.ndarray:
    """8-bit levels of ``img`` after clamping to [0, 1]."""
    x = np.clip(np.nan_to_num(np.asarray(img, dtype=np.float64), nan=0.0), 0.0, 1.0)
    return np.rint(x * 255.0).astype(np.uint8)


def write_pgm(path, img) -> None:
    q = np.atleast_2d(quantize(img))
    h, w = q.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(q.tobytes())


def read_pgm_dir(path) -> tuple[list[str], np.ndarray]:
    """All ``*.pgm`` files of a directory in lexicographic order, stacked as ``T x h x w``."""
    path = Path(path)
    if not path.is_dir():
        raise FileNotFoundError(f"{path}: not a directory")
    names = sorted(n for n in os.listdir(path) if n.lower().endswith(".pgm"))
    frames = [read_pgm(path / n) for n in names]
    shapes = {f.shape for f in frames}
    if len(shapes) > 1:
        raise ShapeError(f"{path}: frames have different sizes {sorted(shapes)}")
    if not frames:
        return names, np.zeros((0, 0, 0))
    return names, np.stack(frames)


def psnr(estimate, truth) -> float:
    """``10 log10(1 / MSE)`` on the [0, 1] scale; infinite for an exact match."""
    estimate = np.asarray(estimate, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise ShapeError(f"psnr shapes differ: {estimate.shape} vs {truth.shape}")
    mse = float(np.mean((estimate - truth) ** 2))
    return math.inf if mse == 0 else 10.0 * math.log10(1.0 / mse)
