"""Realization file formats: raw binary, CSV and 16-bit PGM, written atomically."""
from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

MAGIC = b"OSGF"
VERSION = 1
HEADER_SIZE = 32
_HEADER = struct.Struct("<4sII3I")


class FormatError(ValueError):
    pass


def atomic_write(path, data: bytes | str) -> None:
    """Write via a temporary file in the target directory and ``os.replace``."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def encode_bin(values: np.ndarray) -> bytes:
    d = values.ndim
    n = values.shape[0]
    if d < 1 or d > 3 or any(s != n for s in values.shape):
        raise FormatError("binary format stores square grids of 1 to 3 dimensions")
    dims = list(values.shape) + [0] * (3 - d)
    header = _HEADER.pack(MAGIC, VERSION, d, *dims).ljust(HEADER_SIZE, b"\0")
    return header + np.ascontiguousarray(values, dtype="<f8").tobytes()


def decode_bin(raw: bytes) -> np.ndarray:
    if len(raw) < HEADER_SIZE:
        raise FormatError("file shorter than the 32-byte header")
    magic, version, d, *dims = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError("bad magic; not an OSGF realization file")
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    if not 1 <= d <= 3:
        raise FormatError(f"bad dimension {d}")
    shape = tuple(dims[:d])
    count = int(np.prod(shape))
    if len(raw) != HEADER_SIZE + 8 * count:
        raise FormatError(f"payload size {len(raw) - HEADER_SIZE} does not match shape {shape}")
    return np.frombuffer(raw, dtype="<f8", offset=HEADER_SIZE).reshape(shape).astype(float)


def read_bin(path) -> np.ndarray:
    return decode_bin(Path(path).read_bytes())


def encode_csv(values: np.ndarray, step: float) -> str:
    """One row per grid point: coordinates then value, ``repr`` precision."""
    if values.ndim > 2:
        raise FormatError("CSV export supports 1- and 2-dimensional grids")
    buf = io.StringIO()
    if values.ndim == 1:
        buf.write("x,value\n")
        for i, v in enumerate(values):
            buf.write(f"{i * step!r},{float(v)!r}\n")
    else:
        buf.write("x,y,value\n")
        for i in range(values.shape[0]):
            for j in range(values.shape[1]):
                buf.write(f"{i * step!r},{j * step!r},{float(values[i, j])!r}\n")
    return buf.getvalue()


def encode_pgm(values: np.ndarray) -> tuple[bytes, dict]:
    """Binary PGM with 16-bit big-endian samples after affine rescaling.

    Returns the bytes and the rescale bounds; a constant field maps to 0.
    Rows of the image follow the first array axis.
    """
    if values.ndim != 2:
        raise FormatError("PGM export needs a 2-dimensional grid")
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        scaled = np.rint((values - lo) / (hi - lo) * 65535.0)
    else:
        scaled = np.zeros_like(values)
    pix = np.clip(scaled, 0, 65535).astype(">u2")
    rows, cols = values.shape
    header = f"P5\n{cols} {rows}\n65535\n".encode("ascii")
    return header + pix.tobytes(), {"min": lo, "max": hi, "maxval": 65535}


def decode_pgm(raw: bytes) -> np.ndarray:
    tokens, pos = [], 0
    while len(tokens) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    if tokens[0] != b"P5":
        raise FormatError("not a binary PGM")
    cols, rows, maxval = (int(t) for t in tokens[1:])
    dtype = ">u2" if maxval > 255 else "u1"
    return np.frombuffer(raw, dtype=dtype, offset=pos + 1, count=rows * cols).reshape(rows, cols)


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def csv_table(rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(_fmt(r[c]) for c in columns) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
