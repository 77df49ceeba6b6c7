"""Dense-matrix interchange formats.

Binary: 16-byte header (magic ``MULB``, version u32, rows u32, cols u32,
little-endian) followed by column-major complex128 data.  JSON is provided
for small matrices only.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"MULB"
VERSION = 1
JSON_SIZE_LIMIT = 256


def dumps_matrix(m: np.ndarray) -> bytes:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    rows, cols = m.shape
    header = MAGIC + struct.pack("<III", VERSION, rows, cols)
    return header + np.asfortranarray(m).tobytes(order="F")


def loads_matrix(blob: bytes) -> np.ndarray:
    if len(blob) < 16 or blob[:4] != MAGIC:
        raise ValueError("bad magic; not a MULB blob")
    version, rows, cols = struct.unpack("<III", blob[4:16])
    if version != VERSION:
        raise ValueError(f"unsupported MULB version {version}")
    expected = 16 + rows * cols * 16
    if len(blob) != expected:
        raise ValueError(f"blob length {len(blob)} != expected {expected}")
    data = np.frombuffer(blob[16:], dtype=np.complex128)
    return data.reshape((rows, cols), order="F").copy()


def save_matrix(path, m: np.ndarray) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_matrix(m))


def load_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return loads_matrix(fh.read())


def matrix_to_json(m: np.ndarray) -> str:
    m = np.asarray(m, dtype=np.complex128)
    if m.size > JSON_SIZE_LIMIT * JSON_SIZE_LIMIT:
        raise ValueError("matrix too large for the JSON format; use the binary blob")
    payload = {
        "rows": m.shape[0],
        "cols": m.shape[1],
        "re": m.real.tolist(),
        "im": m.imag.tolist(),
    }
    return json.dumps(payload)


def matrix_from_json(s: str) -> np.ndarray:
    payload = json.loads(s)
    re = np.array(payload["re"], dtype=float)
    im = np.array(payload["im"], dtype=float)
    m = re + 1j * im
    if m.shape != (payload["rows"], payload["cols"]):
        raise ValueError("JSON matrix shape mismatch")
    return m
