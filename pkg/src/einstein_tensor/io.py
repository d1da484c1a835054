"""Tensor files: ``TNS-JSON`` text and the ``.tns`` binary container.

TNS-JSON is ``{"dims": [...], "data": [...]}`` with ``data`` in column-major
order.  The binary layout is the magic ``b"TNS1"``, a little-endian u32 order
``N``, ``N`` little-endian u64 extents and then the column-major float64
values, little-endian.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import DenseTensor, as_tensor
from .errors import ShapeMismatch

MAGIC = b"TNS1"


def to_tns_json(t) -> str:
    t = as_tensor(t)
    payload = {"dims": list(t.shape), "data": [float(v) for v in t.vec]}
    return json.dumps(payload)


def from_tns_json(text: str) -> DenseTensor:
    payload = json.loads(text)
    try:
        dims, data = payload["dims"], payload["data"]
    except (KeyError, TypeError) as exc:
        raise ShapeMismatch("TNS-JSON needs 'dims' and 'data' fields") from exc
    return DenseTensor(np.asarray(data, dtype=np.float64), shape=dims)


def to_tns_bytes(t) -> bytes:
    t = as_tensor(t)
    head = MAGIC + struct.pack("<I", t.order) + struct.pack(f"<{t.order}Q", *t.shape)
    return head + t.vec.astype("<f8").tobytes()


def from_tns_bytes(buf: bytes) -> DenseTensor:
    if buf[:4] != MAGIC:
        raise ShapeMismatch("not a TNS1 file (bad magic)")
    (order,) = struct.unpack_from("<I", buf, 4)
    dims = struct.unpack_from(f"<{order}Q", buf, 8)
    start = 8 + 8 * order
    data = np.frombuffer(buf, dtype="<f8", offset=start)
    return DenseTensor(data, shape=dims)


def save(t, path) -> Path:
    """Write ``t`` as binary when the suffix is ``.tns``, TNS-JSON otherwise."""
    path = Path(path)
    if path.suffix == ".tns":
        path.write_bytes(to_tns_bytes(t))
    else:
        path.write_text(to_tns_json(t))
    return path


def load(path) -> DenseTensor:
    path = Path(path)
    if path.suffix == ".tns":
        return from_tns_bytes(path.read_bytes())
    return from_tns_json(path.read_text())
