"""Byte-stable checkpoint container.

Layout: the 8-byte magic ``KGSQACK1``, an 8-byte little-endian header length,
a UTF-8 JSON header (sorted keys), then each tensor's float64 little-endian
row-major bytes in header order. No timestamps, so equal content gives equal
files.
"""

import json
import struct

import numpy as np

from ..errors import ParseError

MAGIC = b"KGSQACK1"


def save_checkpoint(path, arrays, meta=None):
    names = list(arrays)
    header = {
        "meta": meta or {},
        "tensors": [{"name": k, "shape": list(np.shape(arrays[k]))} for k in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for k in names:
            fh.write(np.ascontiguousarray(arrays[k], dtype="<f8").tobytes())


def load_checkpoint(path):
    """Return ``(arrays, meta)``."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ParseError("not a kgsqa checkpoint", path=path)
    (n,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + n].decode("utf-8"))
    off = 16 + n
    arrays = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape)
        arrays[entry["name"]] = arr.astype(np.float64)
        off += 8 * count
    if off != len(data):
        raise ParseError("trailing bytes in checkpoint", path=path)
    return arrays, header["meta"]
