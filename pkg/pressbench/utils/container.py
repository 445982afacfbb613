"""Self-describing binary container: magic, header length, JSON header, raw arrays.

Layout::

    magic (4 bytes) | header length (u32 LE) | JSON header | payload

The header lists every array as ``{name, dtype, shape, offset, nbytes}`` with
offsets relative to the start of the payload. All arrays are little-endian.
"""
import json
import logging
import os
import struct
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from pressbench.errors import DatasetError

logger = logging.getLogger(__name__)

DTYPES = {"u8": "<u1", "f32": "<f4", "f64": "<f8", "i64": "<i8"}
_REVERSE = {np.dtype(v).str: k for k, v in DTYPES.items()}


def _dtype_tag(array: np.ndarray) -> str:
    key = array.dtype.newbyteorder("<").str if array.dtype.byteorder == ">" else array.dtype.str
    if key not in _REVERSE:
        raise DatasetError(f"unsupported array dtype {array.dtype}")
    return _REVERSE[key]


def encode_container(magic: bytes, meta: dict, arrays: Dict[str, np.ndarray]) -> bytes:
    """Serialize metadata and named arrays to container bytes."""
    if len(magic) != 4:
        raise ValueError("magic must be 4 bytes")
    entries = []
    blobs = []
    offset = 0
    for name, array in arrays.items():
        array = np.asarray(array)
        tag = _dtype_tag(array)
        blob = np.ascontiguousarray(array, dtype=DTYPES[tag]).tobytes()
        entries.append(
            {"name": name, "dtype": tag, "shape": list(array.shape), "offset": offset, "nbytes": len(blob)}
        )
        blobs.append(blob)
        offset += len(blob)
    header = dict(meta)
    header["arrays"] = entries
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return magic + struct.pack("<I", len(header_bytes)) + header_bytes + b"".join(blobs)


def decode_container(data: bytes, magic: bytes) -> Tuple[dict, Dict[str, np.ndarray]]:
    """Parse container bytes into (header, arrays)."""
    if data[:4] != magic:
        raise DatasetError(f"bad magic {data[:4]!r}, expected {magic!r}")
    (header_len,) = struct.unpack("<I", data[4:8])
    header = json.loads(data[8 : 8 + header_len].decode("utf-8"))
    payload = memoryview(data)[8 + header_len :]
    arrays = {}
    for entry in header.get("arrays", []):
        start, stop = entry["offset"], entry["offset"] + entry["nbytes"]
        if stop > len(payload):
            raise DatasetError(f"array {entry['name']} runs past end of file")
        array = np.frombuffer(payload[start:stop], dtype=DTYPES[entry["dtype"]])
        arrays[entry["name"]] = array.reshape(entry["shape"]).copy()
    return header, arrays


def write_container(path: Union[str, Path], magic: bytes, meta: dict, arrays: Dict[str, np.ndarray]) -> Path:
    """Atomically write a container file."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(encode_container(magic, meta, arrays))
        os.replace(tmp, path)
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        tmp.unlink(missing_ok=True)
        raise DatasetError(f"could not write {path}: {e}") from e
    return path


def read_container(path: Union[str, Path], magic: bytes) -> Tuple[dict, Dict[str, np.ndarray]]:
    """Read a container file written by ``write_container``."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        logger.error(f"Error reading {path}: {e}")
        raise DatasetError(f"could not read {path}: {e}") from e
    return decode_container(data, magic)
