"""Binary weight checkpoints.

Layout: magic `OTWT`, version byte, a JSON config blob, a manifest of
(name, shape, offset) entries, then the little-endian f32 payload. Tensor
names are written in sorted order so identical weights give identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigError

_MAGIC = b"OTWT"
_VERSION = 1


def serialize_weights(arrays: dict[str, np.ndarray], config: dict) -> bytes:
    chunks = [_MAGIC, struct.pack("<B", _VERSION)]
    config_bytes = json.dumps(config, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks.append(struct.pack("<I", len(config_bytes)))
    chunks.append(config_bytes)

    names = sorted(arrays)
    manifest = [struct.pack("<I", len(names))]
    offset = 0
    payloads = []
    for name in names:
        arr = np.ascontiguousarray(arrays[name], dtype="<f4")
        nb = name.encode("utf-8")
        manifest.append(struct.pack("<H", len(nb)))
        manifest.append(nb)
        manifest.append(struct.pack("<B", arr.ndim))
        for dim in arr.shape:
            manifest.append(struct.pack("<I", dim))
        manifest.append(struct.pack("<Q", offset))
        payloads.append(arr.tobytes())
        offset += len(payloads[-1])
    return b"".join(chunks + manifest + payloads)


def deserialize_weights(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[:4] != _MAGIC:
        raise ConfigError("not a weight checkpoint")
    if blob[4] != _VERSION:
        raise ConfigError(f"unsupported checkpoint version {blob[4]}")
    pos = 5
    (config_len,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    config = json.loads(blob[pos : pos + config_len].decode("utf-8"))
    pos += config_len
    (count,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    entries = []
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        name = blob[pos : pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}I", blob, pos) if ndim else ()
        pos += 4 * ndim
        (offset,) = struct.unpack_from("<Q", blob, pos)
        pos += 8
        entries.append((name, shape, offset))
    payload_start = pos
    arrays = {}
    for name, shape, offset in entries:
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = payload_start + offset
        raw = np.frombuffer(blob, dtype="<f4", count=size, offset=start)
        arrays[name] = raw.reshape(shape).astype(np.float64)
    return arrays, config


def save_checkpoint(path: str | Path, arrays: dict[str, np.ndarray], config: dict) -> bytes:
    """Write the checkpoint and return its 16-byte fingerprint."""
    blob = serialize_weights(arrays, config)
    with open(path, "wb") as f:
        f.write(blob)
    return hashlib.md5(blob).digest()


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict, bytes]:
    blob = Path(path).read_bytes()
    arrays, config = deserialize_weights(blob)
    return arrays, config, hashlib.md5(blob).digest()


def weights_fingerprint(arrays: dict[str, np.ndarray], config: dict) -> bytes:
    return hashlib.md5(serialize_weights(arrays, config)).digest()
