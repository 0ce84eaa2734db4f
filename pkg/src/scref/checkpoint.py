"""Self-describing binary checkpoint files with bit-exact round trip.

Layout (little endian):
    magic "SCREFCK1" | u32 version | i64 seed | 32-byte config digest |
    u32 tensor count | per tensor: u16 name length, name utf-8, u8 ndim,
    u32 dims..., raw float64 data.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SCREFCK1"
VERSION = 1


class CheckpointError(IOError):
    """Corrupt or incompatible checkpoint file."""


@dataclass
class Checkpoint:
    seed: int
    config_digest: str  # sha256 hex
    params: dict[str, np.ndarray]
    version: int = VERSION


def config_digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def save_checkpoint(path, params: dict[str, np.ndarray], seed: int, digest_hex: str) -> None:
    digest = bytes.fromhex(digest_hex)
    if len(digest) != 32:
        raise ValueError("config digest must be a sha256 hex string")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<Iq", VERSION, int(seed))
    blob += digest
    blob += struct.pack("<I", len(params))
    for name in sorted(params):
        arr = np.ascontiguousarray(params[name], dtype=np.float64)
        enc = name.encode()
        blob += struct.pack("<H", len(enc)) + enc
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.tobytes()
    Path(path).write_bytes(bytes(blob))


def load_checkpoint(path) -> Checkpoint:
    raw = Path(path).read_bytes()
    off = 0

    def take(n):
        nonlocal off
        if off + n > len(raw):
            raise CheckpointError("truncated checkpoint file")
        chunk = raw[off : off + n]
        off += n
        return chunk

    if take(len(MAGIC)) != MAGIC:
        raise CheckpointError("bad magic; not a checkpoint file")
    version, seed = struct.unpack("<Iq", take(12))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    digest = take(32).hex()
    (count,) = struct.unpack("<I", take(4))
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode()
        (ndim,) = struct.unpack("<B", take(1))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim)) if ndim else ()
        size = int(np.prod(shape)) if shape else 1
        params[name] = np.frombuffer(take(8 * size), dtype="<f8").reshape(shape).copy()
    if off != len(raw):
        raise CheckpointError("trailing bytes after last tensor")
    return Checkpoint(seed=seed, config_digest=digest, params=params, version=version)


def assign_params(named: dict, loaded: dict[str, np.ndarray]) -> None:
    """Copy loaded arrays into live parameter tensors; names and shapes must match."""
    missing = sorted(set(named) ^ set(loaded))
    if missing:
        raise CheckpointError(f"parameter name mismatch: {missing[:6]}")
    for name, tensor in named.items():
        arr = loaded[name]
        if arr.shape != tensor.data.shape:
            raise CheckpointError(f"shape mismatch for {name}: {arr.shape} vs {tensor.data.shape}")
        tensor.data[...] = arr
