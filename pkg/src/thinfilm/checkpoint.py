"""Binary checkpoints, little-endian.

    offset  size  field
    0       8     magic  b"TFILMCK1"
    8       4     format version (u32)
    12      4     padding
    16      8     n (u64)
    24      8     accepted step count (u64)
    32      8     L (f64)
    40      8     t (f64)
    48      8     next time step (f64)
    56      32    sha256 of the config text
    88      8     config text length in bytes (u64)
    96      8n    h
    ...     8n    gamma
    ...           config text (utf-8)

The next time step and the embedded config make a resumed run continue
exactly where the original one was.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import State
from .errors import CheckpointError

MAGIC = b"TFILMCK1"
VERSION = 1
_HEADER = struct.Struct("<8sI4xQQddd32sQ")
_F64 = np.dtype("<f8")


@dataclass
class Checkpoint:
    format_version: int
    L: float
    n: int
    t: float
    step: int
    dt_next: float
    config_hash: bytes
    config_text: str
    h: np.ndarray
    gamma: np.ndarray

    def state(self):
        return State(self.h.copy(), self.gamma.copy(), self.t)


def save_checkpoint(path, state: State, L, step=0, dt_next=0.0, config_text=""):
    """Write atomically (temp file + rename) so a crash never leaves a torn checkpoint."""
    path = Path(path)
    cfg = config_text.encode()
    header = _HEADER.pack(MAGIC, VERSION, state.n, int(step), float(L), float(state.t),
                          float(dt_next), hashlib.sha256(cfg).digest(), len(cfg))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.h, dtype=_F64).tobytes())
        fh.write(np.ascontiguousarray(state.gamma, dtype=_F64).tobytes())
        fh.write(cfg)
    os.replace(tmp, path)
    return path


def read_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc}", {"path": str(path)}) from None
    details = {"path": str(path), "size": len(blob)}
    if len(blob) < _HEADER.size:
        raise CheckpointError("truncated header", details)
    magic, version, n, step, L, t, dt_next, digest, clen = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)", details)
    details.update(version=version, n=n, config_length=clen)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})",
                              details)
    expected = _HEADER.size + 16 * n + clen
    details["expected_size"] = expected
    if n < 1 or expected != len(blob):
        raise CheckpointError("length fields disagree with file size (truncated or corrupted)",
                              details)
    off = _HEADER.size
    h = np.frombuffer(blob, _F64, n, off).astype(float)
    gamma = np.frombuffer(blob, _F64, n, off + 8 * n).astype(float)
    cfg = blob[off + 16 * n:]
    if hashlib.sha256(cfg).digest() != digest:
        raise CheckpointError("config hash mismatch", details)
    return Checkpoint(version, L, n, t, step, dt_next, digest, cfg.decode(), h, gamma)


def load_checkpoint(path) -> State:
    return read_checkpoint(path).state()
