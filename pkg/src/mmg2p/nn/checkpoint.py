"""Versioned binary checkpoints.

Layout (little-endian)::

    magic   8 bytes  b"MMG2PCK\\0"
    version u32
    config  u32 length + UTF-8 JSON (sorted keys)
    alphabet fingerprint  32 bytes (SHA-256)
    tensors u32 count, then per tensor:
        u16 name length + UTF-8 name, u8 ndim, ndim * u32 dims, float32 data
"""

from __future__ import annotations

import hashlib
import json
import struct

import numpy as np

from .tensor import default_dtype

MAGIC = b"MMG2PCK\0"
VERSION = 1

_registry: dict = {}


class CheckpointError(Exception):
    pass


def register(kind: str):
    """Class decorator: models expose ``kind``, ``config`` and ``from_config``."""

    def wrap(cls):
        _registry[kind] = cls
        cls.kind = kind
        return cls

    return wrap


def fingerprint(alphabet) -> bytes:
    if alphabet is None:
        return bytes(32)
    return hashlib.sha256(alphabet.canonical().encode("utf-8")).digest()


def save_checkpoint(model) -> bytes:
    config = json.dumps({"kind": model.kind, "config": model.config}, sort_keys=True,
                        ensure_ascii=False).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(config)), config,
             fingerprint(getattr(model, "alphabet", None))]
    state = model.state_dict()
    parts.append(struct.pack("<I", len(state)))
    for name, arr in state.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("checkpoint truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(buf: bytes, alphabet=None):
    """Rebuild a registered model; ``alphabet`` (if given) must match the saved fingerprint."""
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    (version,) = r.unpack("<I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (n,) = r.unpack("<I")
    header = json.loads(r.take(n).decode("utf-8"))
    fp = r.take(32)
    cls = _registry.get(header["kind"])
    if cls is None:
        raise CheckpointError(f"unknown model kind {header['kind']!r}")
    if alphabet is not None and fp != fingerprint(alphabet):
        raise CheckpointError("alphabet fingerprint mismatch")
    (count,) = r.unpack("<I")
    state = {}
    for _ in range(count):
        (ln,) = r.unpack("<H")
        name = r.take(ln).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I") if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        state[name] = np.frombuffer(r.take(4 * size), dtype="<f4").reshape(shape).astype(np.float32)
    if r.pos != len(buf):
        raise CheckpointError("trailing bytes after tensor table")
    with default_dtype(np.float32):
        model = cls.from_config(header["config"])
    if fp != fingerprint(getattr(model, "alphabet", None)):
        raise CheckpointError("alphabet fingerprint does not match the stored config")
    try:
        model.load_state_dict(state)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(str(exc)) from exc
    if hasattr(model, "eval"):
        model.eval()
    return model


def save_file(model, path):
    with open(path, "wb") as fh:
        fh.write(save_checkpoint(model))


def load_file(path, alphabet=None):
    with open(path, "rb") as fh:
        return load_checkpoint(fh.read(), alphabet)
