"""Versioned binary checkpoints.

Layout (little-endian)::

    b"CNNM0001", u32 version
    u32 len + architecture JSON
    u32 len + metadata JSON (epochs, seed, config hash, stats digest, ...)
    u32 n_param_blocks
      per block: u16 len + name, u8 dtype code, u8 ndim, u32 dims[ndim], data
    u32 n_stat_blocks
      per block: u16 len + name, u32 size, f64 data
    u32 crc32 of everything above

Parameter data are f32 for the default float32 models (dtype code 0) and
f64 for double-precision builds (code 1), so round trips are bit-exact.
"""
from __future__ import annotations

import json
import os
import struct
import zlib

import numpy as np

from ..errors import (ArchitectureMismatchError, CheckpointIntegrityError,
                      CheckpointVersionError)
from .model import CnnArchitecture, CnnModel

MAGIC = b"CNNM0001"
VERSION = 1
_DTYPES = {0: "<f4", 1: "<f8"}
_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


def _blob(text: str) -> bytes:
    raw = text.encode()
    return struct.pack("<I", len(raw)) + raw


def encode_checkpoint(model: CnnModel) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION),
             _blob(json.dumps(model.arch.to_dict(), sort_keys=True)),
             _blob(json.dumps(model.meta, sort_keys=True, default=str)),
             struct.pack("<I", len(model.params))]
    for name, arr in model.params.items():
        code = _CODES[arr.dtype]
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack(f"<BB{arr.ndim}I", code, arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, _DTYPES[code]).tobytes())
    parts.append(struct.pack("<I", len(model.bn_stats)))
    for name, arr in model.bn_stats.items():
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<I", arr.size))
        parts.append(np.ascontiguousarray(arr, "<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n):
        if self.pos + n > len(self.buf):
            raise CheckpointIntegrityError("checkpoint truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(buf: bytes, expect: CnnArchitecture = None) -> CnnModel:
    if buf[:8] != MAGIC:
        raise CheckpointIntegrityError("not a checkpoint file (bad magic)")
    if len(buf) < 16:
        raise CheckpointIntegrityError("checkpoint truncated")
    (version,) = struct.unpack("<I", buf[8:12])
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, supported {VERSION}")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointIntegrityError("checkpoint checksum mismatch (truncated or corrupted)")
    r = _Reader(body)
    r.take(12)
    arch = CnnArchitecture.from_dict(json.loads(r.take(r.unpack("<I")[0])))
    meta = json.loads(r.take(r.unpack("<I")[0]))
    if expect is not None and expect != arch:
        raise ArchitectureMismatchError(
            f"checkpoint expects input {arch.input_dims}, caller expects {expect.input_dims}"
            if arch.input_dims != expect.input_dims else
            "checkpoint architecture differs from the configured one")
    params = {}
    for _ in range(r.unpack("<I")[0]):
        name = r.take(r.unpack("<H")[0]).decode()
        code, ndim = r.unpack("<BB")
        if code not in _DTYPES:
            raise CheckpointIntegrityError(f"unknown dtype code {code} for {name}")
        shape = r.unpack(f"<{ndim}I")
        dt = np.dtype(_DTYPES[code])
        n = int(np.prod(shape)) * dt.itemsize
        params[name] = np.frombuffer(r.take(n), dt).reshape(shape).astype(dt.newbyteorder("="))
    stats = {}
    for _ in range(r.unpack("<I")[0]):
        name = r.take(r.unpack("<H")[0]).decode()
        (size,) = r.unpack("<I")
        stats[name] = np.frombuffer(r.take(8 * size), "<f8").astype(np.float64)
    return CnnModel(arch, params, stats, meta)


def save_checkpoint(model: CnnModel, path) -> None:
    tmp = f"{os.fspath(path)}.part"
    with open(tmp, "wb") as fh:
        fh.write(encode_checkpoint(model))
    os.replace(tmp, path)


def load_checkpoint(path, expect: CnnArchitecture = None) -> CnnModel:
    """Read a checkpoint; ``expect`` asserts the stored architecture."""
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read(), expect)
