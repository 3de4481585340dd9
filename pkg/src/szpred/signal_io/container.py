"""Binary EEG container.

Layout (little-endian)::

    magic        8 bytes  b"EEGSEG01"
    version      u32
    n_channels   u32
    rate         u32      samples per second
    n_samples    u64      per channel
    start_time   f64      seconds since epoch, NaN if unknown
    channels     n_channels x (u32 len + UTF-8 name, u32 len + UTF-8 role)
    n_seizures   u32
    seizures     n_seizures x (f64 onset, f64 offset), seconds from start
    samples      f32 matrix, channel-major
"""
from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import (ChannelCountError, FormatError, TruncationError,
                      VersionError)
from .records import ChannelInfo, EegRecord, SeizureEvent

MAGIC = b"EEGSEG01"
VERSION = 1

_HEADER = struct.Struct("<IIIQd")


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncationError(
                f"file ends inside {what} (need {n} bytes at offset {self.pos}, "
                f"have {len(self.buf) - self.pos})")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))

    def string(self, what: str) -> str:
        (n,) = self.unpack("<I", what)
        return self.take(n, what).decode("utf-8")


def _pack_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def encode_record(record: EegRecord) -> bytes:
    parts = [MAGIC, _HEADER.pack(VERSION, record.n_channels, record.sampling_rate,
                                 record.n_samples, record.start_time)]
    for ch in record.channels:
        parts.append(_pack_str(ch.name))
        parts.append(_pack_str(ch.role))
    parts.append(struct.pack("<I", len(record.annotations)))
    for ev in record.annotations:
        parts.append(struct.pack("<dd", ev.onset, ev.offset))
    parts.append(np.ascontiguousarray(record.samples, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_record(buf: bytes) -> EegRecord:
    r = _Reader(buf)
    magic = r.take(len(MAGIC), "magic")
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, n_ch, rate, n_samp, start = r.unpack(_HEADER.format, "header")
    if version != VERSION:
        raise VersionError(f"container version {version}, reader supports {VERSION}")
    chans = []
    for _ in range(n_ch):
        chans.append(ChannelInfo(r.string("channel table"), r.string("channel table")))
    (n_ann,) = r.unpack("<I", "annotation table")
    events = []
    for _ in range(n_ann):
        onset, offset = r.unpack("<dd", "annotation table")
        events.append(SeizureEvent(onset, offset))

    expected = n_ch * n_samp * 4
    remaining = len(buf) - r.pos
    if remaining < expected:
        raise TruncationError(
            f"sample matrix truncated: {remaining} of {expected} bytes present")
    if remaining > expected:
        row = n_samp * 4
        hint = f" (payload fits {remaining // row} channels)" if row and remaining % row == 0 else ""
        raise ChannelCountError(
            f"header declares {n_ch} channels but payload has "
            f"{remaining - expected} extra bytes{hint}")
    samples = np.frombuffer(buf, dtype="<f4", count=n_ch * n_samp, offset=r.pos)
    samples = samples.reshape(n_ch, n_samp).astype(np.float32)
    return EegRecord(tuple(chans), rate, samples, start, tuple(events))


def write_record(record: EegRecord, path) -> None:
    data = encode_record(record)
    tmp = f"{os.fspath(path)}.part"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def read_record(path) -> EegRecord:
    with open(path, "rb") as fh:
        return decode_record(fh.read())
