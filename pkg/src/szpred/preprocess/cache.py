"""Spectrogram tensor cache and standardisation-stats sidecar files.

Window set layout (little-endian)::

    b"SPEC0001", u32 version
    u32 n_windows, u32 channels, u32 freq_bins, u32 time_bins
    f64 window_seconds, f64 balance_step
    f64 freq_axis[F], f64 time_axis[T], u32 kept_bins[F]
    per window: i8 label, i32 source, i32 interval, f64 start
    f32 values[N, C, F, T]

Stats layout: b"STAT0001", u32 version, u32 C, u32 F, u32 n_windows,
u32 len + fingerprint, f64 mean[C, F], f64 std[C, F].
"""
from __future__ import annotations

import os
import struct

import numpy as np

from ..errors import FormatError, TruncationError, VersionError
from .windows import StandardizationStats, WindowSet

SPEC_MAGIC = b"SPEC0001"
STAT_MAGIC = b"STAT0001"
VERSION = 1

_ROW = np.dtype([("label", "<i1"), ("source", "<i4"), ("interval", "<i4"), ("start", "<f8")])


def _atomic_write(path, data: bytes) -> None:
    tmp = f"{os.fspath(path)}.part"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def _take(buf, pos, n, what):
    if pos + n > len(buf):
        raise TruncationError(f"cache file ends inside {what}")
    return buf[pos:pos + n], pos + n


def write_window_set(ws: WindowSet, path) -> None:
    n, c, f, t = ws.values.shape
    rows = np.empty(n, dtype=_ROW)
    rows["label"], rows["source"] = ws.labels, ws.source
    rows["interval"], rows["start"] = ws.interval, ws.starts
    parts = [SPEC_MAGIC, struct.pack("<IIIIIdd", VERSION, n, c, f, t,
                                     ws.window_seconds, ws.balance_step),
             np.asarray(ws.freq_axis, "<f8").tobytes(),
             np.asarray(ws.time_axis, "<f8").tobytes(),
             np.asarray(ws.kept_bins, "<u4").tobytes(),
             rows.tobytes(),
             np.ascontiguousarray(ws.values, "<f4").tobytes()]
    _atomic_write(path, b"".join(parts))


def read_window_set(path) -> WindowSet:
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _take(buf, 0, 8, "magic")
    if magic != SPEC_MAGIC:
        raise FormatError(f"{path}: not a spectrogram cache file")
    head = struct.Struct("<IIIIIdd")
    raw, pos = _take(buf, pos, head.size, "header")
    version, n, c, f, t, wsec, step = head.unpack(raw)
    if version != VERSION:
        raise VersionError(f"{path}: cache version {version}")
    raw, pos = _take(buf, pos, 8 * f, "freq axis")
    freq = np.frombuffer(raw, "<f8").copy()
    raw, pos = _take(buf, pos, 8 * t, "time axis")
    times = np.frombuffer(raw, "<f8").copy()
    raw, pos = _take(buf, pos, 4 * f, "kept bins")
    kept = np.frombuffer(raw, "<u4").astype(np.int64)
    raw, pos = _take(buf, pos, _ROW.itemsize * n, "window table")
    rows = np.frombuffer(raw, _ROW)
    raw, pos = _take(buf, pos, 4 * n * c * f * t, "values")
    vals = np.frombuffer(raw, "<f4").reshape(n, c, f, t).astype(np.float32)
    return WindowSet(vals, rows["label"].astype(np.int8), rows["start"].astype(np.float64),
                     rows["source"].astype(np.int32), rows["interval"].astype(np.int32),
                     freq, times, kept, wsec, step)


def write_stats(stats: StandardizationStats, path) -> None:
    c, f = stats.mean.shape
    fp = stats.fingerprint.encode()
    data = b"".join([STAT_MAGIC, struct.pack("<IIIII", VERSION, c, f, stats.n_windows, len(fp)),
                     fp, np.asarray(stats.mean, "<f8").tobytes(),
                     np.asarray(stats.std, "<f8").tobytes()])
    _atomic_write(path, data)


def read_stats(path) -> StandardizationStats:
    with open(path, "rb") as fh:
        buf = fh.read()
    magic, pos = _take(buf, 0, 8, "magic")
    if magic != STAT_MAGIC:
        raise FormatError(f"{path}: not a stats file")
    raw, pos = _take(buf, pos, 20, "header")
    version, c, f, nwin, nfp = struct.unpack("<IIIII", raw)
    if version != VERSION:
        raise VersionError(f"{path}: stats version {version}")
    fp, pos = _take(buf, pos, nfp, "fingerprint")
    raw, pos = _take(buf, pos, 16 * c * f, "mean/std")
    arr = np.frombuffer(raw, "<f8").reshape(2, c, f).copy()
    return StandardizationStats(arr[0], arr[1], nwin, fp.decode())
