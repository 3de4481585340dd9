"""Window tiling, class balancing and per-bin standardisation."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from ..errors import ShapeError, ValidationError
from ..signal_io.records import EegRecord
from .spectral import StftConfig, feature_axes, window_features

log = logging.getLogger(__name__)

PREICTAL, INTERICTAL = 1, 0
BALANCE_GRID = (30, 15, 10, 6, 5, 3, 2, 1)
STD_FLOOR = 1e-8


# -- standardisation ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StandardizationStats:
    mean: np.ndarray        # [C, F] float64
    std: np.ndarray         # [C, F] float64, floored
    n_windows: int
    fingerprint: str = ""   # identifies the windows the stats were fitted on

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.mean, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(self.std, dtype="<f8").tobytes())
        return h.hexdigest()[:16]


def window_fingerprint(keys) -> str:
    h = hashlib.sha256()
    for k in sorted(keys):
        h.update(repr(k).encode())
    return h.hexdigest()[:16]


def fit_stats(batch: np.ndarray, fingerprint: str = "") -> StandardizationStats:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError(f"expected [windows, channels, freq, time], got shape {x.shape}")
    mean = x.mean(axis=(0, 3))
    std = np.maximum(x.std(axis=(0, 3)), STD_FLOOR)
    return StandardizationStats(mean, std, x.shape[0], fingerprint)


def standardize(batch: np.ndarray, stats: Optional[StandardizationStats] = None,
                mode: str = "dataset", fingerprint: str = ""):
    """Z-score every (channel, frequency) series.

    With ``stats=None`` the statistics are fitted on ``batch`` (over all of its
    windows and time columns) and returned for reuse on held-out data.  In
    ``"window"`` mode each window is scaled by its own statistics and the
    returned stats are ``None``.
    """
    x = np.asarray(batch)
    if x.ndim != 4:
        raise ShapeError(f"expected [windows, channels, freq, time], got shape {x.shape}")
    if mode == "window":
        m = x.mean(axis=3, keepdims=True, dtype=np.float64)
        s = np.maximum(x.std(axis=3, keepdims=True, dtype=np.float64), STD_FLOOR)
        return ((x - m) / s).astype(np.float32), None
    if stats is None:
        stats = fit_stats(x, fingerprint)
    if stats.mean.shape != x.shape[1:3]:
        raise ShapeError(f"stats cover {stats.mean.shape} (channel, bin) pairs, "
                         f"batch has {x.shape[1:3]}")
    out = (x - stats.mean[None, :, :, None]) / stats.std[None, :, :, None]
    return out.astype(np.float32), stats


# -- balancing ------------------------------------------------------------

class BalanceChoice(NamedTuple):
    step: int
    n_preictal: int
    target: int
    shortfall: float    # 0 when the target count is reached


def count_windows(span: float, step: float, window: float) -> int:
    if span < window:
        return 0
    return int(np.floor((span - window) / step + 1e-9)) + 1


def choose_balance_step(preictal_seconds, n_interictal_windows: int,
                        window_seconds: float = 30.0) -> BalanceChoice:
    """Largest grid step giving at least 90 % as many preictal as interictal windows.

    ``preictal_seconds`` is a total duration or a sequence of interval lengths
    (windows are counted per interval).
    """
    spans = ([float(preictal_seconds)] if np.isscalar(preictal_seconds)
             else [float(s) for s in preictal_seconds])
    if not spans or max(spans) < window_seconds:
        raise ValidationError(f"preictal data shorter than one {window_seconds:g} s window")
    if n_interictal_windows < 0:
        raise ValidationError("interictal window count must be non-negative")
    target = int(np.ceil(0.9 * n_interictal_windows))
    count = 0
    for step in BALANCE_GRID:
        count = sum(count_windows(s, step, window_seconds) for s in spans)
        if count >= target:
            return BalanceChoice(step, count, target, 0.0)
    short = 1.0 - count / n_interictal_windows
    log.warning("preictal oversampling at 1 s still %.1f %% short of interictal count",
                100 * short)
    return BalanceChoice(1, count, target, short)


def tile_interval(start: float, end: float, step: float, window: float) -> list:
    return [start + k * step for k in range(count_windows(end - start, step, window))]


# -- window sets ----------------------------------------------------------

@dataclass(eq=False)
class WindowSet:
    """Spectrogram windows with labels and provenance.

    ``source`` is the owning seizure index for preictal windows and -1 for
    interictal ones; ``interval`` identifies the labeled span (or segment) the
    window was cut from.
    """

    values: np.ndarray                  # [N, C, F, T] float32
    labels: np.ndarray                  # int8
    starts: np.ndarray                  # float64, seconds
    source: np.ndarray                  # int32
    interval: np.ndarray                # int32
    freq_axis: np.ndarray
    time_axis: np.ndarray
    kept_bins: np.ndarray
    window_seconds: float = 30.0
    balance_step: float = 30.0
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "WindowSet":
        idx = np.asarray(idx, dtype=np.int64)
        return WindowSet(self.values[idx], self.labels[idx], self.starts[idx],
                         self.source[idx], self.interval[idx], self.freq_axis,
                         self.time_axis, self.kept_bins, self.window_seconds,
                         self.balance_step, dict(self.meta))

    def keys(self) -> list:
        return [(int(l), float(s)) for l, s in zip(self.labels, self.starts)]

    def counts(self):
        return int(np.sum(self.labels == PREICTAL)), int(np.sum(self.labels == INTERICTAL))

    @staticmethod
    def concat(sets: Sequence["WindowSet"]) -> "WindowSet":
        sets = [s for s in sets if s is not None]
        first = sets[0]
        return WindowSet(
            np.concatenate([s.values for s in sets]),
            np.concatenate([s.labels for s in sets]),
            np.concatenate([s.starts for s in sets]),
            np.concatenate([s.source for s in sets]),
            np.concatenate([s.interval for s in sets]),
            first.freq_axis, first.time_axis, first.kept_bins, first.window_seconds,
            max(s.balance_step for s in sets), {})

    def sorted(self) -> "WindowSet":
        order = np.lexsort((self.starts, self.labels))
        return self.subset(order)


class WindowExtractor:
    """Computes (and memoises) spectrogram windows from a sample source.

    ``fetch(start, duration)`` returns the raw ``[C, n]`` samples of a window
    on the labeling's time base.
    """

    def __init__(self, fetch: Callable, fs: int, n_channels: int, cfg: StftConfig):
        self.fetch = fetch
        self.fs = fs
        self.n_channels = n_channels
        self.cfg = cfg
        self.freq_axis, self.time_axis, self.kept_bins = feature_axes(fs, cfg)
        self.memo = {}

    @classmethod
    def for_record(cls, record: EegRecord, cfg: StftConfig) -> "WindowExtractor":
        return cls(lambda s, d: record.slice_seconds(s, s + d), record.sampling_rate,
                   record.n_channels, cfg)

    @classmethod
    def for_subject(cls, subject, cfg: StftConfig) -> "WindowExtractor":
        return cls(subject.samples_at, subject.sampling_rate, subject.n_channels, cfg)

    @property
    def feature_shape(self):
        return (self.n_channels, len(self.freq_axis), len(self.time_axis))

    def features(self, start: float) -> np.ndarray:
        key = round(float(start), 6)
        hit = self.memo.get(key)
        if hit is None:
            raw = self.fetch(start, self.cfg.window_seconds)
            hit = window_features(raw, self.fs, self.cfg)
            self.memo[key] = hit
        return hit

    def preload(self, ws: WindowSet) -> None:
        for s, v in zip(ws.starts, ws.values):
            self.memo.setdefault(round(float(s), 6), v)

    def memo_set(self) -> WindowSet:
        """Every computed window (unlabeled), for writing to a cache file."""
        starts = np.array(sorted(self.memo), dtype=np.float64)
        vals = np.empty((len(starts),) + self.feature_shape, dtype=np.float32)
        for i, s in enumerate(starts):
            vals[i] = self.memo[s]
        n = len(starts)
        return WindowSet(vals, np.full(n, -1, np.int8), starts, np.full(n, -1, np.int32),
                         np.full(n, -1, np.int32), self.freq_axis, self.time_axis,
                         self.kept_bins, self.cfg.window_seconds, self.cfg.window_seconds)

    def windows(self, intervals: Sequence, step: float, label: int,
                interval_ids: Optional[Sequence[int]] = None) -> WindowSet:
        w = self.cfg.window_seconds
        starts, source, ivid = [], [], []
        for j, iv in enumerate(intervals):
            tiles = tile_interval(iv.start, iv.end, step, w)
            starts.extend(tiles)
            src = -1 if iv.seizure is None else iv.seizure
            source.extend([src] * len(tiles))
            ivid.extend([interval_ids[j] if interval_ids is not None else j] * len(tiles))
        vals = np.empty((len(starts),) + self.feature_shape, dtype=np.float32)
        for i, s in enumerate(starts):
            vals[i] = self.features(s)
        return WindowSet(vals, np.full(len(starts), label, dtype=np.int8),
                         np.asarray(starts, dtype=np.float64),
                         np.asarray(source, dtype=np.int32), np.asarray(ivid, dtype=np.int32),
                         self.freq_axis, self.time_axis, self.kept_bins, w, float(step))


def extract_windows(source, labeling, cfg: StftConfig, balance: bool = False,
                    step: Optional[float] = None) -> WindowSet:
    """Tile a labeling into spectrogram windows.

    Interictal spans get non-overlapping windows; preictal spans are tiled at
    the balance step (``balance=True``, chosen with
    :func:`choose_balance_step` unless ``step`` is given) or without overlap.
    Values are excised magnitudes; standardise at dataset level afterwards.
    """
    if isinstance(source, WindowExtractor):
        ex = source
    elif isinstance(source, EegRecord):
        ex = WindowExtractor.for_record(source, cfg)
    else:
        ex = WindowExtractor.for_subject(source, cfg)
    w = cfg.window_seconds
    n_pre_iv = len(labeling.preictal_intervals)
    inter = ex.windows(labeling.interictal_intervals, w, INTERICTAL,
                       [n_pre_iv + j for j in range(len(labeling.interictal_intervals))])
    if balance and step is None:
        if labeling.preictal_intervals:
            step = choose_balance_step([iv.duration for iv in labeling.preictal_intervals],
                                       len(inter), w).step
        else:
            step = w
    pre = ex.windows(labeling.preictal_intervals, step if balance else w, PREICTAL)
    out = WindowSet.concat([pre, inter])
    out.balance_step = float(step if balance else w)
    return out
