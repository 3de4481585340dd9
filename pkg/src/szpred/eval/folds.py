"""Leave-one-seizure-out folds and SOP/SPH scoring."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from ..errors import ValidationError
from ..postprocess import AlarmConfig, AlarmStream
from ..preprocess.windows import tile_interval
from ..signal_io.labeling import SegmentLabeling
from ..signal_io.records import Interval

HOUR = 3600.0


@dataclass
class Fold:
    index: int
    seizure: int                       # held-out leading seizure
    preictal_test: list                # its preictal intervals
    interictal_test: np.ndarray        # indices into FoldPlan.interictal_starts
    interictal_train: np.ndarray


@dataclass
class FoldPlan:
    folds: list
    interictal_starts: np.ndarray      # all interictal window starts, time-ordered
    interictal_interval: np.ndarray    # owning interictal interval id per window
    window_seconds: float = 30.0
    seed: int = 0
    offset: int = 0                    # rotation applied before chunking
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.folds)

    def test_spans(self, fold: Fold) -> list:
        return window_spans(self.interictal_starts[fold.interictal_test], self.window_seconds)

    def test_hours(self, fold: Fold) -> float:
        return len(fold.interictal_test) * self.window_seconds / HOUR


def interictal_grid(labeling: SegmentLabeling, window: float = 30.0):
    """Non-overlapping interictal window starts and their interval ids."""
    starts, ids = [], []
    for j, iv in enumerate(labeling.interictal_intervals):
        tiles = tile_interval(iv.start, iv.end, window, window)
        starts.extend(tiles)
        ids.extend([j] * len(tiles))
    return np.asarray(starts, dtype=float), np.asarray(ids, dtype=np.int64)


def make_folds(labeling: SegmentLabeling, seed: int = 0,
               n_folds: Optional[int] = None) -> FoldPlan:
    """One fold per leading seizure, each with its own share of interictal data.

    The time-ordered interictal windows are rotated by a seeded random offset
    and cut into ``N`` contiguous parts whose sizes differ by at most one, so
    each held-out part is a block of neighbouring windows (at most two blocks
    when the rotation wraps).  Different seeds give different partitions
    with the same sizes.
    """
    n = len(labeling.seizures) if n_folds is None else int(n_folds)
    if n < 2:
        raise ValidationError(f"leave-one-out needs at least 2 seizures, got {n}")
    if labeling.interictal_hours <= 0:
        raise ValidationError("no interictal data to partition")
    w = labeling.config.window_seconds
    starts, ids = interictal_grid(labeling, w)
    m = len(starts)
    if m < n:
        raise ValidationError(f"{m} interictal windows cannot be split into {n} parts")
    offset = int(np.random.default_rng(seed).integers(m))
    order = np.roll(np.arange(m), -offset)
    parts = np.array_split(order, n)
    folds = []
    for j, part in enumerate(parts):
        test = np.sort(part)
        train = np.setdiff1d(np.arange(m), test)
        folds.append(Fold(j, j, labeling.preictal_for(j), test, train))
    return FoldPlan(folds, starts, ids, w, seed, offset)


def window_spans(starts, window: float = 30.0) -> list:
    """Merge window ``[s, s + window)`` spans into maximal contiguous intervals."""
    out = []
    for s in np.sort(np.asarray(starts, dtype=float)):
        if out and s <= out[-1][1] + 1e-6:
            out[-1][1] = max(out[-1][1], s + window)
        else:
            out.append([s, s + window])
    return [Interval(a, b) for a, b in out]


class Score(NamedTuple):
    predicted: np.ndarray      # bool per onset
    false_alarms: int
    interictal_hours: float

    @property
    def n_predicted(self) -> int:
        return int(self.predicted.sum())


def score_alarms(alarms: AlarmStream, onsets: Sequence[float],
                 interictal_spans: Sequence, cfg: AlarmConfig = AlarmConfig()) -> Score:
    """Match alarms against seizure onsets under SOP/SPH rules.

    An alarm at ``t`` predicts onset ``o`` when ``t + SPH <= o <= t + SPH + SOP``.
    Alarms raised inside an interictal span (end-inclusive, since an alarm
    carries the end time of its last window) that predict no onset are false
    alarms.
    """
    spans = sorted((float(a), float(b)) for a, b, *_ in interictal_spans)
    for (a0, b0), (a1, b1) in zip(spans, spans[1:]):
        if a1 < b0 - 1e-9:
            raise ValidationError(f"interictal test spans overlap: [{a0}, {b0}) and [{a1}, {b1})")
    t = np.asarray(alarms.alarms, dtype=float)
    o = np.asarray(onsets, dtype=float)
    lead = o[None, :] - t[:, None]
    hits = (lead >= cfg.sph) & (lead <= cfg.sph + cfg.sop)
    predicted = hits.any(axis=0) if len(t) else np.zeros(len(o), dtype=bool)
    qualifying = hits.any(axis=1) if len(o) else np.zeros(len(t), dtype=bool)
    inside = np.zeros(len(t), dtype=bool)
    for a, b in spans:
        inside |= (t >= a) & (t <= b)
    false_alarms = int(np.sum(inside & ~qualifying))
    hours = sum(b - a for a, b in spans) / HOUR
    return Score(predicted, false_alarms, hours)


def false_prediction_rate(false_alarms: int, hours: float) -> float:
    if hours <= 0:
        raise ValidationError("interictal hours must be positive to compute FPR")
    return false_alarms / hours
