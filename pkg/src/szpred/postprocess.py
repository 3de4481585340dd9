"""k-of-n alarm voting with seizure-occurrence-period hold."""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class AlarmConfig:
    k: int = 8
    n: int = 10
    threshold: float = 0.5
    sop: float = 1800.0
    sph: float = 300.0
    mode: str = "sliding"          # or "tumbling"
    window_seconds: float = 30.0   # nominal spacing; larger gaps reset voting

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValidationError(f"alarm.k must satisfy 1 <= k <= n, got k={self.k}, n={self.n}")
        if not 0 < self.threshold < 1:
            raise ValidationError("alarm.threshold must be in (0, 1)")
        if self.sop <= 0 or self.sph < 0:
            raise ValidationError("alarm.sop must be > 0 and alarm.sph >= 0")
        if self.mode not in ("sliding", "tumbling"):
            raise ValidationError("alarm.mode must be sliding|tumbling")

    @property
    def hold(self) -> float:
        return self.sph + self.sop

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AlarmStream:
    """Alarm raise times (seconds) and the index of the raising prediction."""

    alarms: np.ndarray = field(default_factory=lambda: np.zeros(0))
    hold_until: np.ndarray = field(default_factory=lambda: np.zeros(0))
    index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self):
        return len(self.alarms)

    def __eq__(self, other):
        return (isinstance(other, AlarmStream) and np.array_equal(self.alarms, other.alarms)
                and np.array_equal(self.hold_until, other.hold_until)
                and np.array_equal(self.index, other.index))


def _prepare(probs, times, segments, cfg):
    p = np.asarray(probs, dtype=float).ravel()
    if times is None:
        t = cfg.window_seconds * (np.arange(len(p)) + 1.0)
    else:
        t = np.asarray(times, dtype=float).ravel()
        if t.shape != p.shape:
            raise ValidationError(f"{len(t)} timestamps for {len(p)} probabilities")
    if len(t) > 1 and np.any(np.diff(t) <= 0):
        i = int(np.flatnonzero(np.diff(t) <= 0)[0])
        raise ValidationError(f"timestamps not increasing at index {i + 1} "
                              f"({t[i]:.3f} then {t[i + 1]:.3f})")
    seg = np.zeros(len(p), dtype=np.int64) if segments is None else np.asarray(segments)
    if seg.shape != p.shape:
        raise ValidationError(f"{len(seg)} segment ids for {len(p)} probabilities")
    reset = np.ones(len(p), dtype=bool)
    if len(p) > 1:
        reset[1:] = (np.diff(t) > cfg.window_seconds + 1e-6) | (seg[1:] != seg[:-1])
    return p > cfg.threshold, t, reset


def _stream(raised, t, cfg):
    idx = np.asarray(raised, dtype=np.int64)
    at = t[idx] if len(idx) else np.zeros(0)
    return AlarmStream(at, at + cfg.hold, idx)


def kofn(probs: Sequence[float], cfg: AlarmConfig = AlarmConfig(), times=None,
         segments=None) -> AlarmStream:
    """Raise alarms where at least ``k`` of the last ``n`` votes are positive.

    ``times`` are the prediction times (seconds, strictly increasing; default
    ``30, 60, ...``).  A vote is positive when its probability exceeds the
    threshold.  Voting restarts after a gap longer than one window or when
    the ``segments`` id changes.  After an alarm at ``t`` no alarm is raised
    before ``t + SPH + SOP``.  In ``"tumbling"`` mode votes are counted in
    consecutive blocks of ``n`` instead of a sliding window.
    """
    votes, t, reset = _prepare(probs, times, segments, cfg)
    raised, hold_end = [], -np.inf
    buf, count = deque(), 0
    for i, v in enumerate(votes):
        if reset[i] or (cfg.mode == "tumbling" and len(buf) == cfg.n):
            buf.clear()
            count = 0
        buf.append(v)
        count += int(v)
        if cfg.mode == "sliding" and len(buf) > cfg.n:
            count -= int(buf.popleft())
        if count >= cfg.k and t[i] >= hold_end:
            raised.append(i)
            hold_end = t[i] + cfg.hold
    return _stream(raised, t, cfg)


def kofn_bruteforce(probs: Sequence[float], cfg: AlarmConfig = AlarmConfig(), times=None,
                    segments=None) -> AlarmStream:
    """Direct recount of the votes behind every prediction; reference for :func:`kofn`."""
    votes, t, reset = _prepare(probs, times, segments, cfg)
    raised, hold_end = [], -np.inf
    run_start = 0
    for i in range(len(votes)):
        if reset[i]:
            run_start = i
        if cfg.mode == "sliding":
            lo = max(run_start, i - cfg.n + 1)
        else:
            lo = run_start + ((i - run_start) // cfg.n) * cfg.n
        if int(sum(votes[lo:i + 1])) >= cfg.k and t[i] >= hold_end:
            raised.append(i)
            hold_end = t[i] + cfg.hold
    return _stream(raised, t, cfg)


ALARM_COLUMNS = ("subject", "raise_time_s", "hold_until_s", "fold", "repeat")


def alarm_rows(stream: AlarmStream, subject: str, fold: int, repeat: int = 0) -> list:
    return [{"subject": subject, "raise_time_s": f"{a:.3f}", "hold_until_s": f"{h:.3f}",
             "fold": fold, "repeat": repeat}
            for a, h in zip(stream.alarms, stream.hold_until)]


def write_alarms_csv(path, rows: Sequence[dict], header: Optional[str] = None) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write(header.rstrip("\n") + "\n")
        w = csv.DictWriter(fh, fieldnames=ALARM_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
