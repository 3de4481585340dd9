"""In-memory EEG record types."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np

from ..errors import ValidationError


class ChannelInfo(NamedTuple):
    name: str
    role: str = "eeg"


class Interval(NamedTuple):
    """Half-open time span ``[start, end)`` in seconds.

    ``seizure`` is the index of the owning leading seizure for preictal spans
    and ``None`` for interictal spans.
    """

    start: float
    end: float
    seizure: Optional[int] = None

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class SeizureEvent:
    onset: float
    offset: float
    is_leading: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.onset) and math.isfinite(self.offset)):
            raise ValidationError("seizure onset/offset must be finite")
        if self.offset <= self.onset:
            raise ValidationError(
                f"seizure offset {self.offset} not after onset {self.onset}")

    def shifted(self, dt: float) -> "SeizureEvent":
        return replace(self, onset=self.onset + dt, offset=self.offset + dt)


@dataclass(frozen=True, eq=False)
class EegRecord:
    """Continuous multi-channel recording.

    ``samples`` is a float32 matrix ``[channels, n_samples]`` in microvolts.
    Annotation times are seconds from the record start; ``start_time`` is
    seconds since the epoch (NaN when wall-clock time is unknown).
    """

    channels: tuple
    sampling_rate: int
    samples: np.ndarray
    start_time: float = 0.0
    annotations: tuple = field(default_factory=tuple)

    def __post_init__(self):
        chans = tuple(c if isinstance(c, ChannelInfo) else ChannelInfo(*c)
                      if isinstance(c, (tuple, list)) else ChannelInfo(str(c))
                      for c in self.channels)
        object.__setattr__(self, "channels", chans)
        if int(self.sampling_rate) != self.sampling_rate or self.sampling_rate <= 0:
            raise ValidationError(
                f"sampling_rate must be a positive integer, got {self.sampling_rate}")
        object.__setattr__(self, "sampling_rate", int(self.sampling_rate))

        x = np.asarray(self.samples, dtype=np.float32)
        if x.ndim != 2:
            raise ValidationError("samples must be a 2-D [channels, samples] matrix")
        if x.shape[0] != len(chans):
            raise ValidationError(
                f"{len(chans)} channel descriptors for {x.shape[0]} sample rows")
        if not np.all(np.isfinite(x)):
            raise ValidationError("samples contain non-finite values")
        if x is self.samples and x.flags.writeable:
            x = x.copy()
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)

        ann = tuple(sorted(self.annotations, key=lambda e: (e.onset, e.offset)))
        if list(ann) != list(self.annotations):
            raise ValidationError("annotations must be time-ordered")
        for ev in ann:
            if ev.onset < 0 or ev.offset > self.duration + 1e-9:
                raise ValidationError(
                    f"seizure [{ev.onset}, {ev.offset}] outside record span "
                    f"[0, {self.duration}]")
        object.__setattr__(self, "annotations", ann)

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate

    @property
    def channel_names(self) -> list:
        return [c.name for c in self.channels]

    def absolute_span(self) -> Interval:
        start = 0.0 if math.isnan(self.start_time) else self.start_time
        return Interval(start, start + self.duration)

    def slice_seconds(self, start: float, stop: float) -> np.ndarray:
        """Samples between two offsets (seconds from record start)."""
        i0 = int(round(start * self.sampling_rate))
        i1 = i0 + int(round((stop - start) * self.sampling_rate))
        if i0 < 0 or i1 > self.n_samples:
            raise ValidationError(
                f"slice [{start}, {stop}) s outside record of {self.duration} s")
        return self.samples[:, i0:i1]
