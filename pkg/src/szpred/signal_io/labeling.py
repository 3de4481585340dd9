"""Seizure merging, preictal/interictal labeling and subject eligibility."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from ..errors import ValidationError
from .records import EegRecord, Interval, SeizureEvent

log = logging.getLogger(__name__)

HOUR = 3600.0
DAY = 24 * HOUR


@dataclass(frozen=True)
class LabelingConfig:
    """Labeling geometry, all durations in seconds."""

    preictal_span: float = 1800.0
    sph: float = 300.0
    interictal_margin: float = 4 * HOUR
    seizure_merge_gap: float = 1800.0
    min_leading_seizures: int = 3
    min_interictal_hours: float = 3.0
    max_seizures_per_day: float = 10.0
    window_seconds: float = 30.0
    mode: str = "continuous"

    def __post_init__(self):
        for name in ("preictal_span", "interictal_margin", "seizure_merge_gap",
                     "window_seconds"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"labeling.{name} must be positive")
        if self.sph < 0:
            raise ValidationError("labeling.sph must be non-negative")
        if self.mode not in ("continuous", "pre_segmented"):
            raise ValidationError(f"labeling.mode must be continuous|pre_segmented, got {self.mode!r}")


@dataclass
class SegmentLabeling:
    preictal_intervals: list
    interictal_intervals: list
    config: LabelingConfig
    seizures: list = field(default_factory=list)
    n_raw_seizures: int = 0
    recorded_seconds: float = 0.0
    timeline_seconds: float = 0.0
    truncated_preictal: list = field(default_factory=list)
    status: str = "ok"
    warnings: list = field(default_factory=list)

    @property
    def interictal_hours(self) -> float:
        return sum(iv.duration for iv in self.interictal_intervals) / HOUR

    @property
    def preictal_seconds(self) -> float:
        return sum(iv.duration for iv in self.preictal_intervals)

    def preictal_for(self, seizure: int) -> list:
        return [iv for iv in self.preictal_intervals if iv.seizure == seizure]


def merge_leading_seizures(events: Sequence[SeizureEvent], gap: float) -> list:
    """Collapse seizure clusters into their leading seizure.

    A seizure starting less than ``gap`` seconds after the previous onset joins
    that cluster; the merged event keeps the first onset and the last offset.
    """
    events = list(events)
    for a, b in zip(events, events[1:]):
        if b.onset < a.onset:
            raise ValidationError("seizure events must be ordered by onset")
    merged = []
    prev_onset = None
    for ev in events:
        if merged and ev.onset - prev_onset < gap:
            last = merged[-1]
            merged[-1] = SeizureEvent(last.onset, max(last.offset, ev.offset), True)
        else:
            merged.append(SeizureEvent(ev.onset, ev.offset, True))
        prev_onset = ev.onset
    return merged


# -- interval arithmetic --------------------------------------------------

def merge_intervals(ivs: Iterable) -> list:
    out = []
    for s, e in sorted((iv[0], iv[1]) for iv in ivs if iv[1] > iv[0]):
        if out and s <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], e))
        else:
            out.append((s, e))
    return out


def subtract_intervals(base: Iterable, cut: Iterable) -> list:
    cut = merge_intervals(cut)
    out = []
    for s, e in merge_intervals(base):
        cur = s
        for cs, ce in cut:
            if ce <= cur or cs >= e:
                continue
            if cs > cur:
                out.append((cur, cs))
            cur = max(cur, ce)
            if cur >= e:
                break
        if cur < e:
            out.append((cur, e))
    return out


def intersect_intervals(a: Iterable, b: Iterable) -> list:
    a, b = merge_intervals(a), merge_intervals(b)
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        s, e = max(a[i][0], b[j][0]), min(a[i][1], b[j][1])
        if s < e:
            out.append((s, e))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


# -- labeling -------------------------------------------------------------

def label_timeline(spans: Sequence, events: Sequence[SeizureEvent],
                   cfg: LabelingConfig) -> SegmentLabeling:
    """Label a timeline covered by recording ``spans``.

    ``events`` are raw seizures on the same time base as ``spans``.  Preictal
    spans end ``cfg.sph`` before each leading onset and reach back
    ``cfg.preictal_span``, cut at the previous seizure's offset and at gaps in
    the recording.  Interictal spans are the recording minus
    ``[onset - margin, offset + margin]`` around every seizure.
    """
    coverage = merge_intervals(spans)
    recorded = sum(e - s for s, e in coverage)
    timeline = coverage[-1][1] - coverage[0][0] if coverage else 0.0
    events = sorted(events, key=lambda ev: (ev.onset, ev.offset))
    leading = merge_leading_seizures(events, cfg.seizure_merge_gap)
    lab = SegmentLabeling([], [], cfg, leading, len(events), recorded, timeline)

    if recorded < cfg.window_seconds:
        lab.status = "too_short"
        lab.warnings.append(
            f"recording covers {recorded:.1f} s, shorter than one "
            f"{cfg.window_seconds:g} s window")
        log.warning(lab.warnings[-1])
        return lab

    for i, sz in enumerate(leading):
        end = sz.onset - cfg.sph
        start = end - cfg.preictal_span
        if i > 0:
            start = max(start, leading[i - 1].offset)
        pieces = intersect_intervals([(start, end)], coverage) if end > start else []
        got = sum(e - s for s, e in pieces)
        if got < cfg.preictal_span - 1e-9:
            lab.truncated_preictal.append(i)
        lab.preictal_intervals.extend(Interval(s, e, i) for s, e in pieces)

    # preictal spans are excluded too, which matters only when the margin is
    # shorter than SPH + preictal span
    exclusion = [(ev.onset - cfg.interictal_margin, ev.offset + cfg.interictal_margin)
                 for ev in leading] + [(iv.start, iv.end) for iv in lab.preictal_intervals]
    lab.interictal_intervals = [Interval(s, e) for s, e in
                                subtract_intervals(coverage, exclusion)]
    return lab


def label_segments(record: EegRecord, cfg: LabelingConfig) -> SegmentLabeling:
    """Label a single continuous record; times are seconds from record start."""
    return label_timeline([(0.0, record.duration)], record.annotations, cfg)


def label_subject(records: Sequence[EegRecord], cfg: LabelingConfig) -> SegmentLabeling:
    """Label a subject split across several records, in absolute time."""
    spans, events = [], []
    for rec in records:
        span = rec.absolute_span()
        spans.append((span.start, span.end))
        events.extend(ev.shifted(span.start) for ev in rec.annotations)
    return label_timeline(spans, events, cfg)


# -- eligibility ----------------------------------------------------------

@dataclass(frozen=True)
class Eligibility:
    subject: str
    n_leading: int
    interictal_hours: float
    seizures_per_day: float
    eligible: bool
    reasons: tuple = ()


def eligibility_check(labelings: Mapping[str, SegmentLabeling],
                      cfg: Optional[LabelingConfig] = None) -> list:
    """Per-subject leading-seizure count, interictal hours and exclusion flags.

    Seizure frequency is raw seizures per day of timeline, with the timeline
    floored at one day so short recordings are not extrapolated.
    """
    out = []
    for subject in sorted(labelings):
        lab = labelings[subject]
        c = cfg or lab.config
        n_lead = len(lab.seizures)
        hours = lab.interictal_hours
        per_day = lab.n_raw_seizures / max(lab.timeline_seconds / DAY, 1.0)
        reasons = []
        if n_lead < c.min_leading_seizures:
            reasons.append(f"{n_lead} leading seizures < {c.min_leading_seizures}")
        if hours < c.min_interictal_hours:
            reasons.append(f"{hours:.1f} interictal hours < {c.min_interictal_hours:g}")
        if per_day >= c.max_seizures_per_day:
            reasons.append(f"{per_day:.1f} seizures/day >= {c.max_seizures_per_day:g}")
        if lab.status != "ok":
            reasons.append(lab.status)
        out.append(Eligibility(subject, n_lead, hours, per_day, not reasons, tuple(reasons)))
    return out
