"""Per-subject manifests and subject loading.

A dataset directory holds one sub-directory per subject, each with a
``manifest.json``::

    {
      "subject": "S01",
      "mode": "continuous",            # or "pre_segmented"
      "powerline_hz": 50,              # 50 or 60
      "records": [{"path": "rec000.eeg"}, ...]
    }

In ``pre_segmented`` mode each record entry also carries ``label``
(``"preictal"``/``"interictal"``), ``segment_id`` and, for preictal
segments, ``sequence`` (the lead seizure it precedes) and optionally
``onset`` (absolute seizure onset in seconds).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ValidationError
from .container import read_record
from .labeling import LabelingConfig, SegmentLabeling, label_subject
from .records import EegRecord, Interval, SeizureEvent

MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True, eq=False)
class Segment:
    record: EegRecord
    label: str
    segment_id: str
    sequence: Optional[int] = None
    onset: Optional[float] = None


@dataclass(eq=False)
class SegmentedRecord:
    """Fixed-length pre-cut segments (Kaggle style)."""

    segments: list
    segment_duration: float = 600.0

    def __post_init__(self):
        if not self.segments:
            return
        ref = self.segments[0].record
        for seg in self.segments:
            rec = seg.record
            if seg.label not in ("preictal", "interictal"):
                raise ValidationError(f"segment {seg.segment_id}: bad label {seg.label!r}")
            if abs(rec.duration - self.segment_duration) > 1.0 / rec.sampling_rate:
                raise ValidationError(
                    f"segment {seg.segment_id} lasts {rec.duration} s, "
                    f"expected {self.segment_duration} s")
            if rec.sampling_rate != ref.sampling_rate or rec.channel_names != ref.channel_names:
                raise ValidationError(
                    f"segment {seg.segment_id} channel set or rate differs from the first segment")


def label_presegmented(seg: SegmentedRecord, cfg: LabelingConfig) -> SegmentLabeling:
    """Each segment becomes its own interval, so windows never straddle segments."""
    sequences = sorted({s.sequence for s in seg.segments if s.label == "preictal"})
    seq_index = {q: i for i, q in enumerate(sequences)}
    seizures = []
    for q in sequences:
        members = [s for s in seg.segments if s.label == "preictal" and s.sequence == q]
        onsets = [s.onset for s in members if s.onset is not None]
        if onsets:
            onset = onsets[0]
        else:
            onset = max(s.record.absolute_span().end for s in members) + cfg.sph
        seizures.append(SeizureEvent(onset, onset + 1.0, True))
    pre, inter = [], []
    for s in seg.segments:
        span = s.record.absolute_span()
        if s.label == "preictal":
            pre.append(Interval(span.start, span.end, seq_index[s.sequence]))
        else:
            inter.append(Interval(span.start, span.end))
    pre.sort()
    inter.sort()
    total = sum(iv.duration for iv in pre + inter)
    starts = [iv.start for iv in pre + inter]
    ends = [iv.end for iv in pre + inter]
    timeline = (max(ends) - min(starts)) if starts else 0.0
    return SegmentLabeling(pre, inter, cfg, seizures, len(seizures), total, timeline)


@dataclass(eq=False)
class Subject:
    name: str
    mode: str
    powerline_hz: int
    records: list = field(default_factory=list)
    segments: Optional[SegmentedRecord] = None
    path: Optional[Path] = None

    @property
    def all_records(self) -> list:
        if self.mode == "pre_segmented":
            return [s.record for s in self.segments.segments]
        return list(self.records)

    @property
    def sampling_rate(self) -> int:
        return self.all_records[0].sampling_rate

    @property
    def n_channels(self) -> int:
        return self.all_records[0].n_channels

    def labeling(self, cfg: LabelingConfig) -> SegmentLabeling:
        if self.mode == "pre_segmented":
            return label_presegmented(self.segments, cfg)
        return label_subject(self.records, cfg)

    def samples_at(self, start: float, duration: float) -> np.ndarray:
        """Samples of ``duration`` seconds starting at absolute time ``start``.

        The span may cross the boundary between back-to-back records.
        """
        fs = self.sampling_rate
        need = int(round(duration * fs))
        stop = start + duration
        parts, cursor = [], start
        for rec in self.all_records:
            span = rec.absolute_span()
            if span.end <= cursor + 0.5 / fs or span.start >= stop - 0.5 / fs:
                continue
            if span.start > cursor + 0.5 / fs:
                break                      # gap before this record
            off = cursor - span.start
            take = min(stop, span.end) - cursor
            parts.append(rec.slice_seconds(off, off + take))
            cursor += take
            if cursor >= stop - 0.5 / fs:
                break
        got = sum(p.shape[1] for p in parts)
        if abs(got - need) > 1 or not parts:
            raise ValidationError(
                f"subject {self.name}: recordings do not cover [{start}, {stop}) s")
        out = parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)
        return out[:, :need] if got >= need else np.pad(out, ((0, 0), (0, need - got)), "edge")


def _check_manifest(m: dict, where) -> None:
    for key in ("subject", "mode", "powerline_hz", "records"):
        if key not in m:
            raise ValidationError(f"{where}: manifest missing '{key}'")
    if m["mode"] not in ("continuous", "pre_segmented"):
        raise ValidationError(f"{where}: mode must be continuous|pre_segmented")
    if m["powerline_hz"] not in (50, 60):
        raise ValidationError(f"{where}: powerline_hz must be 50 or 60")


def write_manifest(directory, subject: str, mode: str, powerline_hz: int,
                   records: list) -> Path:
    m = {"subject": subject, "mode": mode, "powerline_hz": int(powerline_hz),
         "records": records}
    _check_manifest(m, directory)
    path = Path(directory) / MANIFEST_NAME
    path.write_text(json.dumps(m, indent=2, sort_keys=True) + "\n")
    return path


def load_subject(manifest_path) -> Subject:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    m = json.loads(manifest_path.read_text())
    _check_manifest(m, manifest_path)
    base = manifest_path.parent
    subj = Subject(m["subject"], m["mode"], int(m["powerline_hz"]), path=manifest_path)
    if m["mode"] == "continuous":
        subj.records = [read_record(base / r["path"]) for r in m["records"]]
        subj.records.sort(key=lambda r: r.absolute_span().start)
    else:
        segs = []
        for r in m["records"]:
            segs.append(Segment(read_record(base / r["path"]), r["label"],
                                str(r.get("segment_id", r["path"])),
                                r.get("sequence"), r.get("onset")))
        segs.sort(key=lambda s: s.record.absolute_span().start)
        dur = segs[0].record.duration if segs else 600.0
        subj.segments = SegmentedRecord(segs, dur)
    return subj


def discover_subjects(data_dir) -> list:
    """Subject names (directory names holding a manifest), sorted."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise ValidationError(f"data directory {data_dir} does not exist")
    return sorted(p.parent.name for p in data_dir.glob(f"*/{MANIFEST_NAME}"))


def subject_path(data_dir, name: str) -> Path:
    return Path(data_dir) / name / MANIFEST_NAME


def relpath(path, start) -> str:
    return os.path.relpath(path, start)
