"""Synthetic EEG with a planted preictal spectral signature.

Background activity is band-limited Gaussian noise plus a power-line tone.
Inside ``signature_lead`` seconds before each onset, extra noise limited to
``signature_band`` raises the power in that band by ``signature_boost``
(0.5 means +50 %).  Seizures themselves carry a 3 Hz rhythm.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import signal as sps

from ..errors import ValidationError
from .container import write_record
from .labeling import LabelingConfig
from .manifest import write_manifest
from .records import ChannelInfo, EegRecord, SeizureEvent

# 2017-01-02 00:00:00 UTC
DEFAULT_EPOCH = 1483315200.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of one synthetic record (times in seconds, amplitudes in uV)."""

    n_channels: int = 2
    sampling_rate: int = 256
    duration: float = 3600.0
    seizures: tuple = ()
    signature_band: tuple = (12.0, 20.0)
    signature_boost: float = 0.5
    signature_lead: float = 2100.0
    noise_uv: float = 20.0
    noise_band: tuple = (0.5, 100.0)
    powerline_hz: float = 50.0
    powerline_uv: float = 10.0
    ictal_uv: float = 60.0
    start_time: float = DEFAULT_EPOCH
    seed: int = 0

    def validate(self) -> None:
        nyq = self.sampling_rate / 2.0
        if self.n_channels < 1:
            raise ValidationError("n_channels must be >= 1")
        if self.sampling_rate <= 0:
            raise ValidationError("sampling_rate must be positive")
        if self.duration <= 0:
            raise ValidationError("duration must be positive")
        lo, hi = self.signature_band
        if not 0 < lo < hi:
            raise ValidationError(f"signature_band {self.signature_band} must satisfy 0 < low < high")
        if hi >= nyq:
            raise ValidationError(
                f"signature_band upper edge {hi} Hz is not below Nyquist ({nyq} Hz)")
        nlo, nhi = self.noise_band
        if not 0 < nlo < nhi:
            raise ValidationError(f"noise_band {self.noise_band} must satisfy 0 < low < high")
        if self.signature_boost < 0:
            raise ValidationError("signature_boost must be non-negative")
        if self.powerline_hz >= nyq and self.powerline_uv > 0:
            raise ValidationError(f"powerline_hz {self.powerline_hz} is not below Nyquist")
        for on, off in self.seizures:
            if not 0 <= on < off <= self.duration:
                raise ValidationError(f"seizure ({on}, {off}) outside [0, {self.duration}]")


def _bandpass(lo: float, hi: float, fs: float):
    nyq = fs / 2.0
    hi = min(hi, 0.95 * nyq)
    return sps.butter(4, [lo / nyq, hi / nyq], btype="bandpass", output="sos")


def _noise_gain(sos) -> float:
    # RMS of the filter output for unit white noise
    imp = np.zeros(1 << 14)
    imp[0] = 1.0
    return float(np.sqrt(np.sum(sps.sosfilt(sos, imp) ** 2)))


def generate_synthetic(spec: SyntheticSpec) -> EegRecord:
    spec.validate()
    fs = spec.sampling_rate
    n = int(round(spec.duration * fs))
    rng = np.random.default_rng(spec.seed)
    t = np.arange(n) / fs

    bg_sos = _bandpass(*spec.noise_band, fs)
    scale = spec.noise_uv / _noise_gain(bg_sos)
    sig_sos = _bandpass(*spec.signature_band, fs)
    warm = int(2 * fs)

    out = np.empty((spec.n_channels, n), dtype=np.float32)
    for ch in range(spec.n_channels):
        x = scale * sps.sosfilt(bg_sos, rng.standard_normal(n + warm))[warm:]
        if spec.powerline_uv > 0:
            x += spec.powerline_uv * np.sin(2 * np.pi * spec.powerline_hz * t
                                            + rng.uniform(0, 2 * np.pi))
        for on, off in spec.seizures:
            i0 = max(int(round((on - spec.signature_lead) * fs)), 0)
            i1 = int(round(on * fs))
            extra = rng.standard_normal(i1 - i0 + warm)
            if spec.signature_boost > 0 and i1 > i0:
                x[i0:i1] += (scale * np.sqrt(spec.signature_boost)
                             * sps.sosfilt(sig_sos, extra)[warm:])
            j1 = min(int(round(off * fs)), n)
            tt = t[i1:j1] - on
            x[i1:j1] += spec.ictal_uv * (np.sin(2 * np.pi * 3 * tt)
                                         + 0.5 * np.sin(2 * np.pi * 6 * tt))
        out[ch] = x
    chans = tuple(ChannelInfo(f"ch{i + 1}") for i in range(spec.n_channels))
    events = tuple(SeizureEvent(on, off) for on, off in spec.seizures)
    return EegRecord(chans, fs, out, spec.start_time, events)


@dataclass(frozen=True)
class SubjectPlan:
    """Layout of one synthetic subject: an interictal record, then a gap,
    then a record holding evenly spaced seizures."""

    name: str = "S01"
    n_seizures: int = 4
    interictal_hours: float = 6.0
    seizure_spacing: float = 3600.0
    seizure_duration: float = 60.0
    lead_in: float = 2700.0
    tail: float = 900.0
    signature_boost: float = 0.5
    mode: str = "continuous"
    start_offset_hours: float = 0.0

    def validate(self) -> None:
        if self.n_seizures < 1:
            raise ValidationError("n_seizures must be >= 1")
        if self.interictal_hours <= 0:
            raise ValidationError("interictal_hours must be positive")
        if self.mode not in ("continuous", "pre_segmented"):
            raise ValidationError(f"mode must be continuous|pre_segmented, got {self.mode!r}")


@dataclass(frozen=True)
class DatasetSpec:
    subjects: tuple = field(default_factory=lambda: tuple(
        SubjectPlan(f"S{i + 1:02d}", start_offset_hours=5.0 * i) for i in range(3)))
    n_channels: int = 2
    sampling_rate: int = 256
    signature_band: tuple = (12.0, 20.0)
    signature_lead: float = 2100.0
    noise_uv: float = 20.0
    noise_band: tuple = (0.5, 100.0)
    powerline_hz: int = 50
    powerline_uv: float = 10.0
    segment_seconds: float = 600.0
    seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown synth spec keys: {sorted(unknown)}")
        d = dict(d)
        if "subjects" in d:
            plan_keys = {f.name for f in fields(SubjectPlan)}
            subs = []
            for s in d["subjects"]:
                bad = set(s) - plan_keys
                if bad:
                    raise ValidationError(f"unknown subject keys: {sorted(bad)}")
                subs.append(SubjectPlan(**s))
            d["subjects"] = tuple(subs)
        for key in ("signature_band", "noise_band"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


def _record_specs(ds: DatasetSpec, plan: SubjectPlan, index: int,
                  margin: float) -> list:
    base = dict(n_channels=ds.n_channels, sampling_rate=ds.sampling_rate,
                signature_band=ds.signature_band, signature_boost=plan.signature_boost,
                signature_lead=ds.signature_lead, noise_uv=ds.noise_uv,
                noise_band=ds.noise_band, powerline_hz=ds.powerline_hz,
                powerline_uv=ds.powerline_uv)
    seq = np.random.SeedSequence([ds.seed, index])
    seeds = [int(s.generate_state(1)[0]) for s in seq.spawn(2)]
    t0 = DEFAULT_EPOCH + plan.start_offset_hours * 3600.0
    inter_dur = plan.interictal_hours * 3600.0
    inter = SyntheticSpec(duration=inter_dur, start_time=t0, seed=seeds[0], **base)
    onsets = [plan.lead_in + i * plan.seizure_spacing for i in range(plan.n_seizures)]
    seizures = tuple((o, o + plan.seizure_duration) for o in onsets)
    ictal_dur = onsets[-1] + plan.seizure_duration + plan.tail
    gap = max(margin - plan.lead_in, 0.0) + 600.0
    ictal = SyntheticSpec(duration=ictal_dur, seizures=seizures,
                          start_time=t0 + inter_dur + gap, seed=seeds[1], **base)
    return [inter, ictal]


def synthesize_dataset(ds: DatasetSpec, out_dir, labeling: Optional[LabelingConfig] = None,
                       subjects: Optional[Sequence[str]] = None) -> list:
    """Write container files and a manifest per subject; returns subject names."""
    labeling = labeling or LabelingConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = []
    for index, plan in enumerate(ds.subjects):
        plan.validate()
        if subjects and plan.name not in subjects:
            continue
        sdir = out_dir / plan.name
        sdir.mkdir(parents=True, exist_ok=True)
        specs = _record_specs(ds, plan, index, labeling.interictal_margin)
        records = [generate_synthetic(s) for s in specs]
        if plan.mode == "continuous":
            entries = []
            for i, rec in enumerate(records):
                fname = f"rec{i:03d}.eeg"
                write_record(rec, sdir / fname)
                entries.append({"path": fname})
        else:
            entries = _write_segments(records, sdir, labeling, ds.segment_seconds)
        write_manifest(sdir, plan.name, plan.mode, ds.powerline_hz, entries)
        names.append(plan.name)
    (out_dir / "synth_spec.json").write_text(
        json.dumps(ds.to_dict(), indent=2, sort_keys=True) + "\n")
    return names


def _write_segments(records, sdir: Path, cfg: LabelingConfig, seg_len: float) -> list:
    """Cut labeled spans into fixed-length segment files."""
    from .labeling import label_subject

    lab = label_subject(records, cfg)
    entries = []

    def cut(start, end, label, seq, onset):
        n = int((end - start + 1e-9) // seg_len)
        # preictal segments are aligned to the end of the span (closest to onset)
        first = end - n * seg_len if label == "preictal" else start
        for j in range(n):
            s = first + j * seg_len
            for rec in records:
                span = rec.absolute_span()
                if span.start <= s and s + seg_len <= span.end + 1e-9:
                    x = rec.slice_seconds(s - span.start, s - span.start + seg_len)
                    seg = EegRecord(rec.channels, rec.sampling_rate, x, s, ())
                    sid = f"{label}_{len(entries):04d}"
                    write_record(seg, sdir / f"{sid}.eeg")
                    entry = {"path": f"{sid}.eeg", "label": label, "segment_id": sid}
                    if seq is not None:
                        entry["sequence"] = seq
                        entry["onset"] = onset
                    entries.append(entry)
                    break

    for iv in lab.preictal_intervals:
        cut(iv.start, iv.end, "preictal", iv.seizure, lab.seizures[iv.seizure].onset)
    for iv in lab.interictal_intervals:
        cut(iv.start, iv.end, "interictal", None, None)
    return entries
