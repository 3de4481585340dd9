import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_record
from szpred.errors import (ChannelCountError, FormatError, TruncationError, ValidationError,
                           VersionError)
from szpred.signal_io import (DatasetSpec, EegRecord, LabelingConfig, Segment, SegmentedRecord,
                              SeizureEvent, SubjectPlan, SyntheticSpec, decode_record,
                              discover_subjects, eligibility_check, encode_record,
                              generate_synthetic, label_presegmented, label_segments,
                              label_subject, label_timeline, load_subject,
                              merge_leading_seizures, read_record, synthesize_dataset,
                              write_record)
from szpred.signal_io.container import MAGIC

H = 3600.0


# -- records ----------------------------------------------------------------

def test_record_rejects_nonfinite_samples():
    x = np.zeros((2, 100), np.float32)
    x[1, 5] = np.nan
    with pytest.raises(ValidationError, match="non-finite"):
        EegRecord(("a", "b"), 10, x)


def test_record_rejects_channel_mismatch_and_bad_rate():
    with pytest.raises(ValidationError):
        EegRecord(("a",), 10, np.zeros((2, 10)))
    with pytest.raises(ValidationError):
        EegRecord(("a",), 0, np.zeros((1, 10)))
    with pytest.raises(ValidationError):
        EegRecord(("a",), 12.5, np.zeros((1, 10)))


def test_record_annotations_must_be_ordered_and_inside():
    x = np.zeros((1, 1000), np.float32)
    with pytest.raises(ValidationError, match="time-ordered"):
        EegRecord(("a",), 10, x, 0.0, (SeizureEvent(50, 60), SeizureEvent(10, 20)))
    with pytest.raises(ValidationError, match="outside"):
        EegRecord(("a",), 10, x, 0.0, (SeizureEvent(90, 120),))


def test_seizure_event_offset_after_onset():
    with pytest.raises(ValidationError):
        SeizureEvent(10.0, 10.0)


def test_record_samples_are_read_only_copy():
    x = np.ones((1, 10), np.float32)
    rec = EegRecord(("a",), 10, x)
    x[0, 0] = 5
    assert rec.samples[0, 0] == 1
    with pytest.raises(ValueError):
        rec.samples[0, 0] = 2


# -- merging and labeling -------------------------------------------------------

def _ev(*onsets, dur=60.0):
    return [SeizureEvent(o, o + dur) for o in onsets]


def test_merge_close_onsets():
    out = merge_leading_seizures(_ev(100, 1500), 1800)
    assert len(out) == 1
    assert out[0].onset == 100 and out[0].offset == 1560 and out[0].is_leading


def test_merge_single_event_unchanged():
    out = merge_leading_seizures(_ev(500), 1800)
    assert [(e.onset, e.offset) for e in out] == [(500, 560)]


def test_merge_far_onsets_kept():
    out = merge_leading_seizures(_ev(0, 2000, 4000), 1800)
    assert [e.onset for e in out] == [0, 2000, 4000]


def test_merge_chain_uses_consecutive_gaps():
    # each gap below 1800 s, so the chain collapses even though it spans 3000 s
    out = merge_leading_seizures(_ev(0, 1500, 3000), 1800)
    assert len(out) == 1 and out[0].offset == 3060


def test_merge_rejects_unordered():
    with pytest.raises(ValidationError):
        merge_leading_seizures(_ev(2000, 100), 1800)


def test_label_one_seizure_in_ten_hours():
    cfg = LabelingConfig()
    lab = label_timeline([(0, 10 * H)], [SeizureEvent(5 * H, 5 * H + 60)], cfg)
    spans = [(iv.start, iv.end) for iv in lab.interictal_intervals]
    # 4 h margins around [5 h, 5 h + 60 s] leave [0, 1 h) and [9 h + 60 s, 10 h)
    assert spans == [(0.0, 1 * H), (9 * H + 60, 10 * H)]
    pre = lab.preictal_intervals
    assert [(iv.start, iv.end, iv.seizure) for iv in pre] == [(5 * H - 2100, 5 * H - 300, 0)]


def test_label_tail_interictal_after_seizure():
    cfg = LabelingConfig()
    lab = label_timeline([(0, 12 * H)], [SeizureEvent(5 * H, 5 * H + 60)], cfg)
    spans = [(iv.start, iv.end) for iv in lab.interictal_intervals]
    assert spans == [(0.0, 1 * H), (9 * H + 60, 12 * H)]


def test_label_no_seizures():
    rec = make_record(duration=600)
    lab = label_segments(rec, LabelingConfig())
    assert lab.preictal_intervals == []
    assert [(iv.start, iv.end) for iv in lab.interictal_intervals] == [(0.0, 600.0)]


def test_label_early_seizure_clipped_to_record_start():
    rec = make_record(duration=1200, seizures=[(600, 660)])
    lab = label_segments(rec, LabelingConfig())
    pre = lab.preictal_intervals
    assert [(iv.start, iv.end) for iv in pre] == [(0.0, 300.0)]
    assert lab.truncated_preictal == [0]


def test_label_preictal_truncated_at_previous_offset():
    cfg = LabelingConfig()
    ev = [SeizureEvent(3000, 3100), SeizureEvent(5000, 5060)]
    lab = label_timeline([(0, 20000)], ev, cfg)
    second = lab.preictal_for(1)
    assert [(iv.start, iv.end) for iv in second] == [(3100.0, 4700.0)]
    assert 1 in lab.truncated_preictal


def test_label_preictal_cut_at_recording_gap():
    cfg = LabelingConfig()
    spans = [(0, 10000), (10500, 20000)]
    lab = label_timeline(spans, [SeizureEvent(12000, 12060)], cfg)
    got = [(iv.start, iv.end) for iv in lab.preictal_for(0)]
    assert got == [(9900.0, 10000.0), (10500.0, 11700.0)]


def test_label_too_short_record_warns():
    rec = make_record(duration=20)
    lab = label_segments(rec, LabelingConfig())
    assert lab.status == "too_short" and lab.warnings
    assert lab.interictal_intervals == [] and lab.preictal_intervals == []


def test_labeling_config_validation():
    with pytest.raises(ValidationError):
        LabelingConfig(preictal_span=0)
    with pytest.raises(ValidationError):
        LabelingConfig(mode="other")


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(0, 40 * H), min_size=0, max_size=8),
       st.floats(100, 4000), st.floats(0.5 * H, 5 * H))
def test_labeling_intervals_disjoint(onsets, span, margin):
    onsets = sorted(onsets)
    events = [SeizureEvent(o, o + 30) for o in onsets]
    cfg = LabelingConfig(preictal_span=span, interictal_margin=margin)
    lab = label_timeline([(0, 40 * H + 100)], events, cfg)
    pre = sorted((iv.start, iv.end) for iv in lab.preictal_intervals)
    inter = sorted((iv.start, iv.end) for iv in lab.interictal_intervals)
    for ivs in (pre, inter):
        for (a0, b0), (a1, b1) in zip(ivs, ivs[1:]):
            assert b0 <= a1
        for a, b in ivs:
            assert 0 <= a < b <= 40 * H + 100
    for a, b in pre:
        for c, d in inter:
            assert b <= c or d <= a
    for ev in lab.seizures:
        for c, d in inter:
            assert d <= ev.onset - margin + 1e-6 or c >= ev.offset + margin - 1e-6


# -- eligibility ------------------------------------------------------------

def _lab_with(n_seizures, inter_hours, total_hours=None):
    cfg = LabelingConfig()
    onsets = [inter_hours * H + 4 * H + i * 2 * H for i in range(n_seizures)]
    end = (onsets[-1] + 5 * H) if onsets else inter_hours * H
    if total_hours:
        end = total_hours * H
    return label_timeline([(0, end)], [SeizureEvent(o, o + 60) for o in onsets], cfg)


def test_eligible_subject():
    e = eligibility_check({"p1": _lab_with(4, 24)})[0]
    assert e.eligible and e.n_leading == 4 and e.interictal_hours >= 24


def test_two_seizures_ineligible():
    e = eligibility_check({"p1": _lab_with(2, 24)})[0]
    assert not e.eligible and "leading" in e.reasons[0]


def test_too_little_interictal_ineligible():
    e = eligibility_check({"p1": _lab_with(4, 2)})[0]
    assert not e.eligible


def test_twelve_seizures_a_day_excluded():
    cfg = LabelingConfig()
    onsets = [i * 7200.0 + 100 for i in range(12)]
    lab = label_timeline([(0, 24 * H)], [SeizureEvent(o, o + 60) for o in onsets], cfg)
    e = eligibility_check({"p": lab})[0]
    assert e.seizures_per_day == pytest.approx(12.0)
    assert not e.eligible and any("seizures/day" in r for r in e.reasons)


# -- container --------------------------------------------------------------

def test_container_round_trip(tmp_path):
    rec = make_record(duration=10, fs=128, n_channels=3, seizures=[(2, 4)], start_time=123.5)
    write_record(rec, tmp_path / "r.eeg")
    back = read_record(tmp_path / "r.eeg")
    assert back.samples.tobytes() == rec.samples.tobytes()
    assert back.channels == rec.channels
    assert back.sampling_rate == 128 and back.start_time == 123.5
    assert [(e.onset, e.offset) for e in back.annotations] == [(2, 4)]


def test_container_bad_magic():
    buf = bytearray(encode_record(make_record(duration=1)))
    buf[:8] = b"NOTMAGIC"
    with pytest.raises(FormatError):
        decode_record(bytes(buf))


def test_container_bad_version():
    buf = bytearray(encode_record(make_record(duration=1)))
    buf[len(MAGIC)] = 9
    with pytest.raises(VersionError):
        decode_record(bytes(buf))


def test_container_truncated():
    buf = encode_record(make_record(duration=1))
    with pytest.raises(TruncationError):
        decode_record(buf[:-10])
    with pytest.raises(TruncationError):
        decode_record(buf[:12])


def test_container_channel_count_mismatch():
    rec = make_record(duration=1, n_channels=2)
    buf = encode_record(rec) + rec.samples[0].astype("<f4").tobytes()
    with pytest.raises(ChannelCountError, match="3 channels"):
        decode_record(buf)


def test_container_errors_are_distinct():
    kinds = {FormatError, VersionError, TruncationError, ChannelCountError}
    assert len(kinds) == 4
    for a in kinds:
        for b in kinds - {a}:
            assert not issubclass(a, b)


# -- synthetic --------------------------------------------------------------

def _band_power(x, fs, lo, hi):
    f = np.fft.rfftfreq(x.shape[-1], 1 / fs)
    p = np.abs(np.fft.rfft(x, axis=-1)) ** 2
    return p[..., (f >= lo) & (f < hi)].sum()


def test_synthetic_planted_boost():
    spec = SyntheticSpec(n_channels=1, duration=6000, seizures=((5000, 5060),),
                         signature_boost=0.5, powerline_uv=0, seed=3)
    rec = generate_synthetic(spec)
    fs = rec.sampling_rate
    pre = rec.slice_seconds(3000, 4900)
    base = rec.slice_seconds(200, 2100)
    ratio = _band_power(pre, fs, 13, 19) / _band_power(base, fs, 13, 19)
    assert 1.35 < ratio < 1.7
    off = _band_power(pre, fs, 30, 60) / _band_power(base, fs, 30, 60)
    assert 0.9 < off < 1.1


def test_synthetic_null_has_no_boost():
    spec = SyntheticSpec(n_channels=1, duration=6000, seizures=((5000, 5060),),
                         signature_boost=0.0, powerline_uv=0, seed=3)
    rec = generate_synthetic(spec)
    ratio = (_band_power(rec.slice_seconds(3000, 4900), 256, 13, 19)
             / _band_power(rec.slice_seconds(200, 2100), 256, 13, 19))
    assert 0.9 < ratio < 1.1


def test_synthetic_is_deterministic():
    spec = SyntheticSpec(duration=60, seed=5)
    assert generate_synthetic(spec).samples.tobytes() == generate_synthetic(spec).samples.tobytes()


def test_synthetic_band_above_nyquist_rejected():
    with pytest.raises(ValidationError, match="signature_band"):
        generate_synthetic(SyntheticSpec(signature_band=(100.0, 200.0)))


def _small_dataset(mode="continuous", n_seizures=4, inter_hours=3.2):
    plan = SubjectPlan("A", n_seizures=n_seizures, interictal_hours=inter_hours,
                       seizure_spacing=2400, lead_in=2400, mode=mode)
    return DatasetSpec(subjects=(plan,), n_channels=1, sampling_rate=64,
                       noise_band=(0.5, 30.0), signature_band=(12.0, 20.0), powerline_hz=60,
                       powerline_uv=0.0)


def test_synthesize_dataset_layout(tmp_path):
    names = synthesize_dataset(_small_dataset(), tmp_path)
    assert names == ["A"] and discover_subjects(tmp_path) == ["A"]
    subj = load_subject(tmp_path / "A")
    lab = subj.labeling(LabelingConfig())
    e = eligibility_check({"A": lab})[0]
    assert e.eligible, e.reasons
    assert e.n_leading == 4 and len(lab.preictal_intervals) == 4
    assert e.interictal_hours == pytest.approx(3.2)
    # preictal windows span full 30 min and never touch interictal data
    assert all(iv.duration == pytest.approx(1800) for iv in lab.preictal_intervals)


def test_samples_at_crosses_back_to_back_records():
    a = make_record(duration=10, fs=10, n_channels=1, start_time=100.0, seed=1)
    b = make_record(duration=10, fs=10, n_channels=1, start_time=110.0, seed=2)
    from szpred.signal_io import Subject
    s = Subject("x", "continuous", 50, [a, b])
    got = s.samples_at(105.0, 10.0)
    want = np.concatenate([a.samples[:, 50:], b.samples[:, :50]], axis=1)
    np.testing.assert_array_equal(got, want)
    with pytest.raises(ValidationError):
        Subject("x", "continuous", 50, [a]).samples_at(105.0, 10.0)


def test_presegmented_dataset(tmp_path):
    synthesize_dataset(_small_dataset("pre_segmented"), tmp_path)
    subj = load_subject(tmp_path / "A")
    assert subj.mode == "pre_segmented"
    segs = subj.segments.segments
    assert {s.label for s in segs} == {"preictal", "interictal"}
    assert all(s.record.duration == pytest.approx(600) for s in segs)
    lab = subj.labeling(LabelingConfig(mode="pre_segmented"))
    assert len(lab.seizures) == 4
    assert all(iv.duration == pytest.approx(600) for iv in lab.preictal_intervals)
    # each 30-min preictal span yields three 10-min segments
    assert len(lab.preictal_intervals) == 12


def test_segmented_record_requires_equal_duration():
    a = make_record(duration=600, fs=8, n_channels=1)
    b = make_record(duration=300, fs=8, n_channels=1)
    with pytest.raises(ValidationError, match="lasts"):
        SegmentedRecord([Segment(a, "interictal", "a"), Segment(b, "interictal", "b")])


def test_label_presegmented_infers_onset():
    a = make_record(duration=600, fs=8, n_channels=1, start_time=0.0)
    b = make_record(duration=600, fs=8, n_channels=1, start_time=600.0)
    seg = SegmentedRecord([Segment(a, "preictal", "a", sequence=7),
                           Segment(b, "preictal", "b", sequence=7)])
    lab = label_presegmented(seg, LabelingConfig())
    assert len(lab.seizures) == 1 and lab.seizures[0].onset == 1200 + 300
    assert [iv.seizure for iv in lab.preictal_intervals] == [0, 0]


def test_label_subject_uses_absolute_time():
    a = make_record(duration=100, fs=4, n_channels=1, start_time=1000.0, seizures=[(50, 60)])
    lab = label_subject([a], LabelingConfig(preictal_span=30, sph=10))
    assert lab.seizures[0].onset == 1050
    assert [(iv.start, iv.end) for iv in lab.preictal_intervals] == [(1010.0, 1040.0)]
