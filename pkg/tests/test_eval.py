import dataclasses
import math

import numpy as np
import pytest
from scipy import stats as sstats

from conftest import make_record
from szpred.cnn import init_model
from szpred.config import EvalConfig, ModelConfig, RunConfig
from szpred.errors import LeakageError, ValidationError
from szpred.eval import (REPORT_COLUMNS, SubjectResult, assert_no_leakage,
                         chance_alarm_probability, evaluate_subject, false_prediction_rate,
                         load_published_tables, make_folds, predicted_count,
                         random_predictor_pvalue, report_csv, report_rows, report_table,
                         score_alarms, seizure_time_histogram, simulate_alarm_probability,
                         simulate_pvalue, task_seed, window_spans, worst_case_pvalue)
from szpred.eval import harness
from szpred.postprocess import AlarmConfig, AlarmStream
from szpred.preprocess import WindowSet, fit_stats, standardize, window_fingerprint
from szpred.signal_io import (DatasetSpec, LabelingConfig, SeizureEvent, SubjectPlan,
                              label_timeline, load_subject, synthesize_dataset)
from szpred.signal_io.records import Interval

H = 3600.0


# -- folds ------------------------------------------------------------------

def _labeling(n_seizures=4, inter_hours=6.0):
    cfg = LabelingConfig()
    onsets = [inter_hours * H + 4 * H + i * 3600.0 for i in range(n_seizures)]
    end = onsets[-1] + 900
    return label_timeline([(0, end)], [SeizureEvent(o, o + 60) for o in onsets], cfg)


def test_make_folds_one_per_seizure_and_partition():
    lab = _labeling()
    plan = make_folds(lab, seed=3)
    assert len(plan) == 4
    assert [f.seizure for f in plan.folds] == [0, 1, 2, 3]
    tests = np.concatenate([f.interictal_test for f in plan.folds])
    assert sorted(tests) == list(range(len(plan.interictal_starts)))
    for f in plan.folds:
        assert set(f.interictal_test).isdisjoint(f.interictal_train)
        assert len(f.interictal_test) + len(f.interictal_train) == len(plan.interictal_starts)
        assert [iv.seizure for iv in f.preictal_test] == [f.seizure]
    total = sum(plan.test_hours(f) for f in plan.folds)
    assert abs(total - lab.interictal_hours) <= 30 / H


def test_make_folds_seeds_differ_same_sizes():
    lab = _labeling()
    a, b = make_folds(lab, seed=1), make_folds(lab, seed=2)
    sa = sorted(len(f.interictal_test) for f in a.folds)
    sb = sorted(len(f.interictal_test) for f in b.folds)
    assert max(sa) - min(sa) <= 1 and sa == sb
    assert any(not np.array_equal(x.interictal_test, y.interictal_test)
               for x, y in zip(a.folds, b.folds))
    c = make_folds(lab, seed=1)
    assert all(np.array_equal(x.interictal_test, y.interictal_test)
               for x, y in zip(a.folds, c.folds))


def test_make_folds_errors():
    with pytest.raises(ValidationError, match="at least 2"):
        make_folds(_labeling(n_seizures=1))
    cfg = LabelingConfig()
    no_inter = label_timeline([(0, 5 * H)], [SeizureEvent(3000, 3060), SeizureEvent(6000, 6060)],
                              cfg)
    with pytest.raises(ValidationError, match="interictal"):
        make_folds(no_inter)


def test_window_spans_merge():
    spans = window_spans([0, 30, 60, 120, 150])
    assert [(s.start, s.end) for s in spans] == [(0, 90), (120, 180)]


# -- scoring ----------------------------------------------------------------

def _alarms(*t):
    t = np.asarray(t, float)
    return AlarmStream(t, t + 2100, np.arange(len(t)))


def test_alarm_ten_minutes_before_onset_predicts():
    s = score_alarms(_alarms(10000 - 600), [10000], [], AlarmConfig())
    assert s.predicted.tolist() == [True] and s.false_alarms == 0


def test_alarm_inside_sph_does_not_predict():
    s = score_alarms(_alarms(10000 - 120), [10000], [], AlarmConfig())
    assert s.predicted.tolist() == [False]


def test_sop_boundaries_inclusive():
    cfg = AlarmConfig()
    assert score_alarms(_alarms(10000 - 300), [10000], [], cfg).n_predicted == 1
    assert score_alarms(_alarms(10000 - 2100), [10000], [], cfg).n_predicted == 1
    assert score_alarms(_alarms(10000 - 2101), [10000], [], cfg).n_predicted == 0


def test_interictal_alarm_is_false_alarm():
    s = score_alarms(_alarms(500, 50000), [10000], [Interval(0, 3600)], AlarmConfig())
    assert s.false_alarms == 1 and s.interictal_hours == 1.0
    # end-inclusive: an alarm stamped at the end of the last window still counts
    s2 = score_alarms(_alarms(3600), [10000], [Interval(0, 3600)], AlarmConfig())
    assert s2.false_alarms == 1


def test_overlapping_spans_rejected():
    with pytest.raises(ValidationError, match="overlap"):
        score_alarms(_alarms(), [], [Interval(0, 100), Interval(50, 200)], AlarmConfig())


def test_zero_sph_dominates(rng):
    # same total horizon: SPH folded into the occurrence period
    for _ in range(200):
        t = np.sort(rng.uniform(0, 20000, rng.integers(0, 8)))
        onsets = np.sort(rng.uniform(0, 22000, 4))
        spans = [Interval(0, 5000)]
        a = score_alarms(_alarms(*t), onsets, spans, AlarmConfig(sph=0, sop=2100))
        b = score_alarms(_alarms(*t), onsets, spans, AlarmConfig(sph=300, sop=1800))
        assert np.all(a.predicted >= b.predicted)
        assert a.false_alarms <= b.false_alarms


def test_false_prediction_rate():
    assert false_prediction_rate(3, 6.0) == 0.5
    with pytest.raises(ValidationError):
        false_prediction_rate(1, 0)


# -- significance --------------------------------------------------------------

def test_chance_alarm_probability_examples():
    assert chance_alarm_probability(0, 0.5) == 0
    assert chance_alarm_probability(0.13, 0.5) == pytest.approx(0.0629, abs=5e-5)
    assert chance_alarm_probability(1e6, 0.5) == pytest.approx(1.0)
    assert chance_alarm_probability(math.inf, 0.5) == 1.0
    with pytest.raises(ValidationError):
        chance_alarm_probability(-0.1, 0.5)


def test_pvalue_examples():
    P19 = chance_alarm_probability(0.16, 0.5)
    assert random_predictor_pvalue(2, 4, P19) == pytest.approx(0.033, abs=0.005)
    P5 = chance_alarm_probability(0.13, 0.5)
    assert random_predictor_pvalue(2, 5, P5) == pytest.approx(0.032, abs=0.005)
    assert random_predictor_pvalue(0, 4, 0.3) == 1.0
    with pytest.raises(ValidationError):
        random_predictor_pvalue(5, 4, 0.1)


def test_pvalue_matches_scipy_binomial_tail(rng):
    for _ in range(300):
        K = int(rng.integers(1, 60))
        k = int(rng.integers(0, K + 1))
        P = float(rng.uniform(0, 1))
        want = sstats.binom.sf(k - 1, K, P)
        assert random_predictor_pvalue(k, K, P) == pytest.approx(want, rel=1e-9, abs=1e-300)


def test_pvalue_monotone():
    K = 10
    for P in (0.01, 0.1, 0.5):
        ps = [random_predictor_pvalue(k, K, P) for k in range(K + 1)]
        assert all(b <= a for a, b in zip(ps, ps[1:]))
    for k in range(K + 1):
        ps = [random_predictor_pvalue(k, K, P) for P in np.linspace(0, 1, 21)]
        assert all(b >= a - 1e-15 for a, b in zip(ps, ps[1:]))


def test_pvalue_tiny_tail_is_stable():
    p = random_predictor_pvalue(200, 200, 1e-4)
    assert p == pytest.approx(math.exp(200 * math.log(1e-4)), rel=1e-9)


def test_worst_case_rule():
    # repeats with (SEN, FPR) = (80 %, 0.1) and (100 %, 0.05), K = 5
    p = worst_case_pvalue([4, 5], [0.1, 0.05], 5, 0.5)
    want = random_predictor_pvalue(4, 5, chance_alarm_probability(0.1, 0.5))
    assert p == want
    assert predicted_count(80, 5) == 4 and predicted_count(33.3, 6) == 2


def test_simulated_pvalue_close_to_formula():
    rng = np.random.default_rng(0)
    sim = simulate_pvalue(2, 4, 0.16, 0.5, 40_000, rng)
    ana = random_predictor_pvalue(2, 4, chance_alarm_probability(0.16, 0.5))
    se = math.sqrt(ana * (1 - ana) / 40_000)
    assert abs(sim - ana) < 4 * se


def test_simulated_alarm_probability_zero_rate():
    assert simulate_alarm_probability(0.0, 0.5, 100, np.random.default_rng(0)) == 0.0


def test_published_fixture_rows():
    rows = load_published_tables()
    assert len(rows) == 33
    assert {r.dataset for r in rows} == {"freiburg", "chbmit", "kaggle"}
    pat19 = next(r for r in rows if r.dataset == "freiburg" and r.subject == "Pat19")
    assert pat19.worst_k == 2 and pat19.recomputed_p() == pytest.approx(0.033, abs=0.005)


# -- subject results and reports ----------------------------------------------------

def _result(name="S01", K=4, pred=(4, 3), fa=(0, 1), hours=6.0):
    return SubjectResult(name, K, hours, list(pred), list(fa), 0.5)


def test_subject_result_averages_and_worst_case():
    r = _result()
    assert r.sen_pct == pytest.approx(87.5) and r.sen_sd == pytest.approx(12.5)
    assert r.fpr == pytest.approx(1 / 12)
    assert r.p_value == worst_case_pvalue([4, 3], [0, 1 / 6], 4, 0.5)


def test_report_rows_total_and_ranges():
    rows = report_rows([_result("S02", 4), _result("S01", 5, (5, 5), (0, 0), 3.0)],
                       {"S03": "ValidationError: boom"})
    assert [r["subject"] for r in rows] == ["S01", "S02", "S03", "Total"]
    assert rows[-1]["n_seizures"] == "9"
    assert rows[2]["status"] == "failed"
    for r in rows[:2]:
        assert 0 <= float(r["sen_pct"]) <= 100 and float(r["fpr"]) >= 0
        assert 0 <= float(r["p_value"]) <= 1
    text = report_csv(rows, "# hdr")
    assert text.splitlines()[1] == ",".join(REPORT_COLUMNS)
    table = report_table(rows)
    assert table.splitlines()[0].split()[:2] == ["Patient", "No."]
    assert "failed" in table and "Total" in table


def test_histogram_single_bin_and_conservation():
    six = 6 * H
    recs = [make_record(duration=60, fs=1, n_channels=1, seizures=[(0, 10)],
                        start_time=six + d * 24 * H) for d in range(5)]
    edges, counts = seizure_time_histogram(recs)
    assert len(edges) == 25 and counts[6] == 5 and counts.sum() == 5
    edges, counts = seizure_time_histogram(recs, bin_hours=3, tz_offset_hours=2)
    assert counts.tolist() == [0, 0, 5, 0, 0, 0, 0, 0]


def test_histogram_merges_clustered_seizures():
    rec = make_record(duration=4000, fs=1, n_channels=1, seizures=[(100, 110), (900, 910)],
                      start_time=0.0)
    _, counts = seizure_time_histogram([rec])
    assert counts.sum() == 1


def test_histogram_uniform_onsets_not_rejected():
    rng = np.random.default_rng(7)
    starts = rng.uniform(0, 30 * 24 * H, 480)
    recs = [make_record(duration=60, fs=1, n_channels=1, seizures=[(0, 10)], start_time=s)
            for s in starts]
    _, counts = seizure_time_histogram(recs, merge_gap=1.0)
    assert counts.sum() == 480
    assert sstats.chisquare(counts).pvalue > 0.01


def test_histogram_errors():
    rec = make_record(duration=60, fs=1, n_channels=1, start_time=float("nan"))
    with pytest.raises(ValidationError, match="wall-clock"):
        seizure_time_histogram([rec])
    with pytest.raises(ValidationError):
        seizure_time_histogram([], bin_hours=5)


# -- harness ----------------------------------------------------------------------

def _ws(starts, labels, w=30.0):
    n = len(starts)
    return WindowSet(np.zeros((n, 1, 2, 2), np.float32), np.asarray(labels, np.int8),
                     np.asarray(starts, float), np.zeros(n, np.int32), np.zeros(n, np.int32),
                     np.zeros(2), np.zeros(2), np.zeros(2, int), w)


def test_leakage_guard_accepts_clean_split():
    tr = _ws([0, 30, 60], [0, 0, 0])
    stats = fit_stats(tr.values, window_fingerprint(tr.keys()))
    assert_no_leakage(stats, tr, _ws([90, 120], [0, 0]))


def test_leakage_guard_detects_foreign_stats():
    tr = _ws([0, 30, 60], [0, 0, 0])
    va = _ws([90, 120], [0, 0])
    both = WindowSet.concat([tr, va])
    stats = fit_stats(both.values, window_fingerprint(both.keys()))
    with pytest.raises(LeakageError, match="fingerprint"):
        assert_no_leakage(stats, tr, va)


def test_leakage_guard_detects_overlap():
    tr = _ws([0, 30, 60], [1, 1, 1])
    stats = fit_stats(tr.values, window_fingerprint(tr.keys()))
    with pytest.raises(LeakageError, match="overlap"):
        assert_no_leakage(stats, tr, _ws([75, 200], [1, 1]))
    assert_no_leakage(stats, tr, _ws([90], [1]))


def test_task_seed_stable_and_distinct():
    assert task_seed(0, "S01", 1, 0) == task_seed(0, "S01", 1, 0)
    seeds = {task_seed(0, s, f, r) for s in ("S01", "S02") for f in range(4) for r in range(2)}
    assert len(seeds) == 16


@pytest.fixture(scope="module")
def small_subject(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    plan = SubjectPlan("A", n_seizures=3, interictal_hours=3.2, seizure_spacing=2400,
                       lead_in=2400, signature_boost=8.0)
    ds = DatasetSpec(subjects=(plan,), n_channels=1, sampling_rate=64, noise_band=(0.5, 30.0),
                     powerline_hz=60, powerline_uv=0.0)
    synthesize_dataset(ds, d)
    return load_subject(d / "A")


def _small_cfg(**kw):
    model = ModelConfig(filters=(4, 4, 4), kernels=(3, 3, 3), strides=(1, 1, 1),
                        pools=(2, 2, 1), fc_hidden=8, dropout=0.0)
    d = dict(model=model, eval=EvalConfig(repeats=2))
    d.update(kw)
    return RunConfig(**d)


def _band_oracle(model, x, stats=None):
    """Stand-in for a trained network: thresholded 12-20 Hz power."""
    x = np.asarray(x)
    if stats is not None:
        x, _ = standardize(x, stats)
    band = x[:, :, 11:19, :].mean(axis=(1, 2, 3))
    return (band > 0.0).astype(float) * 0.98 + 0.01


def _dummy_train(train_set, val_set, arch, tcfg):
    return init_model(arch, tcfg.seed), [{"epoch": 1, "train_loss": 1.0, "val_loss": 1.0,
                                          "val_acc": 0.5}]


def test_harness_perfect_predictor(small_subject, monkeypatch):
    monkeypatch.setattr(harness, "predict", _band_oracle)
    cfg = _small_cfg()
    res = evaluate_subject(small_subject, cfg, train_fn=_dummy_train)
    assert res.n_seizures == 3 and res.predicted == [3, 3] and res.false_alarms == [0, 0]
    assert res.sen_pct == 100 and res.fpr == 0 and res.p_value == 0
    assert res.interictal_hours == pytest.approx(3.2)
    assert len(res.folds) == 6
    for f in res.folds:
        assert f.balance_step < 30 and f.n_train[0] > 0 and f.n_val[0] > 0
    assert sum(f.interictal_hours for f in res.folds if f.repeat == 0) == pytest.approx(3.2)


def test_harness_fits_stats_on_training_part_only(small_subject, monkeypatch):
    seen = []

    def spy(batch, fingerprint=""):
        seen.append((len(batch), fingerprint))
        return fit_stats(batch, fingerprint)

    monkeypatch.setattr(harness, "fit_stats", spy)
    monkeypatch.setattr(harness, "predict", _band_oracle)
    res = evaluate_subject(small_subject, _small_cfg(eval=EvalConfig(repeats=1)),
                           train_fn=_dummy_train)
    assert len(seen) == 3
    for (n, _), f in zip(seen, res.folds):
        assert n == sum(f.n_train)


def test_harness_raises_when_stats_leak(small_subject, monkeypatch):
    real_split = harness.temporal_split

    def leaky_split(ws, fraction):
        tr, va = real_split(ws, fraction)
        # validation windows smuggled into training
        return WindowSet.concat([tr, va]), va

    monkeypatch.setattr(harness, "temporal_split", leaky_split)
    with pytest.raises(LeakageError):
        evaluate_subject(small_subject, _small_cfg(), train_fn=_dummy_train)


def test_harness_real_training_runs(small_subject):
    cfg = _small_cfg(eval=EvalConfig(repeats=1),
                     training=dataclasses.replace(RunConfig().training, max_epochs=2,
                                                  learning_rate=1e-3))
    res = evaluate_subject(small_subject, cfg)
    assert len(res.folds) == 3
    for f in res.folds:
        assert f.epochs == 2 and len(f.test_probs) == len(f.test_times)
        assert np.all((f.test_probs >= 0) & (f.test_probs <= 1))


def test_harness_rejects_ineligible(tmp_path):
    plan = SubjectPlan("B", n_seizures=2, interictal_hours=3.2, seizure_spacing=2400,
                       lead_in=2400)
    ds = DatasetSpec(subjects=(plan,), n_channels=1, sampling_rate=64,
                     noise_band=(0.5, 30.0), powerline_hz=60, powerline_uv=0.0)
    synthesize_dataset(ds, tmp_path)
    with pytest.raises(ValidationError, match="eligib"):
        evaluate_subject(load_subject(tmp_path / "B"), _small_cfg(), train_fn=_dummy_train)
