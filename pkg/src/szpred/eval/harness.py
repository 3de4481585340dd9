"""Per-subject leave-one-seizure-out evaluation."""
from __future__ import annotations

import dataclasses
import logging
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..cnn.checkpoint import save_checkpoint
from ..cnn.train import predict, temporal_split, train
from ..errors import LeakageError, ValidationError
from ..postprocess import AlarmStream, kofn
from ..preprocess.cache import write_stats
from ..preprocess.windows import (INTERICTAL, PREICTAL, WindowExtractor, WindowSet,
                                  choose_balance_step, fit_stats, standardize,
                                  window_fingerprint)
from ..signal_io.labeling import eligibility_check
from .folds import HOUR, FoldPlan, make_folds, score_alarms
from .significance import worst_case_pvalue

log = logging.getLogger(__name__)

FOLD_TAG = 1_000_003   # seed-stream tag for the interictal partition


def task_seed(root: int, subject: str, *parts: int) -> int:
    """Stable 32-bit sub-seed for one unit of work."""
    ss = np.random.SeedSequence([int(root), zlib.crc32(subject.encode()), *map(int, parts)])
    return int(ss.generate_state(1, np.uint32)[0])


@dataclass
class FoldResult:
    fold: int
    repeat: int
    seizure: int
    predicted: bool
    false_alarms: int
    interictal_hours: float
    balance_step: float
    n_train: tuple            # (preictal, interictal)
    n_val: tuple
    epochs: int
    best_epoch: int
    seed: int
    stats_digest: str
    alarms: AlarmStream
    curve: list = field(default_factory=list)
    test_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    test_labels: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int8))
    test_probs: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class SubjectResult:
    subject: str
    n_seizures: int
    interictal_hours: float
    predicted: list           # per repeat
    false_alarms: list        # per repeat
    sop_hours: float
    folds: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    status: str = "ok"

    @property
    def sensitivities(self) -> list:
        return [100.0 * k / self.n_seizures for k in self.predicted]

    @property
    def fprs(self) -> list:
        return [fa / self.interictal_hours for fa in self.false_alarms]

    @property
    def sen_pct(self) -> float:
        return float(np.mean(self.sensitivities))

    @property
    def sen_sd(self) -> float:
        return float(np.std(self.sensitivities))

    @property
    def fpr(self) -> float:
        return float(np.mean(self.fprs))

    @property
    def fpr_sd(self) -> float:
        return float(np.std(self.fprs))

    @property
    def p_value(self) -> float:
        """Worst case over repeats: fewest predicted seizures, highest FPR."""
        return worst_case_pvalue(self.predicted, self.fprs, self.n_seizures, self.sop_hours)


def _overlapping(a_starts, b_starts, window) -> np.ndarray:
    """Mask over ``b`` of windows whose span intersects any ``a`` window."""
    a = np.sort(np.asarray(a_starts, dtype=float))
    b = np.asarray(b_starts, dtype=float)
    if len(a) == 0 or len(b) == 0:
        return np.zeros(len(b), dtype=bool)
    i = np.searchsorted(a, b)
    left = np.abs(b - a[np.clip(i - 1, 0, len(a) - 1)]) < window - 1e-9
    right = np.abs(a[np.clip(i, 0, len(a) - 1)] - b) < window - 1e-9
    return left | right


def assert_no_leakage(stats, train_set: WindowSet, *held_out: WindowSet) -> None:
    """Fail if stats were not fitted on exactly ``train_set`` or held-out windows touch it."""
    fp = window_fingerprint(train_set.keys())
    if stats.fingerprint != fp:
        raise LeakageError(f"standardisation stats fingerprint {stats.fingerprint or '<none>'} "
                           f"does not match the training windows ({fp})")
    for ws in held_out:
        clash = _overlapping(train_set.starts, ws.starts, train_set.window_seconds)
        if clash.any():
            t = ws.starts[np.flatnonzero(clash)[0]]
            raise LeakageError(f"{int(clash.sum())} held-out windows overlap training data "
                               f"(first at t={t:.1f} s)")


def default_train_fn(train_set, val_set, arch, train_cfg):
    return train(train_set, val_set, train_cfg, arch)


def evaluate_subject(subject, cfg, train_fn: Optional[Callable] = None,
                     out_dir=None, extractor: Optional[WindowExtractor] = None) -> SubjectResult:
    """Leave-one-seizure-out evaluation of one subject, ``cfg.eval.repeats`` times.

    ``subject`` is a loaded :class:`~szpred.signal_io.manifest.Subject`.  For
    every fold the preictal windows of the other seizures (oversampled to the
    balance step) and the remaining interictal windows are split in time into
    training and validation parts; standardisation statistics are fitted on
    the training part only.  The held-out seizure's preictal windows and
    interictal part are then classified, voted into alarms and scored.
    """
    train_fn = train_fn or default_train_fn
    name = subject.name
    lab = subject.labeling(cfg.labeling)
    elig = eligibility_check({name: lab})[0]
    if not elig.eligible:
        raise ValidationError(f"subject {name} not eligible: {'; '.join(elig.reasons)}")
    stft_cfg = dataclasses.replace(cfg.stft, powerline_hz=subject.powerline_hz,
                                   window_seconds=cfg.labeling.window_seconds)
    ex = extractor or WindowExtractor.for_subject(subject, stft_cfg)
    w = stft_cfg.window_seconds
    plan: FoldPlan = make_folds(lab, task_seed(cfg.seed, name, FOLD_TAG))
    n_pre_iv = len(lab.preictal_intervals)
    inter_all = ex.windows(lab.interictal_intervals, w, INTERICTAL,
                           [n_pre_iv + j for j in range(len(lab.interictal_intervals))])
    if not np.allclose(inter_all.starts, plan.interictal_starts):
        raise RuntimeError("interictal tiling differs from the fold plan")
    onsets = [sz.onset for sz in lab.seizures]
    notes = []
    if lab.truncated_preictal:
        notes.append("truncated preictal: seizures " +
                     ",".join(str(i) for i in lab.truncated_preictal))
    if subject.mode == "pre_segmented":
        notes.append("segmented data: voting restarts per segment")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)

    repeats = cfg.eval.repeats
    predicted = [0] * repeats
    false_alarms = [0] * repeats
    folds = []
    for fold in plan.folds:
        train_pre = [iv for iv in lab.preictal_intervals if iv.seizure != fold.seizure]
        inter_train = inter_all.subset(fold.interictal_train)
        if cfg.eval.balance and train_pre:
            step = choose_balance_step([iv.duration for iv in train_pre], len(inter_train), w).step
        else:
            step = w
        pre_ws = ex.windows(train_pre, step, PREICTAL,
                            [lab.preictal_intervals.index(iv) for iv in train_pre])
        pool = WindowSet.concat([pre_ws, inter_train])
        tr, va = temporal_split(pool, cfg.training.validation_fraction)

        test_pre = ex.windows(fold.preictal_test, w, PREICTAL,
                              [lab.preictal_intervals.index(iv) for iv in fold.preictal_test])
        test = WindowSet.concat([test_pre, inter_all.subset(fold.interictal_test)])
        test = test.subset(np.argsort(test.starts, kind="stable"))

        stats = fit_stats(tr.values, window_fingerprint(tr.keys()))
        assert_no_leakage(stats, tr, va, test)
        mode = stft_cfg.standardization
        tr_x, _ = standardize(tr.values, stats, mode)
        va_x, _ = standardize(va.values, stats, mode)
        if mode == "window":
            test_x, _ = standardize(test.values, mode="window")
        tr_s = dataclasses.replace(tr, values=tr_x)
        va_s = dataclasses.replace(va, values=va_x)
        arch = cfg.model.architecture(tr.values.shape[1], tr.values.shape[2:])
        spans = plan.test_spans(fold)
        if out is not None:
            write_stats(stats, out / "checkpoints" / f"{name}_fold{fold.index}.stats")

        for r in range(repeats):
            seed = task_seed(cfg.seed, name, fold.index, r)
            tcfg = dataclasses.replace(cfg.training, seed=seed)
            model, curve = train_fn(tr_s, va_s, arch, tcfg)
            model.meta.update({"stats_digest": stats.digest(), "config_hash": cfg.digest(),
                               "subject": name, "fold": fold.index, "repeat": r})
            probs = (predict(model, test_x) if mode == "window"
                     else predict(model, test.values, stats))
            times = test.starts + w
            alarms = kofn(probs, cfg.alarm, times, test.interval)
            score = score_alarms(alarms, onsets, spans, cfg.alarm)
            hit = bool(score.predicted[fold.seizure])
            predicted[r] += int(hit)
            false_alarms[r] += score.false_alarms
            log.info("%s fold %d repeat %d: step %g, %d epochs, predicted=%s, false alarms=%d",
                     name, fold.index, r, step, len(curve), hit, score.false_alarms)
            if out is not None:
                save_checkpoint(model, out / "checkpoints" / f"{name}_fold{fold.index}_rep{r}.ckpt")
            folds.append(FoldResult(
                fold.index, r, fold.seizure, hit, score.false_alarms, score.interictal_hours,
                float(step), tr.counts(), va.counts(), len(curve),
                int(model.meta.get("best_epoch", 0)), seed, stats.digest(), alarms, curve,
                times, test.labels.copy(), probs))
    hours = len(plan.interictal_starts) * w / HOUR
    return SubjectResult(name, len(lab.seizures), hours, predicted, false_alarms,
                         cfg.alarm.sop / HOUR, folds, notes)
