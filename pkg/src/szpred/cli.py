"""Command-line driver.

    szpred synth      --out DIR [--config SYNTH.json] [--seed N] [--boost X]
    szpred preprocess --data DIR --out DIR
    szpred train      --data DIR --out DIR
    szpred predict    --data DIR --out DIR [--models DIR]
    szpred evaluate   --data DIR --out DIR        (alias: run)
    szpred pvalue     --fpr F -k K_PRED -K K_TOTAL [--sop-hours H]
    szpred report     --out DIR [--print-config]

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
``SZPRED_LOG`` sets the log level (e.g. ``INFO``, ``DEBUG``).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .cnn.checkpoint import load_checkpoint, save_checkpoint
from .cnn.train import predict, temporal_split, train
from .config import RunConfig
from .errors import NumericalError, SzpredError, ValidationError
from .eval.harness import SubjectResult, evaluate_subject, task_seed
from .eval.report import report_csv, report_rows, report_table, seizure_time_histogram
from .eval.significance import chance_alarm_probability, random_predictor_pvalue
from .postprocess import ALARM_COLUMNS, alarm_rows, kofn
from .preprocess.cache import read_stats, read_window_set, write_stats, write_window_set
from .preprocess.spectral import feature_axes, window_features
from .preprocess.windows import (WindowExtractor, extract_windows, fit_stats, standardize,
                                 window_fingerprint)
from .signal_io.labeling import eligibility_check
from .signal_io.manifest import discover_subjects, load_subject, subject_path
from .signal_io.synthetic import DatasetSpec, synthesize_dataset

log = logging.getLogger("szpred")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
FINAL_TAG = 2_000_003   # seed-stream tag for whole-subject training

FOLD_COLUMNS = ("subject", "fold", "repeat", "seizure", "predicted", "false_alarms",
                "interictal_hours", "balance_step", "n_train_preictal", "n_train_interictal",
                "n_val_preictal", "n_val_interictal", "epochs", "best_epoch", "seed",
                "stats_digest")
CURVE_COLUMNS = ("subject", "fold", "repeat", "epoch", "train_loss", "val_loss", "val_acc")
PRED_COLUMNS = ("subject", "fold", "repeat", "end_time_s", "label", "probability")
ELIG_COLUMNS = ("subject", "n_leading", "interictal_hours", "seizures_per_day", "eligible",
                "reasons")


class UsageError(Exception):
    """Missing or conflicting command-line arguments."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _setup_logging(level=None) -> None:
    level = level or os.environ.get("SZPRED_LOG", "WARNING")
    level = int(level) if str(level).isdigit() else getattr(logging, str(level).upper(),
                                                             logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        force=True)


# -- helpers ----------------------------------------------------------------

def _write_csv(path, columns, rows, header: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def _read_csv(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.with_overrides(seed=args.seed, workers=args.workers)


def _select_subjects(args) -> list:
    if not args.data:
        raise UsageError("--data is required")
    names = discover_subjects(args.data)
    if not names:
        raise ValidationError(f"no subject manifests under {args.data}")
    if args.subjects:
        wanted = [s.strip() for s in args.subjects.split(",") if s.strip()]
        missing = sorted(set(wanted) - set(names))
        if missing:
            raise ValidationError(f"unknown subject(s): {', '.join(missing)}")
        names = [n for n in names if n in wanted]
    return names


def _out_dir(args, marker: str) -> Path:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    if (out / marker).exists() and not args.force:
        raise ValidationError(f"{out / marker} exists; use --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stft_for(cfg: RunConfig, subject):
    return dataclasses.replace(cfg.stft, powerline_hz=subject.powerline_hz,
                               window_seconds=cfg.labeling.window_seconds)


def _cache_path(out: Path, name: str, stft_cfg, fs: int) -> Path:
    key = json.dumps([dataclasses.asdict(stft_cfg), fs], sort_keys=True)
    return out / "cache" / f"{name}-{hashlib.sha256(key.encode()).hexdigest()[:12]}.spec"


def _extractor(out: Path, subject, cfg: RunConfig):
    stft_cfg = _stft_for(cfg, subject)
    ex = WindowExtractor.for_subject(subject, stft_cfg)
    path = _cache_path(out, subject.name, stft_cfg, subject.sampling_rate)
    if path.exists():
        ex.preload(read_window_set(path))
        log.info("%s: %d cached windows from %s", subject.name, len(ex.memo), path.name)
    return ex, path


def _save_cache(ex, path: Path, n_before: int) -> None:
    if len(ex.memo) != n_before:
        path.parent.mkdir(parents=True, exist_ok=True)
        write_window_set(ex.memo_set(), path)


# -- synth ------------------------------------------------------------------

def cmd_synth(args) -> int:
    if not args.out:
        raise UsageError("--out is required")
    out = Path(args.out)
    if out.exists() and any(out.iterdir()) and not args.force:
        raise ValidationError(f"{out} exists and is not empty; use --force to overwrite")
    ds = DatasetSpec.from_dict(json.loads(Path(args.config).read_text())) \
        if args.config else DatasetSpec()
    if args.seed is not None:
        ds = dataclasses.replace(ds, seed=int(args.seed))
    if args.boost is not None or args.mode is not None:
        plans = []
        for p in ds.subjects:
            kw = {}
            if args.boost is not None:
                kw["signature_boost"] = float(args.boost)
            if args.mode is not None:
                kw["mode"] = args.mode
            plans.append(dataclasses.replace(p, **kw))
        ds = dataclasses.replace(ds, subjects=tuple(plans))
    subjects = [s.strip() for s in args.subjects.split(",")] if args.subjects else None
    names = synthesize_dataset(ds, out, subjects=subjects)
    print(f"wrote {len(names)} subject(s) to {out}: {', '.join(names)}")
    return EXIT_OK


# -- preprocess ---------------------------------------------------------------

def cmd_preprocess(args) -> int:
    cfg = _load_config(args)
    names = _select_subjects(args)
    out = _out_dir(args, "eligibility.csv")
    rows = []
    for name in names:
        subject = load_subject(subject_path(args.data, name))
        lab = subject.labeling(cfg.labeling)
        e = eligibility_check({name: lab})[0]
        rows.append(_elig_row(e))
        ex, path = _extractor(out, subject, cfg)
        n0 = len(ex.memo)
        ws = extract_windows(ex, lab, ex.cfg, balance=cfg.eval.balance)
        _save_cache(ex, path, n0)
        pre, inter = ws.counts()
        print(f"{name}: {pre} preictal / {inter} interictal windows, "
              f"balance step {ws.balance_step:g} s -> {path.name}")
    _write_csv(out / "eligibility.csv", ELIG_COLUMNS, rows, cfg.header())
    return EXIT_OK


def _elig_row(e) -> dict:
    return {"subject": e.subject, "n_leading": e.n_leading,
            "interictal_hours": f"{e.interictal_hours:.2f}",
            "seizures_per_day": f"{e.seizures_per_day:.2f}", "eligible": int(e.eligible),
            "reasons": "; ".join(e.reasons)}


# -- train / predict ------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _load_config(args)
    names = _select_subjects(args)
    out = _out_dir(args, "models")
    (out / "models").mkdir(exist_ok=True)
    curve_rows = []
    for name in names:
        subject = load_subject(subject_path(args.data, name))
        lab = subject.labeling(cfg.labeling)
        ex, path = _extractor(out, subject, cfg)
        n0 = len(ex.memo)
        ws = extract_windows(ex, lab, ex.cfg, balance=cfg.eval.balance)
        _save_cache(ex, path, n0)
        tr, va = temporal_split(ws, cfg.training.validation_fraction)
        stats = fit_stats(tr.values, window_fingerprint(tr.keys()))
        tr = dataclasses.replace(tr, values=standardize(tr.values, stats)[0])
        va = dataclasses.replace(va, values=standardize(va.values, stats)[0])
        arch = cfg.model.architecture(tr.values.shape[1], tr.values.shape[2:])
        tcfg = dataclasses.replace(cfg.training, seed=task_seed(cfg.seed, name, FINAL_TAG))
        model, curve = train(tr, va, tcfg, arch)
        model.meta.update({"stats_digest": stats.digest(), "config_hash": cfg.digest(),
                           "subject": name})
        save_checkpoint(model, out / "models" / f"{name}.ckpt")
        write_stats(stats, out / "models" / f"{name}.stats")
        curve_rows += _curve_rows(name, -1, 0, curve)
        print(f"{name}: {len(curve)} epochs, best {model.meta['best_epoch']}")
    _write_csv(out / "train_curves.csv", CURVE_COLUMNS, curve_rows, cfg.header())
    return EXIT_OK


def cmd_predict(args) -> int:
    cfg = _load_config(args)
    names = _select_subjects(args)
    out = _out_dir(args, "predictions.csv")
    models = Path(args.models) if args.models else out / "models"
    pred_rows, alarm_out = [], []
    for name in names:
        subject = load_subject(subject_path(args.data, name))
        lab = subject.labeling(cfg.labeling)
        ex, path = _extractor(out, subject, cfg)
        n0 = len(ex.memo)
        ws = extract_windows(ex, lab, ex.cfg, balance=False)
        ws = ws.subset(np.argsort(ws.starts, kind="stable"))
        _save_cache(ex, path, n0)
        stats = read_stats(models / f"{name}.stats")
        model = load_checkpoint(models / f"{name}.ckpt")
        probs = predict(model, ws.values, stats)
        times = ws.starts + ws.window_seconds
        alarms = kofn(probs, cfg.alarm, times, ws.interval)
        pred_rows += _pred_rows(name, -1, 0, times, ws.labels, probs)
        alarm_out += alarm_rows(alarms, name, -1)
        print(f"{name}: {len(probs)} windows, {len(alarms)} alarm(s)")
    _write_csv(out / "predictions.csv", PRED_COLUMNS, pred_rows, cfg.header())
    _write_csv(out / "alarms.csv", ALARM_COLUMNS, alarm_out, cfg.header())
    return EXIT_OK


def _curve_rows(name, fold, repeat, curve) -> list:
    return [{"subject": name, "fold": fold, "repeat": repeat, "epoch": c["epoch"],
             "train_loss": f"{c['train_loss']:.6f}", "val_loss": f"{c['val_loss']:.6f}",
             "val_acc": f"{c['val_acc']:.4f}"} for c in curve]


def _pred_rows(name, fold, repeat, times, labels, probs) -> list:
    return [{"subject": name, "fold": fold, "repeat": repeat, "end_time_s": f"{t:.3f}",
             "label": int(l), "probability": f"{p:.6f}"}
            for t, l, p in zip(times, labels, probs)]


# -- evaluate -------------------------------------------------------------------

def _evaluate_one(job):
    data_dir, name, cfg_dict, out_dir, level = job
    _setup_logging(level)
    cfg = RunConfig.from_dict(cfg_dict)
    out = Path(out_dir)
    try:
        subject = load_subject(subject_path(data_dir, name))
        ex, path = _extractor(out, subject, cfg)
        n0 = len(ex.memo)
        res = evaluate_subject(subject, cfg, out_dir=out, extractor=ex)
        _save_cache(ex, path, n0)
        return name, res, None, EXIT_OK
    except NumericalError as exc:
        return name, None, f"{type(exc).__name__}: {exc}", EXIT_NUMERIC
    except (SzpredError, ValueError, OSError) as exc:
        return name, None, f"{type(exc).__name__}: {exc}", EXIT_DATA


def cmd_evaluate(args) -> int:
    t0 = time.time()
    cfg = _load_config(args)
    names = _select_subjects(args)
    out = _out_dir(args, "report.csv")
    header = cfg.header()
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")

    subjects, elig_rows, jobs = {}, [], []
    for name in names:
        subjects[name] = load_subject(subject_path(args.data, name))
        e = eligibility_check({name: subjects[name].labeling(cfg.labeling)})[0]
        elig_rows.append(_elig_row(e))
        if e.eligible:
            jobs.append((str(args.data), name, cfg.to_dict(), str(out),
                         logging.getLogger().level))
        else:
            log.warning("skipping %s: %s", name, "; ".join(e.reasons))
    _write_csv(out / "eligibility.csv", ELIG_COLUMNS, elig_rows, header)

    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            outcomes = list(pool.map(_evaluate_one, jobs))
    else:
        outcomes = [_evaluate_one(j) for j in jobs]
    outcomes.sort(key=lambda o: o[0])
    results = [o[1] for o in outcomes if o[1] is not None]
    failures = {o[0]: o[2] for o in outcomes if o[1] is None}
    codes = [o[3] for o in outcomes if o[3]]
    for name, msg in failures.items():
        print(f"error: subject {name} failed: {msg}", file=sys.stderr)

    fold_rows, curve_rows, pred_rows, alarm_out = [], [], [], []
    for r in results:
        for f in r.folds:
            fold_rows.append({
                "subject": r.subject, "fold": f.fold, "repeat": f.repeat, "seizure": f.seizure,
                "predicted": int(f.predicted), "false_alarms": f.false_alarms,
                "interictal_hours": f"{f.interictal_hours:.4f}",
                "balance_step": f"{f.balance_step:g}",
                "n_train_preictal": f.n_train[0], "n_train_interictal": f.n_train[1],
                "n_val_preictal": f.n_val[0], "n_val_interictal": f.n_val[1],
                "epochs": f.epochs, "best_epoch": f.best_epoch, "seed": f.seed,
                "stats_digest": f.stats_digest})
            curve_rows += _curve_rows(r.subject, f.fold, f.repeat, f.curve)
            pred_rows += _pred_rows(r.subject, f.fold, f.repeat, f.test_times,
                                    f.test_labels, f.test_probs)
            alarm_out += alarm_rows(f.alarms, r.subject, f.fold, f.repeat)
    _write_csv(out / "folds.csv", FOLD_COLUMNS, fold_rows, header)
    _write_csv(out / "curves.csv", CURVE_COLUMNS, curve_rows, header)
    _write_csv(out / "predictions.csv", PRED_COLUMNS, pred_rows, header)
    _write_csv(out / "alarms.csv", ALARM_COLUMNS, alarm_out, header)

    records = [rec for n in sorted(subjects) for rec in subjects[n].all_records]
    edges, counts = seizure_time_histogram(records, 1.0, cfg.labeling.seizure_merge_gap)
    _write_csv(out / "histogram.csv", ("bin_start_h", "bin_end_h", "count"),
               [{"bin_start_h": f"{a:g}", "bin_end_h": f"{b:g}", "count": int(c)}
                for a, b, c in zip(edges[:-1], edges[1:], counts)], header)

    summary = {"version": __version__, "config_hash": cfg.digest(), "alarm": cfg.alarm.to_dict(),
               "subjects": [{"subject": r.subject, "n_seizures": r.n_seizures,
                             "interictal_hours": r.interictal_hours, "predicted": r.predicted,
                             "false_alarms": r.false_alarms, "sop_hours": r.sop_hours,
                             "notes": r.notes, "status": r.status} for r in results],
               "failures": failures}
    (out / "results.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    render_report(out)
    if results:
        _spectrogram_figure(out, subjects[results[0].subject], cfg)
    print((out / "report.txt").read_text(), end="")
    log.info("evaluate finished in %.1f s", time.time() - t0)
    if codes:
        return EXIT_NUMERIC if EXIT_NUMERIC in codes else EXIT_DATA
    return EXIT_OK


def _spectrogram_figure(out: Path, subject, cfg: RunConfig) -> None:
    from .plotting import plot_spectrogram

    stft_cfg = _stft_for(cfg, subject)
    lab = subject.labeling(cfg.labeling)
    fs = subject.sampling_rate
    freq, times, _ = feature_axes(fs, stft_cfg)
    for label, ivs in (("preictal", lab.preictal_intervals),
                       ("interictal", lab.interictal_intervals)):
        if ivs:
            raw = subject.samples_at(ivs[0].start, stft_cfg.window_seconds)
            plot_spectrogram(window_features(raw, fs, stft_cfg), freq, times,
                             out / "figures" / f"spectrogram_{subject.name}_{label}.png",
                             f"{subject.name} {label}")


def render_report(out: Path) -> None:
    """(Re)write report.csv, report.txt and figures from a run's data files."""
    from .plotting import plot_alarm_timeline, plot_seizure_histogram, plot_training_curves

    out = Path(out)
    summary = json.loads((out / "results.json").read_text())
    header = f"# szpred {summary['version']} config_hash={summary['config_hash']}"
    results = [SubjectResult(s["subject"], s["n_seizures"], s["interictal_hours"],
                             s["predicted"], s["false_alarms"], s["sop_hours"],
                             notes=s["notes"], status=s["status"])
               for s in summary["subjects"]]
    rows = report_rows(results, summary["failures"])
    (out / "report.csv").write_text(report_csv(rows, header))
    (out / "report.txt").write_text(header + "\n" + report_table(rows))

    figs = out / "figures"
    figs.mkdir(exist_ok=True)
    curves = _read_csv(out / "curves.csv")
    if curves:
        plot_training_curves(curves, figs / "training_curves.png")
    hist = _read_csv(out / "histogram.csv")
    edges = [float(h["bin_start_h"]) for h in hist] + [float(hist[-1]["bin_end_h"])]
    plot_seizure_histogram(edges, [int(h["count"]) for h in hist], figs / "seizure_histogram.png")
    preds = _read_csv(out / "predictions.csv")
    alarms = _read_csv(out / "alarms.csv")
    thr = summary["alarm"]["threshold"]
    for r in results:
        p = [x for x in preds if x["subject"] == r.subject and x["repeat"] == "0"]
        a = [float(x["raise_time_s"]) for x in alarms
             if x["subject"] == r.subject and x["repeat"] == "0"]
        if p:
            plot_alarm_timeline([float(x["end_time_s"]) for x in p],
                                [float(x["probability"]) for x in p],
                                [int(x["label"]) for x in p], a, [], thr,
                                figs / f"alarms_{r.subject}.png", f"{r.subject}, repeat 0")


# -- pvalue / report -------------------------------------------------------------

def cmd_pvalue(args) -> int:
    P = chance_alarm_probability(args.fpr, args.sop_hours)
    p = random_predictor_pvalue(args.k, args.K, P)
    print(f"{p:.6f}")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.print_config:
        cfg = _load_config(args)
        print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
        return EXIT_OK
    if not args.out:
        raise UsageError("--out is required")
    if not (Path(args.out) / "results.json").exists():
        raise ValidationError(f"{args.out} has no results.json; run 'szpred evaluate' first")
    render_report(Path(args.out))
    print((Path(args.out) / "report.txt").read_text(), end="")
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--data", help="dataset directory (one sub-directory per subject)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--subjects", help="comma-separated subject names")
    common.add_argument("--seed", type=int, help="root seed (overrides config)")
    common.add_argument("--workers", type=int, help="parallel subject workers")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")

    p = _Parser(prog="szpred", description="EEG seizure prediction pipeline")
    p.add_argument("--version", action="version", version=f"szpred {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic dataset")
    s.add_argument("--boost", type=float, help="preictal band-power boost for every subject")
    s.add_argument("--mode", choices=("continuous", "pre_segmented"))
    s.set_defaults(func=cmd_synth)
    sub.add_parser("preprocess", parents=[common],
                   help="label, check eligibility and cache spectrogram windows"
                   ).set_defaults(func=cmd_preprocess)
    sub.add_parser("train", parents=[common],
                   help="train one model per subject on all its data").set_defaults(func=cmd_train)
    s = sub.add_parser("predict", parents=[common], help="score windows and raise alarms")
    s.add_argument("--models", help="directory with <subject>.ckpt/.stats (default OUT/models)")
    s.set_defaults(func=cmd_predict)
    for name in ("evaluate", "run"):
        sub.add_parser(name, parents=[common],
                       help="leave-one-seizure-out evaluation and report"
                       ).set_defaults(func=cmd_evaluate)
    s = sub.add_parser("pvalue", help="random-predictor p-value")
    s.add_argument("--fpr", type=float, required=True, help="false predictions per hour")
    s.add_argument("--sop-hours", type=float, default=0.5)
    s.add_argument("-k", type=int, required=True, help="predicted seizures")
    s.add_argument("-K", type=int, required=True, help="total seizures")
    s.set_defaults(func=cmd_pvalue)
    s = sub.add_parser("report", parents=[common], help="re-render report and figures")
    s.add_argument("--print-config", action="store_true", help="print the resolved config")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging()
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"szpred {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (SzpredError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
