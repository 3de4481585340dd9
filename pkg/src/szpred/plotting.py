"""Figures written next to the CSV outputs (Agg backend, no display needed)."""
from __future__ import annotations

from collections import defaultdict

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure


def _save(fig: Figure, path) -> None:
    FigureCanvasAgg(fig)
    fig.tight_layout()
    fig.savefig(path, dpi=110)


def plot_training_curves(rows, path) -> None:
    """``rows``: dicts with subject, fold, repeat, epoch, train_loss, val_loss."""
    runs = defaultdict(list)
    for r in rows:
        runs[(r["subject"], int(r["fold"]), int(r["repeat"]))].append(r)
    subjects = sorted({k[0] for k in runs})
    fig = Figure(figsize=(4.2 * max(len(subjects), 1), 3.4))
    for i, subj in enumerate(subjects):
        ax = fig.add_subplot(1, len(subjects), i + 1)
        for key in sorted(k for k in runs if k[0] == subj):
            pts = sorted(runs[key], key=lambda r: int(r["epoch"]))
            ep = [int(r["epoch"]) for r in pts]
            ax.plot(ep, [float(r["train_loss"]) for r in pts], color="C0", lw=0.8, alpha=0.6)
            ax.plot(ep, [float(r["val_loss"]) for r in pts], color="C1", lw=0.8, alpha=0.6)
        ax.set_title(subj)
        ax.set_xlabel("epoch")
        ax.set_yscale("log")
        if i == 0:
            ax.set_ylabel("cross-entropy")
            ax.plot([], [], color="C0", label="train")
            ax.plot([], [], color="C1", label="validation")
            ax.legend(fontsize=8)
    _save(fig, path)


def plot_seizure_histogram(edges, counts, path) -> None:
    fig = Figure(figsize=(6, 3))
    ax = fig.add_subplot(1, 1, 1)
    edges = np.asarray(edges, dtype=float)
    ax.bar(edges[:-1], counts, width=np.diff(edges), align="edge", edgecolor="k", lw=0.5)
    ax.set_xlim(0, 24)
    ax.set_xticks(range(0, 25, 3))
    ax.set_xlabel("time of day (h)")
    ax.set_ylabel("leading seizures")
    _save(fig, path)


def plot_spectrogram(values, freq_axis, time_axis, path, title: str = "") -> None:
    """``values``: ``[channels, freq, time]`` magnitudes of one window."""
    values = np.asarray(values)
    fig = Figure(figsize=(4 * values.shape[0], 3.2))
    for c in range(values.shape[0]):
        ax = fig.add_subplot(1, values.shape[0], c + 1)
        img = np.log10(np.maximum(values[c], 1e-12))
        ax.pcolormesh(time_axis, freq_axis, img, shading="nearest")
        ax.set_xlabel("time (s)")
        ax.set_title(f"{title} ch{c}".strip())
        if c == 0:
            ax.set_ylabel("frequency (Hz)")
    _save(fig, path)


def plot_alarm_timeline(times, probs, labels, alarms, onsets, threshold, path,
                        title: str = "") -> None:
    """Window probabilities on a compressed index axis with alarm markers."""
    times = np.asarray(times, dtype=float)
    order = np.argsort(times)
    times, probs, labels = times[order], np.asarray(probs)[order], np.asarray(labels)[order]
    idx = np.arange(len(times))
    fig = Figure(figsize=(8, 2.8))
    ax = fig.add_subplot(1, 1, 1)
    ax.scatter(idx, probs, s=3, c=np.where(labels == 1, "C3", "C0"))
    ax.axhline(threshold, color="k", lw=0.6, ls="--")
    for a in alarms:
        ax.axvline(np.searchsorted(times, a), color="C2", lw=0.8)
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("test window (time order; red = preictal)")
    ax.set_ylabel("P(preictal)")
    ax.set_title(title)
    _save(fig, path)
