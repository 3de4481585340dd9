"""Short-time Fourier transform and power-line band excision."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal as sps

from ..errors import ShapeError, ValidationError


@dataclass(frozen=True)
class StftConfig:
    window_seconds: float = 30.0
    segment_seconds: float = 1.0
    overlap_fraction: float = 0.5
    taper: str = "hann"
    powerline_hz: int = 50
    notch_half_width: float = 3.0
    drop_dc: bool = True
    log_magnitude: bool = False
    standardization: str = "dataset"
    decimate_above_hz: float = 1000.0
    target_rate_hz: int = 400

    def __post_init__(self):
        if not 0 <= self.overlap_fraction < 1:
            raise ValidationError("stft.overlap_fraction must be in [0, 1)")
        if not 0 < self.segment_seconds < self.window_seconds:
            raise ValidationError("stft.segment_seconds must be in (0, window_seconds)")
        if self.taper not in ("hann", "rectangular"):
            raise ValidationError(f"stft.taper must be hann|rectangular, got {self.taper!r}")
        if self.powerline_hz not in (50, 60):
            raise ValidationError("stft.powerline_hz must be 50 or 60")
        if self.notch_half_width < 0:
            raise ValidationError("stft.notch_half_width must be non-negative")
        if self.standardization not in ("dataset", "window"):
            raise ValidationError("stft.standardization must be dataset|window")

    def effective_rate(self, fs: int) -> int:
        return self.target_rate_hz if fs > self.decimate_above_hz else fs

    def geometry(self, fs: int):
        """``(samples per window, samples per segment, hop, n_columns)``."""
        n = self.window_seconds * fs
        if abs(n - round(n)) > 1e-9:
            raise ValidationError(f"{self.window_seconds} s is not a whole number of samples at {fs} Hz")
        n = int(round(n))
        seg = int(round(self.segment_seconds * fs))
        hop = seg - int(round(self.overlap_fraction * seg))
        if hop < 1:
            raise ValidationError("overlap leaves a hop of zero samples")
        return n, seg, hop, (n - seg) // hop + 1


class ComplexSpectrogram(NamedTuple):
    values: np.ndarray      # [channels, freq, time], complex
    freq_axis: np.ndarray   # Hz
    time_axis: np.ndarray   # seconds from window start, column centres


@dataclass(frozen=True, eq=False)
class Spectrogram:
    values: np.ndarray
    freq_axis: np.ndarray
    time_axis: np.ndarray
    kept_bins: np.ndarray

    @property
    def shape(self):
        return self.values.shape


def taper_window(kind: str, n: int) -> np.ndarray:
    if kind == "rectangular":
        return np.ones(n)
    return sps.get_window("hann", n, fftbins=True)


def stft(window: np.ndarray, fs: int, cfg: StftConfig) -> ComplexSpectrogram:
    """Tapered FFTs of consecutive overlapping segments, per channel.

    No normalisation is applied: a rectangular, non-overlapping column holds
    the plain DFT of its segment.
    """
    x = np.asarray(window, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    n, seg, hop, ncol = cfg.geometry(fs)
    if x.shape[1] != n:
        raise ShapeError(f"window has {x.shape[1]} samples, expected {n} "
                         f"({cfg.window_seconds} s at {fs} Hz)")
    frames = sliding_window_view(x, seg, axis=1)[:, ::hop][:, :ncol]
    spec = np.fft.rfft(frames * taper_window(cfg.taper, seg), axis=-1)
    freqs = np.fft.rfftfreq(seg, 1.0 / fs)
    times = (np.arange(ncol) * hop + seg / 2.0) / fs
    return ComplexSpectrogram(spec.transpose(0, 2, 1), freqs, times)


def excised_mask(freq_axis: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """True for bins inside ``f0 +- w`` or ``2 f0 +- w`` (and DC if dropped)."""
    f = np.asarray(freq_axis)
    w = cfg.notch_half_width
    eps = 1e-9
    mask = np.zeros(f.shape, dtype=bool)
    for centre in (cfg.powerline_hz, 2 * cfg.powerline_hz):
        mask |= (f >= centre - w - eps) & (f <= centre + w + eps)
    if cfg.drop_dc:
        mask |= np.abs(f) < eps
    return mask


def remove_powerline(spec, cfg: StftConfig) -> Spectrogram:
    """Drop power-line (and DC) frequency bins; the values keep their dtype."""
    keep = np.flatnonzero(~excised_mask(spec.freq_axis, cfg))
    return Spectrogram(spec.values[:, keep, :], np.asarray(spec.freq_axis)[keep],
                       np.asarray(spec.time_axis), keep)


def decimate(x: np.ndarray, fs: int, cfg: StftConfig):
    """Anti-aliased resampling of very high-rate recordings to ``target_rate_hz``."""
    target = cfg.effective_rate(fs)
    if target == fs:
        return x, fs
    g = np.gcd(int(fs), int(target))
    y = sps.resample_poly(np.asarray(x, dtype=np.float64), target // g, fs // g, axis=-1)
    return y, target


def window_features(window: np.ndarray, fs: int, cfg: StftConfig) -> np.ndarray:
    """Raw window -> excised magnitude spectrogram ``[C, F_kept, T]`` (float32)."""
    x, fs = decimate(window, fs, cfg)
    spec = remove_powerline(stft(x, fs, cfg), cfg)
    mag = np.abs(spec.values)
    if cfg.log_magnitude:
        mag = np.log(mag + 1e-6)
    return mag.astype(np.float32)


def feature_axes(fs: int, cfg: StftConfig):
    """Frequency axis, time axis and kept bin indices for windows at ``fs``."""
    fs = cfg.effective_rate(fs)
    n, seg, hop, ncol = cfg.geometry(fs)
    freqs = np.fft.rfftfreq(seg, 1.0 / fs)
    keep = np.flatnonzero(~excised_mask(freqs, cfg))
    times = (np.arange(ncol) * hop + seg / 2.0) / fs
    return freqs[keep], times, keep
