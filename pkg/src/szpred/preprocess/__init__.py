"""Raw EEG windows to standardised STFT magnitude tensors."""
from .cache import read_stats, read_window_set, write_stats, write_window_set
from .spectral import (ComplexSpectrogram, Spectrogram, StftConfig, excised_mask,
                       feature_axes, remove_powerline, stft, window_features)
from .windows import (BALANCE_GRID, INTERICTAL, PREICTAL, BalanceChoice,
                      StandardizationStats, WindowExtractor, WindowSet,
                      choose_balance_step, count_windows, extract_windows, fit_stats,
                      standardize, tile_interval, window_fingerprint)

__all__ = [
    "BALANCE_GRID", "BalanceChoice", "ComplexSpectrogram", "INTERICTAL", "PREICTAL",
    "Spectrogram", "StandardizationStats", "StftConfig", "WindowExtractor", "WindowSet",
    "choose_balance_step", "count_windows", "excised_mask", "extract_windows",
    "feature_axes", "fit_stats", "read_stats", "read_window_set", "remove_powerline",
    "standardize", "stft", "tile_interval", "window_features", "window_fingerprint",
    "write_stats", "write_window_set",
]
