"""Patient-specific EEG seizure prediction with STFT spectrograms and a small CNN."""

__version__ = "0.1.0"
