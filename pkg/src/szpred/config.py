"""Run configuration: JSON sections, strict keys, stable hash.

Example (every key optional, defaults shown by ``szpred report --print-config``)::

    {"seed": 7, "workers": 1,
     "stft": {"powerline_hz": 50, "log_magnitude": false},
     "labeling": {"sph": 300},
     "model": {"filters": [16, 32, 64]},
     "training": {"learning_rate": 0.0001, "batch_size": 16},
     "alarm": {"k": 8, "n": 10},
     "eval": {"repeats": 2}}
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from .cnn.model import CnnArchitecture
from .cnn.train import TrainConfig
from .errors import ValidationError
from .postprocess import AlarmConfig
from .preprocess.spectral import StftConfig
from .signal_io.labeling import LabelingConfig


@dataclass(frozen=True)
class ModelConfig:
    filters: tuple = (16, 32, 64)
    kernels: tuple = (5, 3, 3)
    strides: tuple = (2, 1, 1)
    pools: tuple = (2, 2, 2)
    fc_hidden: int = 256
    dropout: float = 0.5
    bn_momentum: float = 0.9

    def architecture(self, in_channels: int, input_shape) -> CnnArchitecture:
        return CnnArchitecture(in_channels, tuple(input_shape), tuple(self.filters),
                               tuple(self.kernels), tuple(self.strides), tuple(self.pools),
                               self.fc_hidden, dropout=self.dropout,
                               bn_momentum=self.bn_momentum)


@dataclass(frozen=True)
class EvalConfig:
    repeats: int = 2               # training runs per fold, averaged
    balance: bool = True           # oversample preictal windows to match interictal

    def __post_init__(self):
        if self.repeats < 1:
            raise ValidationError("eval.repeats must be >= 1")


_SECTIONS = {
    "stft": StftConfig,
    "labeling": LabelingConfig,
    "model": ModelConfig,
    "training": TrainConfig,
    "alarm": AlarmConfig,
    "eval": EvalConfig,
}


@dataclass(frozen=True)
class RunConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    training: TrainConfig = field(default_factory=TrainConfig)
    alarm: AlarmConfig = field(default_factory=AlarmConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError("seed must fit in an unsigned 64-bit integer")
        if self.alarm.sph != self.labeling.sph:
            raise ValidationError(f"alarm.sph ({self.alarm.sph}) must equal labeling.sph "
                                  f"({self.labeling.sph})")
        if self.alarm.window_seconds != self.labeling.window_seconds:
            raise ValidationError("alarm.window_seconds must equal labeling.window_seconds")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ValidationError("config must be a JSON object")
        unknown = set(d) - set(_SECTIONS) - {"seed", "workers"}
        if unknown:
            raise ValidationError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        kw = {}
        for name, typ in _SECTIONS.items():
            sub = d.get(name, {})
            if not isinstance(sub, dict):
                raise ValidationError(f"config section '{name}' must be an object")
            known = {f.name for f in dataclasses.fields(typ)}
            bad = set(sub) - known
            if bad:
                raise ValidationError(
                    f"unknown key(s) in '{name}': {', '.join(sorted(bad))}")
            vals = {k: tuple(v) if isinstance(v, list) else v for k, v in sub.items()}
            try:
                kw[name] = typ(**vals)
            except TypeError as exc:
                raise ValidationError(f"config section '{name}': {exc}") from None
        return cls(seed=int(d.get("seed", 0)), workers=int(d.get("workers", 1)), **kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def with_overrides(self, seed=None, workers=None) -> "RunConfig":
        kw = {}
        if seed is not None:
            kw["seed"] = int(seed)
        if workers is not None:
            kw["workers"] = int(workers)
        return dataclasses.replace(self, **kw)

    def digest(self) -> str:
        """Hash of the result-affecting settings (``workers`` excluded)."""
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def header(self) -> str:
        return f"# szpred {__version__} config_hash={self.digest()}"
