"""Temporal validation split, mini-batch training with early stopping, inference."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..errors import ArchitectureMismatchError, NumericalError, ValidationError
from ..preprocess.windows import (INTERICTAL, PREICTAL, StandardizationStats, WindowSet,
                                  standardize)
from .model import CnnArchitecture, CnnModel, backward, forward, init_model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 1e-4
    momentum: float = 0.9
    batch_size: int = 16
    max_epochs: int = 100
    patience: int = 10
    validation_fraction: float = 0.25
    select: str = "best"
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValidationError("training.optimizer must be adam|sgd")
        if not 0 < self.validation_fraction < 1:
            raise ValidationError("training.validation_fraction must be in (0, 1)")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValidationError("training.learning_rate, batch_size and max_epochs must be positive")
        if self.patience < 0:
            raise ValidationError("training.patience must be >= 0")
        if self.select not in ("best", "last"):
            raise ValidationError("training.select must be best|last")

    def to_dict(self) -> dict:
        return asdict(self)


def temporal_split(ws: WindowSet, fraction: float = 0.25):
    """Chronologically last ``fraction`` of each class becomes validation.

    Training windows whose time span reaches into the first validation window
    of their class are dropped, so overlapping (oversampled) windows never end
    up on both sides.
    """
    train_idx, val_idx = [], []
    for label in (PREICTAL, INTERICTAL):
        idx = np.flatnonzero(ws.labels == label)
        if len(idx) == 0:
            continue
        if len(idx) < 4:
            raise ValidationError(f"class {label} has {len(idx)} windows; need at least 4")
        idx = idx[np.lexsort((idx, ws.starts[idx]))]
        n_val = max(1, int(np.ceil(fraction * len(idx) - 1e-9)))
        val = idx[-n_val:]
        boundary = ws.starts[val].min()
        head = idx[:-n_val]
        keep = head[ws.starts[head] + ws.window_seconds <= boundary + 1e-9]
        train_idx.append(keep)
        val_idx.append(val)
    tr = np.sort(np.concatenate(train_idx)) if train_idx else np.zeros(0, int)
    va = np.sort(np.concatenate(val_idx)) if val_idx else np.zeros(0, int)
    return ws.subset(tr), ws.subset(va)


class _Adam:
    def __init__(self, params, lr, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            params[k] -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(params[k].dtype)


class _Sgd:
    def __init__(self, params, lr, momentum):
        self.lr, self.mu = lr, momentum
        self.vel = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        for k, g in grads.items():
            vel = self.vel[k]
            vel *= self.mu
            vel -= self.lr * g
            params[k] += vel


def evaluate_loss(model: CnnModel, x, y, batch_size: int = 256):
    """Eval-mode mean cross-entropy and accuracy."""
    if len(y) == 0:
        return float("nan"), float("nan")
    probs = predict_proba(model, x, batch_size)
    p = probs[np.arange(len(y)), y]
    loss = float(-np.mean(np.log(np.maximum(p, 1e-12))))
    acc = float(np.mean(probs.argmax(axis=1) == y))
    return loss, acc


def _xy(ws):
    if isinstance(ws, WindowSet):
        return ws.values, ws.labels.astype(np.int64)
    x, y = ws
    return np.asarray(x), np.asarray(y, dtype=np.int64)


def train(train_set, val_set, cfg: TrainConfig, arch: Optional[CnnArchitecture] = None,
          model: Optional[CnnModel] = None):
    """Fit the network; returns ``(model, curve)``.

    ``train_set``/``val_set`` are standardised :class:`WindowSet` objects or
    ``(x, y)`` pairs.  Validation loss is computed in eval mode after every
    epoch; training stops after ``max_epochs`` or once the validation loss has
    not improved for more than ``patience`` epochs.  With ``select="best"``
    the parameters of the best validation epoch are returned.
    """
    x, y = _xy(train_set)
    xv, yv = _xy(val_set)
    if len(y) == 0:
        raise ValidationError("empty training set")
    if model is None:
        arch = arch or CnnArchitecture(x.shape[1], x.shape[2:])
        model = init_model(arch, cfg.seed)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))
    dt = np.dtype(model.arch.dtype)
    x = x.astype(dt, copy=False)
    xv = xv.astype(dt, copy=False)
    opt = (_Adam(model.params, cfg.learning_rate) if cfg.optimizer == "adam"
           else _Sgd(model.params, cfg.learning_rate, cfg.momentum))

    curve = []
    best, best_epoch, best_state, wait = np.inf, 0, None, 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(y))
        losses = []
        for i in range(0, len(order), cfg.batch_size):
            b = order[i:i + cfg.batch_size]
            if len(b) < 2 and len(order) > 1:
                continue  # batch norm needs more than one sample
            probs, cache = forward(model, x[b], "train", rng)
            loss, grads = backward(model, cache, y[b])
            if not np.isfinite(loss):
                raise NumericalError(
                    f"loss became {loss} at epoch {epoch}, batch {i // cfg.batch_size} "
                    f"(lr={cfg.learning_rate}, optimizer={cfg.optimizer})")
            opt.step(model.params, grads)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        val_loss, val_acc = evaluate_loss(model, xv, yv)
        if len(yv) and not np.isfinite(val_loss):
            raise NumericalError(f"validation loss became {val_loss} at epoch {epoch}")
        curve.append({"epoch": epoch, "train_loss": train_loss,
                      "val_loss": val_loss, "val_acc": val_acc})
        log.debug("epoch %d train %.4f val %.4f acc %.3f", epoch, train_loss, val_loss, val_acc)
        if not len(yv):
            continue
        if val_loss < best:
            best, best_epoch, wait = val_loss, epoch, 0
            best_state = model.copy()
        else:
            wait += 1
            if wait > cfg.patience:
                break
    if cfg.select == "best" and best_state is not None:
        model = best_state
    model.meta.update({"epochs": len(curve), "best_epoch": best_epoch, "seed": cfg.seed})
    return model, curve


def predict_proba(model: CnnModel, x, batch_size: int = 256) -> np.ndarray:
    x = np.asarray(x)
    if len(x) == 0:
        return np.zeros((0, model.arch.n_classes))
    out = [forward(model, x[i:i + batch_size], "eval")[0]
           for i in range(0, len(x), batch_size)]
    return np.concatenate(out)


def predict(model: CnnModel, windows, stats: Optional[StandardizationStats] = None,
            batch_size: int = 256) -> np.ndarray:
    """Preictal probability per window, in input order.

    ``windows`` holds standardised values, or raw magnitudes when ``stats``
    (the frozen training statistics the model was fitted with) is supplied.
    """
    x = windows.values if isinstance(windows, WindowSet) else np.asarray(windows)
    if len(x) == 0:
        return np.zeros(0)
    if x.shape[1:] != model.arch.input_dims:
        raise ArchitectureMismatchError(
            f"windows have shape {tuple(x.shape[1:])}, model expects {model.arch.input_dims}")
    if stats is not None:
        want = model.meta.get("stats_digest")
        if want and want != stats.digest():
            raise ArchitectureMismatchError(
                f"standardisation stats {stats.digest()} differ from the model's {want}")
        x, _ = standardize(x, stats)
    return predict_proba(model, x, batch_size)[:, 1]
