"""Three-block convolutional network: architecture, parameters, forward and backward."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ShapeError, ValidationError
from . import layers as L

N_BLOCKS = 3


@dataclass(frozen=True)
class CnnArchitecture:
    """Each block: batch norm -> conv (valid) -> ReLU -> max pool.

    Then flatten -> dropout -> fc(sigmoid) -> dropout -> fc(softmax).
    """

    in_channels: int
    input_shape: tuple                 # (freq_bins, time_bins)
    filters: tuple = (16, 32, 64)
    kernels: tuple = (5, 3, 3)
    strides: tuple = (2, 1, 1)
    pools: tuple = (2, 2, 2)
    fc_hidden: int = 256
    n_classes: int = 2
    dropout: float = 0.5
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9
    dtype: str = "float32"

    def __post_init__(self):
        object.__setattr__(self, "input_shape", tuple(int(v) for v in self.input_shape))
        for name in ("filters", "kernels", "strides", "pools"):
            val = tuple(int(v) for v in getattr(self, name))
            if len(val) != N_BLOCKS:
                raise ValidationError(f"architecture.{name} needs {N_BLOCKS} entries")
            object.__setattr__(self, name, val)
        if not 0 <= self.dropout < 1:
            raise ValidationError("architecture.dropout must be in [0, 1)")
        if self.dtype not in ("float32", "float64"):
            raise ValidationError("architecture.dtype must be float32|float64")
        self.shapes()

    @property
    def input_dims(self) -> tuple:
        return (self.in_channels,) + self.input_shape

    def shapes(self) -> list:
        """``(layer, output shape)`` for every layer; raises if a size hits zero."""
        c, h, w = self.input_dims
        out = [("input", (c, h, w))]
        for b in range(N_BLOCKS):
            k, s, p, f = self.kernels[b], self.strides[b], self.pools[b], self.filters[b]
            h, w = (h - k) // s + 1, (w - k) // s + 1
            if h < 1 or w < 1:
                raise ShapeError(
                    f"conv{b + 1}: kernel {k}x{k} does not fit input {out[-1][1][1:]} "
                    f"for architecture input {self.input_dims}")
            out.append((f"conv{b + 1}", (f, h, w)))
            h, w = h // p, w // p
            if h < 1 or w < 1:
                raise ShapeError(f"pool{b + 1}: output size {(h, w)} not positive for "
                                 f"architecture input {self.input_dims}")
            out.append((f"pool{b + 1}", (f, h, w)))
            c = f
        out.append(("flatten", (c * h * w,)))
        out.append(("fc1", (self.fc_hidden,)))
        out.append(("fc2", (self.n_classes,)))
        return out

    @property
    def flat_features(self) -> int:
        return dict(self.shapes())["flatten"][0]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CnnArchitecture":
        return cls(**d)


@dataclass(eq=False)
class CnnModel:
    arch: CnnArchitecture
    params: dict
    bn_stats: dict                     # running mean/var, float64
    meta: dict = field(default_factory=dict)

    def copy(self) -> "CnnModel":
        return CnnModel(self.arch, {k: v.copy() for k, v in self.params.items()},
                        {k: v.copy() for k, v in self.bn_stats.items()}, copy.deepcopy(self.meta))

    def param_count(self) -> int:
        return int(sum(v.size for v in self.params.values()))


def init_model(arch: CnnArchitecture, seed: int = 0, zero_final: bool = False) -> CnnModel:
    """Fan-in scaled uniform initialisation (He for ReLU convs, LeCun for fc)."""
    rng = np.random.default_rng(seed)
    dt = np.dtype(arch.dtype)
    params, stats = {}, {}
    c = arch.in_channels
    for b in range(N_BLOCKS):
        k, f = arch.kernels[b], arch.filters[b]
        params[f"bn{b + 1}.gamma"] = np.ones(c, dt)
        params[f"bn{b + 1}.beta"] = np.zeros(c, dt)
        stats[f"bn{b + 1}.mean"] = np.zeros(c)
        stats[f"bn{b + 1}.var"] = np.ones(c)
        lim = np.sqrt(6.0 / (c * k * k))
        params[f"conv{b + 1}.w"] = rng.uniform(-lim, lim, (f, c, k, k)).astype(dt)
        params[f"conv{b + 1}.b"] = np.zeros(f, dt)
        c = f
    d = arch.flat_features
    lim = np.sqrt(3.0 / d)
    params["fc1.w"] = rng.uniform(-lim, lim, (d, arch.fc_hidden)).astype(dt)
    params["fc1.b"] = np.zeros(arch.fc_hidden, dt)
    lim = np.sqrt(3.0 / arch.fc_hidden)
    if zero_final:
        params["fc2.w"] = np.zeros((arch.fc_hidden, arch.n_classes), dt)
    else:
        params["fc2.w"] = rng.uniform(-lim, lim, (arch.fc_hidden, arch.n_classes)).astype(dt)
    params["fc2.b"] = np.zeros(arch.n_classes, dt)
    return CnnModel(arch, params, stats, {"init_seed": int(seed)})


def forward(model: CnnModel, x: np.ndarray, mode: str = "eval", rng=None,
            update_stats: bool = True):
    """Class probabilities ``[N, n_classes]`` and the activation cache.

    ``mode="train"`` uses batch statistics for batch norm and, when ``rng`` is
    given, Bernoulli dropout with inverted scaling.  Eval mode is deterministic.
    """
    if mode not in ("train", "eval"):
        raise ValidationError(f"mode must be train|eval, got {mode!r}")
    arch, p = model.arch, model.params
    x = np.asarray(x, dtype=arch.dtype)
    if x.ndim != 4 or x.shape[1:] != arch.input_dims:
        raise ShapeError(f"input: expected [N, {', '.join(map(str, arch.input_dims))}], "
                         f"got {list(x.shape)}")
    cache = {"n": x.shape[0], "mode": mode}
    h = x
    for b in range(1, N_BLOCKS + 1):
        h, cache[f"bn{b}"] = L.batchnorm_forward(
            h, p[f"bn{b}.gamma"], p[f"bn{b}.beta"], model.bn_stats[f"bn{b}.mean"],
            model.bn_stats[f"bn{b}.var"], mode, arch.bn_eps, arch.bn_momentum, update_stats)
        h, cache[f"conv{b}"] = L.conv_forward(h, p[f"conv{b}.w"], p[f"conv{b}.b"],
                                              arch.strides[b - 1])
        h, cache[f"relu{b}"] = L.relu_forward(h)
        h, cache[f"pool{b}"] = L.maxpool_forward(h, arch.pools[b - 1])
    drop_rng = rng if mode == "train" else None
    h, cache["drop1"] = L.dropout_forward(h.reshape(h.shape[0], -1), arch.dropout, drop_rng)
    h, cache["fc1"] = L.affine_forward(h, p["fc1.w"], p["fc1.b"])
    h, cache["sig"] = L.sigmoid_forward(h)
    h, cache["drop2"] = L.dropout_forward(h, arch.dropout, drop_rng)
    logits, cache["fc2"] = L.affine_forward(h, p["fc2.w"], p["fc2.b"])
    probs = L.softmax(logits)
    cache["probs"] = probs
    return probs, cache


def backward(model: CnnModel, cache: dict, labels: np.ndarray):
    """Mean cross-entropy loss and its gradient for every parameter."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (cache["n"],):
        raise ValidationError(f"{labels.shape[0] if labels.ndim else 0} labels for a "
                              f"cached batch of {cache['n']}")
    arch = model.arch
    loss, d = L.cross_entropy(cache["probs"], labels)
    g = {}
    d, g["fc2.w"], g["fc2.b"] = L.affine_backward(d, cache["fc2"])
    d = L.dropout_backward(d, cache["drop2"])
    d = L.sigmoid_backward(d, cache["sig"])
    d, g["fc1.w"], g["fc1.b"] = L.affine_backward(d, cache["fc1"])
    d = L.dropout_backward(d, cache["drop1"])
    pooled = dict(arch.shapes())["pool3"]
    d = d.reshape((cache["n"],) + tuple(pooled))
    for b in range(N_BLOCKS, 0, -1):
        d = L.maxpool_backward(d, cache[f"pool{b}"])
        d = L.relu_backward(d, cache[f"relu{b}"])
        d, g[f"conv{b}.w"], g[f"conv{b}.b"] = L.conv_backward(d, cache[f"conv{b}"])
        d, g[f"bn{b}.gamma"], g[f"bn{b}.beta"] = L.batchnorm_backward(d, cache[f"bn{b}"])
    return loss, g
