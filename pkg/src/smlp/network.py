"""Stacked multilayer perceptron: stacked MLP units with a softmax head."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datamodel import N_CLASSES, N_FEATURES, FeatureStats

RELU = "relu"
IDENTITY = "identity"
ACTIVATIONS = (RELU, IDENTITY)

DEFAULT_UNITS = ((28, 64, 64), (64, 64, 64), (64, 32, 6))

CHECKPOINT_HEADER = "#smlp-checkpoint v1"


class ShapeError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class Layer:
    W: np.ndarray  # (input_dim, output_dim)
    b: np.ndarray  # (output_dim,)
    activation: str = RELU

    @property
    def input_dim(self) -> int:
        return self.W.shape[0]

    @property
    def output_dim(self) -> int:
        return self.W.shape[1]


@dataclass
class MlpUnit:
    layers: list[Layer]

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].input_dim] + [l.output_dim for l in self.layers]


@dataclass
class SmlpModel:
    units: list[MlpUnit]
    seed: int | None = None
    feature_stats: FeatureStats | None = field(default=None, compare=False)

    @property
    def layers(self) -> list[Layer]:
        return [layer for unit in self.units for layer in unit.layers]

    @property
    def input_dim(self) -> int:
        return self.units[0].layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.units[-1].layers[-1].output_dim

    def unit_shapes(self) -> list[list[int]]:
        return [u.dims for u in self.units]

    def activations(self) -> list[list[str]]:
        return [[l.activation for l in u.layers] for u in self.units]

    def params(self) -> list[np.ndarray]:
        """Flat parameter list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for layer in self.layers:
            out += [layer.W, layer.b]
        return out

    def param_names(self) -> list[str]:
        names = []
        for u, unit in enumerate(self.units):
            for k in range(len(unit.layers)):
                names += [f"unit{u}.layer{k}.W", f"unit{u}.layer{k}.b"]
        return names

    def unit_param_slices(self) -> list[slice]:
        """Positions of each unit's arrays within ``params()``."""
        slices, start = [], 0
        for unit in self.units:
            stop = start + 2 * len(unit.layers)
            slices.append(slice(start, stop))
            start = stop
        return slices

    def with_params(self, params: Sequence[np.ndarray]) -> "SmlpModel":
        params = list(params)
        if len(params) != 2 * len(self.layers):
            raise ShapeError("parameter list does not match the model")
        units, i = [], 0
        for unit in self.units:
            layers = []
            for layer in unit.layers:
                W, b = params[i], params[i + 1]
                if W.shape != layer.W.shape or b.shape != layer.b.shape:
                    raise ShapeError(f"parameter {i} has the wrong shape")
                layers.append(Layer(W, b, layer.activation))
                i += 2
            units.append(MlpUnit(layers))
        return SmlpModel(units, self.seed, self.feature_stats)

    def copy(self) -> "SmlpModel":
        return self.with_params([p.copy() for p in self.params()])


def _check_shapes(unit_shapes, input_dim, output_dim):
    if not unit_shapes:
        raise ShapeError("model needs at least one unit")
    prev = input_dim
    for u, dims in enumerate(unit_shapes):
        if len(dims) < 2 or any(int(d) < 1 for d in dims):
            raise ShapeError(f"unit {u}: needs at least two positive dims, got {dims}")
        if dims[0] != prev:
            raise ShapeError(f"unit {u} input {dims[0]} does not chain to {prev}")
        prev = dims[-1]
    if prev != output_dim:
        raise ShapeError(f"last unit outputs {prev}, expected {output_dim}")


def init_model(unit_shapes=DEFAULT_UNITS, seed: int = 0, *, activations=None,
               input_dim: int = N_FEATURES, output_dim: int = N_CLASSES) -> SmlpModel:
    """He-initialised stack; biases zero.

    ``activations`` optionally gives one tag per layer per unit.  By default
    every layer is ReLU except the very last, which feeds the softmax head.
    """
    unit_shapes = [[int(d) for d in dims] for dims in unit_shapes]
    _check_shapes(unit_shapes, input_dim, output_dim)
    if activations is None:
        activations = [[RELU] * (len(dims) - 1) for dims in unit_shapes]
        activations[-1][-1] = IDENTITY
    rng = np.random.default_rng(seed)
    units = []
    for dims, acts in zip(unit_shapes, activations):
        if len(acts) != len(dims) - 1 or any(a not in ACTIVATIONS for a in acts):
            raise ShapeError(f"bad activation list {acts} for unit {dims}")
        layers = [
            Layer(rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out)), np.zeros(d_out), act)
            for d_in, d_out, act in zip(dims[:-1], dims[1:], acts)
        ]
        units.append(MlpUnit(layers))
    return SmlpModel(units, seed)


def relu(x):
    return np.maximum(x, 0.0)


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(z):
    z = np.asarray(z, dtype=np.float64)
    shifted = z - z.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def cross_entropy(probs, label: int) -> float:
    p = float(np.asarray(probs)[int(label)])
    return -np.log(p) if p < 1.0 else 0.0


@dataclass
class ForwardCache:
    inputs: list[np.ndarray]  # input to each layer
    pre: list[np.ndarray]  # pre-activation of each layer
    logits: np.ndarray
    n_layers: int


def forward(model: SmlpModel, X) -> tuple[np.ndarray, ForwardCache]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.input_dim:
        raise ShapeError(f"expected {model.input_dim} features, got {X.shape[1]}")
    inputs, pre = [], []
    a = X
    for layer in model.layers:
        inputs.append(a)
        z = a @ layer.W + layer.b
        pre.append(z)
        a = relu(z) if layer.activation == RELU else z
    return softmax(a), ForwardCache(inputs, pre, a, len(model.layers))


def logits(model: SmlpModel, X) -> np.ndarray:
    return forward(model, X)[1].logits


def _weights(labels, sample_weight):
    if sample_weight is None:
        return np.full(len(labels), 1.0 / len(labels))
    w = np.asarray(sample_weight, dtype=np.float64)
    return w / w.sum()


def mean_loss(model_or_cache, labels, sample_weight=None, X=None) -> float:
    """Mean (or weighted mean) cross-entropy over a batch."""
    cache = model_or_cache
    if isinstance(model_or_cache, SmlpModel):
        cache = forward(model_or_cache, X)[1]
    labels = np.asarray(labels, dtype=np.int64)
    logp = log_softmax(cache.logits)[np.arange(len(labels)), labels]
    return float(-(_weights(labels, sample_weight) * logp).sum())


def backward(model: SmlpModel, cache: ForwardCache, labels, sample_weight=None) -> list[np.ndarray]:
    """Gradients of the mean cross-entropy, aligned with ``model.params()``."""
    if cache.n_layers != len(model.layers):
        raise ShapeError("cache does not come from this model")
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if cache.logits.shape != (n, model.output_dim):
        raise ShapeError("cache batch does not match labels")
    delta = softmax(cache.logits)
    delta[np.arange(n), labels] -= 1.0
    delta *= _weights(labels, sample_weight)[:, None]
    layers = model.layers
    grads: list[np.ndarray] = [None] * (2 * len(layers))
    for k in range(len(layers) - 1, -1, -1):
        grads[2 * k] = cache.inputs[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ layers[k].W.T
            if layers[k - 1].activation == RELU:
                delta = delta * (cache.pre[k - 1] > 0)
    return grads


def predict_proba(model: SmlpModel, X) -> np.ndarray:
    return forward(model, X)[0]


def predict(model: SmlpModel, X) -> np.ndarray:
    """Class codes; ``argmax`` resolves ties toward the lowest code."""
    return np.argmax(predict_proba(model, X), axis=1)


# checkpoints

def save_checkpoint(model: SmlpModel, path: str | Path) -> None:
    arch = {"units": model.unit_shapes(), "activations": model.activations(), "seed": model.seed}
    lines = [CHECKPOINT_HEADER, "arch " + json.dumps(arch, separators=(",", ":"))]
    if model.feature_stats is not None:
        lines.append("mean " + " ".join(map(repr, model.feature_stats.mean.tolist())))
        lines.append("std " + " ".join(map(repr, model.feature_stats.std.tolist())))
    for u, unit in enumerate(model.units):
        for k, layer in enumerate(unit.layers):
            lines.append(f"W {u} {k} {layer.W.shape[0]} {layer.W.shape[1]}")
            lines.extend(" ".join(map(repr, row)) for row in layer.W.tolist())
            lines.append(f"b {u} {k} {layer.b.shape[0]}")
            lines.append(" ".join(map(repr, layer.b.tolist())))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> SmlpModel:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise CheckpointError(f"{path}: not an smlp checkpoint")
    try:
        arch = json.loads(lines[1].removeprefix("arch "))
        model = init_model(arch["units"], 0, activations=arch["activations"],
                           input_dim=arch["units"][0][0], output_dim=arch["units"][-1][-1])
        model.seed = arch.get("seed")
        pos = 2
        stats = {}
        while lines[pos].startswith(("mean ", "std ")):
            key, _, rest = lines[pos].partition(" ")
            stats[key] = np.array([float(v) for v in rest.split()])
            pos += 1
        if stats:
            model.feature_stats = FeatureStats(stats["mean"], stats["std"])
        for layer in model.layers:
            rows, cols = map(int, lines[pos].split()[3:5])
            layer.W = np.array([[float(v) for v in line.split()] for line in lines[pos + 1:pos + 1 + rows]])
            pos += 1 + rows
            layer.b = np.array([float(v) for v in lines[pos + 1].split()])
            pos += 2
            if layer.W.shape != (rows, cols) or layer.b.shape != (cols,):
                raise CheckpointError(f"{path}: array shape mismatch")
    except (IndexError, KeyError, ValueError, json.JSONDecodeError, ShapeError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from exc
    return model
