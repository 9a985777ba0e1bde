"""Small fully connected embedding network: forward, backprop, SGD, checkpoints.

Hidden layers use ReLU, the output layer is linear. Parameters are plain
float64 arrays and every step is hand-rolled, which keeps the whole chain
checkable against finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .linalg import DimensionMismatch

CHECKPOINT_MAGIC = b"BTRP"
CHECKPOINT_VERSION = 1


class StaleTrace(RuntimeError):
    """The forward trace does not match the model or gradient shapes."""


class CheckpointError(Exception):
    pass


@dataclass
class MlpModel:
    layer_dims: tuple[int, ...]  # input q, hidden..., output d
    weights: list[np.ndarray]  # (out, in) per layer
    biases: list[np.ndarray]  # (out,) per layer
    activation: str = "relu"

    @property
    def num_layers(self) -> int:
        return len(self.weights)


@dataclass
class ForwardTrace:
    """Per-layer pre-activations and hidden activations kept for one batch."""

    inputs: np.ndarray
    pre_acts: list[np.ndarray]
    hidden_acts: list[np.ndarray]


@dataclass
class ParamGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


def init_params(layer_dims, rng: np.random.Generator) -> MlpModel:
    """He-style init: weights N(0, 2 / fan_in), biases zero."""
    dims = tuple(int(d) for d in layer_dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"layer dims must be at least [input, output] positives, got {dims}")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases)


def forward(model: MlpModel, inputs: np.ndarray) -> tuple[np.ndarray, ForwardTrace]:
    """Embed a (b, q) batch; returns (b, d) embeddings and the trace."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or inputs.shape[1] != model.layer_dims[0]:
        raise DimensionMismatch(
            f"inputs have shape {inputs.shape}, model expects (b, {model.layer_dims[0]})"
        )
    pre_acts, hidden_acts = [], []
    h = inputs
    last = model.num_layers - 1
    for idx, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w.T + b
        pre_acts.append(z)
        if idx < last:
            h = np.maximum(z, 0.0)
            hidden_acts.append(h)
        else:
            h = z
    return h, ForwardTrace(inputs=inputs, pre_acts=pre_acts, hidden_acts=hidden_acts)


def backward(model: MlpModel, trace: ForwardTrace, grad_embeddings: np.ndarray) -> ParamGrads:
    """Parameter gradients of the scalar loss whose embedding gradient is given."""
    grad_embeddings = np.asarray(grad_embeddings, dtype=float)
    if len(trace.pre_acts) != model.num_layers:
        raise StaleTrace(f"trace has {len(trace.pre_acts)} layers, model has {model.num_layers}")
    if grad_embeddings.shape != trace.pre_acts[-1].shape:
        raise StaleTrace(
            f"gradient shape {grad_embeddings.shape} does not match trace output "
            f"{trace.pre_acts[-1].shape}"
        )
    for z, w in zip(trace.pre_acts, model.weights):
        if z.shape[1] != w.shape[0]:
            raise StaleTrace("trace layer widths do not match the model")

    grad_w = [np.empty(0)] * model.num_layers
    grad_b = [np.empty(0)] * model.num_layers
    delta = grad_embeddings
    for idx in range(model.num_layers - 1, -1, -1):
        layer_in = trace.hidden_acts[idx - 1] if idx > 0 else trace.inputs
        grad_w[idx] = delta.T @ layer_in
        grad_b[idx] = delta.sum(axis=0)
        if idx > 0:
            delta = (delta @ model.weights[idx]) * (trace.pre_acts[idx - 1] > 0.0)
    return ParamGrads(weights=grad_w, biases=grad_b)


def sgd_step(model: MlpModel, grads: ParamGrads, lr: float) -> MlpModel:
    """One plain gradient step; returns a new model, inputs untouched."""
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    weights = [w - lr * g for w, g in zip(model.weights, grads.weights)]
    biases = [b - lr * g for b, g in zip(model.biases, grads.biases)]
    return MlpModel(model.layer_dims, weights, biases, model.activation)


def save_checkpoint(model: MlpModel, path) -> None:
    """Versioned binary: magic "BTRP", u32 version, u32 layer count, u32 dims,
    then per layer the weight matrix (row-major) and bias vector as
    little-endian float64."""
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, model.num_layers))
        f.write(struct.pack(f"<{len(model.layer_dims)}I", *model.layer_dims))
        for w, b in zip(model.weights, model.biases):
            f.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path) -> MlpModel:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {blob[:4]!r}")
    offset = 4
    try:
        version, num_layers = struct.unpack_from("<II", blob, offset)
        offset += 8
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        dims = struct.unpack_from(f"<{num_layers + 1}I", blob, offset)
        offset += 4 * (num_layers + 1)
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            w = np.frombuffer(blob, dtype="<f8", count=fan_out * fan_in, offset=offset)
            offset += 8 * fan_out * fan_in
            b = np.frombuffer(blob, dtype="<f8", count=fan_out, offset=offset)
            offset += 8 * fan_out
            weights.append(w.reshape(fan_out, fan_in).astype(float))
            biases.append(b.astype(float))
    except (struct.error, ValueError) as exc:
        raise CheckpointError(f"{path}: truncated checkpoint") from exc
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return MlpModel(layer_dims=tuple(dims), weights=weights, biases=biases)
