"""
Feed-forward networks with ELU hidden layers and a sigmoid or softmax output.

Parameters live in one flat vector. Layers are stored in order; each layer
occupies a ``(fan_in + 1) x fan_out`` row-major block whose last row holds the
biases. All functions here also accept a stack of parameter vectors with shape
``(..., m)``, in which case outputs and losses carry the same leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "ELU_ALPHA",
    "PROB_CLAMP",
    "OutputActivation",
    "Architecture",
    "Batch",
    "param_count",
    "init_uniform",
    "elu",
    "forward",
    "loss",
    "accuracy",
]

ELU_ALPHA = 1.0
PROB_CLAMP = 1e-12


class OutputActivation(str, Enum):
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"


@dataclass(frozen=True)
class Architecture:
    """Layer structure of a fully connected network.

    Parameters
    ----------
    input_dim : int
        Number of inputs.
    hidden_widths : tuple of int
        Width of every hidden layer, first to last. Must be non-empty.
    output_dim : int
        Number of outputs. 1 implies a sigmoid output, more implies softmax.
    output_activation : OutputActivation, optional
        Inferred from ``output_dim`` when omitted.
    """

    input_dim: int
    hidden_widths: tuple
    output_dim: int
    output_activation: OutputActivation = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if self.output_activation is None:
            act = OutputActivation.SIGMOID if self.output_dim == 1 else OutputActivation.SOFTMAX
            object.__setattr__(self, "output_activation", act)
        else:
            object.__setattr__(self, "output_activation", OutputActivation(self.output_activation))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError("input_dim and output_dim must be positive")
        if not self.hidden_widths:
            raise ValueError("at least one hidden layer is required")
        if any(w < 1 for w in self.hidden_widths):
            raise ValueError(f"hidden widths must be positive, got {self.hidden_widths}")
        if self.output_activation is OutputActivation.SIGMOID and self.output_dim != 1:
            raise ValueError("sigmoid output requires output_dim == 1")
        if self.output_activation is OutputActivation.SOFTMAX and self.output_dim < 2:
            raise ValueError("softmax output requires output_dim >= 2")

    @classmethod
    def parse(cls, text, output_activation=None):
        """Build from a dash-separated layer string such as ``"784-100-100-10"``."""
        try:
            sizes = [int(tok) for tok in text.strip().split("-")]
        except ValueError:
            raise ValueError(f"malformed architecture string {text!r}") from None
        if len(sizes) < 3:
            raise ValueError(f"architecture {text!r} needs input, hidden and output sizes")
        return cls(sizes[0], tuple(sizes[1:-1]), sizes[-1], output_activation)

    @property
    def layer_sizes(self):
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @property
    def layer_shapes(self):
        sizes = self.layer_sizes
        return list(zip(sizes[:-1], sizes[1:]))

    @property
    def depth(self):
        return len(self.hidden_widths)

    @property
    def n_params(self):
        return param_count(self)

    def __str__(self):
        return "-".join(str(s) for s in self.layer_sizes)


@dataclass(frozen=True)
class Batch:
    """Input patterns with matching targets.

    ``targets`` has one column for sigmoid networks (values 0 or 1) and one
    one-hot column per class for softmax networks.
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        targets = np.asarray(self.targets, dtype=float)
        if targets.ndim == 1:
            targets = targets[:, None]
        if inputs.shape[0] != targets.shape[0]:
            raise ValueError(
                f"{inputs.shape[0]} input patterns but {targets.shape[0]} target rows"
            )
        if inputs.shape[0] < 1:
            raise ValueError("a batch needs at least one pattern")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "targets", targets)

    def __len__(self):
        return self.inputs.shape[0]

    def check(self, arch):
        if self.inputs.shape[1] != arch.input_dim or self.targets.shape[1] != arch.output_dim:
            raise ValueError(
                f"batch shapes {self.inputs.shape}/{self.targets.shape} do not fit {arch}"
            )


def param_count(arch):
    """Number of weights plus biases, ``sum((fan_in + 1) * fan_out)``."""
    return sum((fan_in + 1) * fan_out for fan_in, fan_out in arch.layer_shapes)


def init_uniform(arch, init_range, rng):
    """Draw every parameter independently from ``U[a, b]``."""
    a, b = (float(v) for v in init_range)
    if not a < b:
        raise ValueError(f"initialisation interval [{a}, {b}] is empty or degenerate")
    return rng.uniform(a, b, size=param_count(arch))


def elu(x, alpha=ELU_ALPHA):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))


def elu_derivative(x, alpha=ELU_ALPHA):
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, 1.0, alpha * np.exp(np.minimum(x, 0.0)))


def sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def softmax(z):
    shifted = np.exp(z - z.max(axis=-1, keepdims=True))
    return shifted / shifted.sum(axis=-1, keepdims=True)


def unpack(arch, params):
    """Split a flat (or stacked) parameter vector into ``(W, b)`` per layer.

    ``W`` has shape ``(..., fan_in, fan_out)`` and ``b`` ``(..., 1, fan_out)``;
    both are views into ``params``.
    """
    params = np.asarray(params, dtype=float)
    m = param_count(arch)
    if params.shape[-1] != m:
        raise ValueError(f"{arch} has {m} parameters, got a vector of length {params.shape[-1]}")
    lead = params.shape[:-1]
    layers = []
    offset = 0
    for fan_in, fan_out in arch.layer_shapes:
        size = (fan_in + 1) * fan_out
        block = params[..., offset:offset + size].reshape(*lead, fan_in + 1, fan_out)
        layers.append((block[..., :-1, :], block[..., -1:, :]))
        offset += size
    return layers


def propagate(arch, params, inputs):
    """Forward pass keeping what backpropagation needs.

    Returns the output activations and a list of ``(layer_input, pre_activation)``
    pairs, one per layer.
    """
    layers = unpack(arch, params)
    a = np.asarray(inputs, dtype=float)
    cache = []
    for k, (W, b) in enumerate(layers):
        z = a @ W + b
        cache.append((a, z))
        if k < len(layers) - 1:
            a = elu(z)
    if arch.output_activation is OutputActivation.SIGMOID:
        out = sigmoid(z)
    else:
        out = softmax(z)
    return out, cache


def output_delta(arch, outputs, pre_activation, targets):
    """``outputs - targets`` evaluated without cancellation when outputs approach 1.

    This is the gradient of the per-pattern cross-entropy with respect to the
    output pre-activations. Softmax targets must be one-hot.
    """
    t = np.asarray(targets, dtype=float)
    if arch.output_activation is OutputActivation.SIGMOID:
        # sigmoid(z) - t == (1 - t) * sigmoid(z) - t * sigmoid(-z)
        return (1.0 - t) * outputs - t * sigmoid(-pre_activation)
    others = (outputs * (1.0 - t)).sum(axis=-1, keepdims=True)
    return outputs * (1.0 - t) - t * others


def forward(arch, params, batch):
    """Output activations for every pattern of ``batch`` (a Batch or an input matrix)."""
    if isinstance(batch, Batch):
        batch.check(arch)
        inputs = batch.inputs
    else:
        inputs = np.atleast_2d(np.asarray(batch, dtype=float))
        if inputs.shape[-1] != arch.input_dim:
            raise ValueError(f"inputs of width {inputs.shape[-1]} do not fit {arch}")
    out, _ = propagate(arch, params, inputs)
    return out


def loss(outputs, targets):
    """Mean cross-entropy over patterns.

    Binary cross-entropy when ``outputs`` has a single column, categorical
    cross-entropy otherwise. Probabilities are clamped to
    ``[PROB_CLAMP, 1 - PROB_CLAMP]`` before taking logs.
    """
    p = np.clip(_as_columns(outputs), PROB_CLAMP, 1.0 - PROB_CLAMP)
    t = _as_columns(targets)
    if p.shape[-1] == 1:
        per_pattern = -(t * np.log(p) + (1.0 - t) * np.log1p(-p))[..., 0]
    else:
        per_pattern = -(t * np.log(p)).sum(axis=-1)
    return per_pattern.mean(axis=-1)


def _as_columns(values):
    # 1-D arrays hold one sigmoid output (or binary target) per pattern
    values = np.asarray(values, dtype=float)
    return values[:, None] if values.ndim == 1 else values


def predictions(outputs):
    outputs = _as_columns(outputs)
    if outputs.shape[-1] == 1:
        return (outputs[..., 0] >= 0.5).astype(int)
    # argmax returns the first maximum, i.e. the lowest class index on ties
    return outputs.argmax(axis=-1)


def accuracy(outputs, targets):
    """Fraction of patterns classified correctly."""
    t = _as_columns(targets)
    truth = (t[:, 0] >= 0.5).astype(int) if t.shape[-1] == 1 else t.argmax(axis=-1)
    return float(np.mean(predictions(outputs) == truth))
