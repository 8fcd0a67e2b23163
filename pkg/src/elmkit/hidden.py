"""Random input-to-hidden projection: the fixed, untrained half of an ELM.

A hidden layer is a random weight matrix drawn once from a seeded uniform
distribution plus an elementwise nonlinearity. Samples are carried in
columns throughout: an input batch is (num_inputs x num_samples) and the
activation matrix is (num_hidden x num_samples).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .linalg import as_matrix
from .seeding import make_rng

SIGMOID = "sigmoid"
TANH = "tanh"
RELU = "relu"

# expit evaluates the logistic function in its overflow-safe branch form:
# exp(z)/(1+exp(z)) for z < 0, 1/(1+exp(-z)) otherwise.
ACTIVATIONS = {
    SIGMOID: expit,
    TANH: np.tanh,
    RELU: lambda z: np.maximum(z, 0.0),
}


def apply_activation(kind: str, z: np.ndarray) -> np.ndarray:
    if kind not in ACTIVATIONS:
        raise ValueError(f"unknown activation {kind!r}, expected one of {sorted(ACTIVATIONS)}")
    return ACTIVATIONS[kind](np.asarray(z, dtype=np.float64))


@dataclass(frozen=True)
class HiddenLayer:
    """Immutable random projection; fully reconstructable from its fields."""

    w1: np.ndarray  # (num_hidden, num_inputs)
    activation: str
    seed: int
    weight_low: float
    weight_high: float

    def __post_init__(self):
        self.w1.setflags(write=False)

    @property
    def num_hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def num_inputs(self) -> int:
        return self.w1.shape[1]


def hidden_layer_from_dims(
    num_hidden: int,
    num_inputs: int,
    low: float = -0.5,
    high: float = 0.5,
    activation: str = SIGMOID,
    seed: int = 0,
) -> HiddenLayer:
    """Draw a (num_hidden x num_inputs) uniform(low, high) weight matrix.

    The draw order is row-major and fixed by the seed, so a layer saved as
    (dims, range, seed) reloads bitwise identical.
    """
    if num_hidden < 1 or num_inputs < 1:
        raise ValueError(f"layer dimensions must be >= 1, got {num_hidden}x{num_inputs}")
    if not low < high:
        raise ValueError(f"weight range is empty: low={low}, high={high}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}, expected one of {sorted(ACTIVATIONS)}")
    rng = make_rng(seed)
    w1 = rng.uniform(low, high, size=(num_hidden, num_inputs))
    return HiddenLayer(w1=w1, activation=activation, seed=int(seed), weight_low=float(low), weight_high=float(high))


def init_hidden_layer(
    num_inputs: int,
    fan_out: int,
    low: float = -0.5,
    high: float = 0.5,
    activation: str = SIGMOID,
    seed: int = 0,
) -> HiddenLayer:
    """Hidden layer with fan_out hidden units per input feature."""
    if fan_out < 1:
        raise ValueError(f"fan_out must be >= 1, got {fan_out}")
    return hidden_layer_from_dims(fan_out * num_inputs, num_inputs, low, high, activation, seed)


def forward_hidden(layer: HiddenLayer, x: np.ndarray) -> np.ndarray:
    """Activation matrix g(W1 @ X); column k is the hidden response to sample k."""
    x = as_matrix(x, "x")
    if x.shape[0] != layer.num_inputs:
        raise ValueError(
            f"input has {x.shape[0]} features but the layer expects {layer.num_inputs}"
        )
    return apply_activation(layer.activation, layer.w1 @ x)
