"""Parameter, gradient and optimizer-state containers.

A model is a ParamStore: an ordered list of layers, each a weight matrix
plus a bias vector, tagged with the kind of computation it feeds
(dense / gru-gate / graph-score). Gradients live in a shape-congruent
GradStore; Adam moments in a shape-congruent OptimizerState.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import DimensionError, NumericError

LAYER_KINDS = ("dense", "gru-gate", "graph-score")


@dataclass
class Layer:
    weights: np.ndarray  # (fan_in, fan_out), float64
    bias: np.ndarray  # (fan_out,), float64
    kind: str = "dense"

    @property
    def fan_in(self):
        return self.weights.shape[0]

    @property
    def fan_out(self):
        return self.weights.shape[1]


@dataclass
class ParamStore:
    layers: list[Layer] = field(default_factory=list)

    def param_count(self):
        return sum(l.weights.size + l.bias.size for l in self.layers)

    def copy(self):
        return ParamStore(
            [Layer(l.weights.copy(), l.bias.copy(), l.kind) for l in self.layers]
        )

    def flat(self):
        """Concatenate all parameters into one vector (gradcheck order)."""
        parts = []
        for l in self.layers:
            parts.append(l.weights.ravel())
            parts.append(l.bias)
        return np.concatenate(parts) if parts else np.zeros(0)

    def set_flat(self, vec):
        if vec.size != self.param_count():
            raise DimensionError(
                f"flat vector of size {vec.size} cannot fill "
                f"{self.param_count()} parameters"
            )
        off = 0
        for l in self.layers:
            k = l.weights.size
            l.weights[...] = vec[off : off + k].reshape(l.weights.shape)
            off += k
            l.bias[...] = vec[off : off + l.bias.size]
            off += l.bias.size

    def view(self, start, stop):
        """ParamStore over a slice of layers; arrays are shared."""
        return ParamStore(self.layers[start:stop])


@dataclass
class GradStore:
    layers: list[Layer]
    accumulated: bool = False

    @classmethod
    def zeros_like(cls, params):
        return cls(
            [
                Layer(np.zeros_like(l.weights), np.zeros_like(l.bias), l.kind)
                for l in params.layers
            ]
        )

    def zero(self):
        for l in self.layers:
            l.weights[...] = 0.0
            l.bias[...] = 0.0
        self.accumulated = False

    def add_layer(self, index, grad_w, grad_b):
        """Accumulate one layer's gradient contribution."""
        l = self.layers[index]
        if grad_w.shape != l.weights.shape or grad_b.shape != l.bias.shape:
            raise DimensionError(
                f"gradient shapes {grad_w.shape}/{grad_b.shape} do not match "
                f"layer {index} shapes {l.weights.shape}/{l.bias.shape}"
            )
        l.weights += grad_w
        l.bias += grad_b
        self.accumulated = True

    def scale(self, factor):
        for l in self.layers:
            l.weights *= factor
            l.bias *= factor

    def flat(self):
        parts = []
        for l in self.layers:
            parts.append(l.weights.ravel())
            parts.append(l.bias)
        return np.concatenate(parts) if parts else np.zeros(0)


class OptimizerState:
    """Adam moments plus hyperparameters for one ParamStore."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [
            (np.zeros_like(l.weights.ravel()), np.zeros_like(l.bias))
            for l in params.layers
        ]
        self.v = [
            (np.zeros_like(l.weights.ravel()), np.zeros_like(l.bias))
            for l in params.layers
        ]

    def check_congruent(self, params):
        if len(self.m) != len(params.layers):
            raise DimensionError(
                f"optimizer tracks {len(self.m)} layers, params have "
                f"{len(params.layers)}"
            )
        for i, l in enumerate(params.layers):
            if self.m[i][0].size != l.weights.size or self.m[i][1].size != l.bias.size:
                raise DimensionError(f"optimizer moments incongruent at layer {i}")


def init_dense_layer(fan_in, fan_out, rng, kind="dense"):
    """uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero bias."""
    bound = np.sqrt(1.0 / fan_in)
    w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
    return Layer(w, np.zeros(fan_out), kind)


def init_mlp(widths, rng, kind="dense"):
    """Chain of dense layers: widths = (in, hidden..., out)."""
    return ParamStore(
        [init_dense_layer(a, b, rng, kind) for a, b in zip(widths, widths[1:])]
    )


def init_gru(x_width, hidden, rng):
    """Three gru-gate layers (reset, update, candidate) over [x || h]."""
    return ParamStore(
        [init_dense_layer(x_width + hidden, hidden, rng, "gru-gate") for _ in range(3)]
    )


def check_finite_grads(grads):
    for i, l in enumerate(grads.layers):
        if not (np.isfinite(l.weights).all() and np.isfinite(l.bias).all()):
            raise NumericError(f"non-finite gradient entries in layer {i}")
