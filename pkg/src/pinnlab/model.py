"""Fully connected tanh network u(x, t) with deterministic initialization.

Parameters are canonically stored as float64 layer matrices plus a flat
view (layer-major, weights row-major, then bias).  Under a narrower
precision the stored values are pre-rounded onto that format's grid, so the
float64 storage is an exact embedding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .precision import FP64, PrecisionSpec


def layer_shapes(depth: int, width: int) -> list[tuple[int, int]]:
    """(out, in) shapes for `depth` hidden layers of `width` units, input
    (x, t), scalar output."""
    if depth < 1 or width < 1:
        raise ValueError("depth and width must be >= 1")
    shapes = [(width, 2)]
    shapes += [(width, width)] * (depth - 1)
    shapes.append((1, width))
    return shapes


def flat_size(shapes: list[tuple[int, int]]) -> int:
    return sum(o * i + o for o, i in shapes)


@dataclass
class MlpParams:
    """Network parameters: weight/bias pairs plus the flat vector view."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    activation: str = "tanh"

    def __post_init__(self):
        for k in range(len(self.layers) - 1):
            if self.layers[k + 1][0].shape[1] != self.layers[k][0].shape[0]:
                raise ValueError("layer shapes do not compose")
        if self.layers[0][0].shape[1] != 2 or self.layers[-1][0].shape[0] != 1:
            raise ValueError("network must map (x, t) to a scalar")

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [w.shape for w, _ in self.layers]

    @property
    def flat_view(self) -> np.ndarray:
        return np.concatenate(
            [np.concatenate([w.ravel(), b]) for w, b in self.layers])

    @classmethod
    def from_flat(cls, flat: np.ndarray,
                  shapes: list[tuple[int, int]]) -> "MlpParams":
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != flat_size(shapes):
            raise ValueError("flat vector length does not match shapes")
        layers = []
        pos = 0
        for o, i in shapes:
            w = flat[pos:pos + o * i].reshape(o, i).copy()
            pos += o * i
            b = flat[pos:pos + o].copy()
            pos += o
            layers.append((w, b))
        return cls(layers)


def init_mlp(seed: int, depth: int, width: int,
             precision: PrecisionSpec = FP64) -> MlpParams:
    """Xavier-uniform weights, zero biases, drawn from a seeded Philox
    stream; identical seed gives bit-identical parameters.

    Under a non-fp64 precision every weight is rounded onto that format.
    """
    gen = np.random.Generator(np.random.Philox(seed))
    layers = []
    for o, i in layer_shapes(depth, width):
        bound = math.sqrt(6.0 / (i + o))
        w = gen.uniform(-bound, bound, size=(o, i))
        if precision.name != "fp64":
            w = np.asarray(precision.round_array(w.astype(np.float32)),
                           dtype=np.float64)
        layers.append((w, np.zeros(o)))
    return MlpParams(layers)


def forward(params: MlpParams, x: float, t: float,
            precision: PrecisionSpec = FP64) -> float:
    """Scalar network evaluation with round-after-op arithmetic.

    Sums run in a fixed left-to-right order so a replay is bit-identical.
    """
    r = precision.round_scalar if precision.name != "fp64" else float
    act = [r(x), r(t)]
    last = len(params.layers) - 1
    for li, (w, b) in enumerate(params.layers):
        out = []
        for row in range(w.shape[0]):
            s = r(b[row])
            for col in range(w.shape[1]):
                s = r(s + r(w[row, col] * act[col]))
            out.append(s if li == last else r(math.tanh(s)))
        act = out
    return act[0]


def build_forward(params: MlpParams):
    """Expression builder for the tape engine: f(x_ref, t_ref) -> output.

    Parameter values are baked in as constants; use build_forward_trainable
    when parameter gradients are needed.
    """
    def f(x, t):
        act = [x, t]
        last = len(params.layers) - 1
        for li, (w, b) in enumerate(params.layers):
            out = []
            for row in range(w.shape[0]):
                s = x.tape.const(b[row])
                for col in range(w.shape[1]):
                    s = s + w[row, col] * act[col]
                out.append(s if li == last else s.tanh())
            act = out
        return act[0]
    return f


def build_forward_trainable(shapes: list[tuple[int, int]]):
    """Expression builder whose trailing arguments are the flat parameters.

    Returns f(x_ref, t_ref, *theta_refs) for use with autodiff.record, so
    the recorded tape exposes every parameter as a variable.
    """
    def f(x, t, *theta):
        act = [x, t]
        pos = 0
        last = len(shapes) - 1
        for li, (o, i) in enumerate(shapes):
            out = []
            for row in range(o):
                s = theta[pos + o * i + row]  # bias
                for col in range(i):
                    s = s + theta[pos + row * i + col] * act[col]
                out.append(s if li == last else s.tanh())
            act = out
            pos += o * i + o
        return act[0]
    return f
