"""
Layers built on the autodiff tape.

A layer owns only its parameter names and sizes; the values live in a flat
``{name: array}`` snapshot so the same layer can be evaluated against any
snapshot (leaf tensors when training, constants when predicting).
"""

import math
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from HierarchicalCutSelector.exceptions import ShapeMismatch
from HierarchicalCutSelector.neural.autograd import Params, Tensor, as_tensor, concat, stack, tanh


def _uniform(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    """``y = x @ W + b`` for a vector or a row-stacked matrix ``x``."""

    def __init__(self, name: str, fan_in: int, fan_out: int) -> None:
        self.name = name
        self.fan_in = fan_in
        self.fan_out = fan_out

    def init(self, rng: np.random.Generator) -> Params:
        return {
            f'{self.name}.W': _uniform(rng, self.fan_in, (self.fan_in, self.fan_out)),
            f'{self.name}.b': _uniform(rng, self.fan_in, (self.fan_out,)),
        }

    def __call__(self, P: Mapping[str, Tensor], x) -> Tensor:
        x = as_tensor(x)
        if x.shape[-1] != self.fan_in:
            raise ShapeMismatch(f"{self.name} expects {self.fan_in} inputs, got {x.shape[-1]}")
        return x @ P[f'{self.name}.W'] + P[f'{self.name}.b']


class Mlp:
    """Tanh hidden layers followed by a linear output layer."""

    def __init__(self, name: str, sizes: Sequence[int]) -> None:
        self.name = name
        self.layers = [
            Linear(f'{name}.{i}', fan_in, fan_out)
            for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]))
        ]

    def init(self, rng: np.random.Generator) -> Params:
        params: Params = {}
        for layer in self.layers:
            params.update(layer.init(rng))
        return params

    def __call__(self, P: Mapping[str, Tensor], x) -> Tensor:
        out = as_tensor(x)
        for i, layer in enumerate(self.layers):
            out = layer(P, out)
            if i < len(self.layers) - 1:
                out = tanh(out)
        return out

    def predict(self, params: Params, X: np.ndarray) -> np.ndarray:
        """Plain numpy forward pass for batched scoring."""
        out = np.asarray(X, dtype=float)
        for i, layer in enumerate(self.layers):
            out = out @ params[f'{layer.name}.W'] + params[f'{layer.name}.b']
            if i < len(self.layers) - 1:
                out = np.tanh(out)
        return out


LstmState = Tuple[Tensor, Tensor]


class Lstm:
    """
    Single-layer LSTM over a sequence of vectors.

    Gates are packed as ``[input, forget, cell, output]`` in one weight
    matrix acting on ``[x, h]``; the forget bias starts at +1.
    """

    def __init__(self, name: str, input_size: int, hidden_size: int) -> None:
        self.name = name
        self.input_size = input_size
        self.hidden_size = hidden_size

    def init(self, rng: np.random.Generator) -> Params:
        H = self.hidden_size
        fan_in = self.input_size + H
        bias = _uniform(rng, fan_in, (4 * H,))
        bias[H:2 * H] += 1.0
        return {
            f'{self.name}.W': _uniform(rng, fan_in, (fan_in, 4 * H)),
            f'{self.name}.b': bias,
        }

    def zero_state(self) -> LstmState:
        return Tensor(np.zeros(self.hidden_size)), Tensor(np.zeros(self.hidden_size))

    def step(self, P: Mapping[str, Tensor], x, state: LstmState) -> LstmState:
        H = self.hidden_size
        h, c = state
        x = as_tensor(x)
        if x.shape != (self.input_size,):
            raise ShapeMismatch(f"{self.name} expects inputs of size {self.input_size}, got {x.shape}")
        z = concat([x, h]) @ P[f'{self.name}.W'] + P[f'{self.name}.b']
        i = z[0:H].sigmoid()
        f = z[H:2 * H].sigmoid()
        g = z[2 * H:3 * H].tanh()
        o = z[3 * H:4 * H].sigmoid()
        c = f * c + i * g
        h = o * c.tanh()
        return h, c

    def __call__(
        self, P: Mapping[str, Tensor], xs, state: Optional[LstmState] = None
    ) -> Tuple[List[Tensor], LstmState]:
        """
        Run over the rows of *xs*.

        Returns:
            Per-step hidden states and the final ``(h, c)``; an empty
            sequence returns no outputs and the zero state.
        """
        state = state or self.zero_state()
        xs = as_tensor(xs)
        outputs: List[Tensor] = []
        for t in range(xs.shape[0] if xs.value.ndim == 2 else 0):
            state = self.step(P, xs[t], state)
            outputs.append(state[0])
        return outputs, state


class AdditiveAttention:
    """Scores ``u_j = v . tanh(W1 e_j + W2 d)`` of encoder rows against a query."""

    def __init__(self, name: str, hidden_size: int) -> None:
        self.name = name
        self.hidden_size = hidden_size

    def init(self, rng: np.random.Generator) -> Params:
        H = self.hidden_size
        return {
            f'{self.name}.W1': _uniform(rng, H, (H, H)),
            f'{self.name}.W2': _uniform(rng, H, (H, H)),
            f'{self.name}.v': _uniform(rng, H, (H,)),
        }

    def keys(self, P: Mapping[str, Tensor], encoded: Sequence[Tensor]) -> Tensor:
        """Project encoder states once per sequence."""
        return stack(encoded) @ P[f'{self.name}.W1']

    def __call__(self, P: Mapping[str, Tensor], keys: Tensor, query: Tensor) -> Tensor:
        return tanh(keys + query @ P[f'{self.name}.W2']) @ P[f'{self.name}.v']


def constant_params(params: Params) -> Dict[str, Tensor]:
    return {name: Tensor(value) for name, value in params.items()}
