from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from HierarchicalCutSelector.exceptions import ShapeMismatch
from HierarchicalCutSelector.neural.autograd import Params


@dataclass
class Adam:
    """Adam with bias correction; ``step`` returns a new parameter snapshot."""
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def step(self, params: Params, grads: Params) -> Params:
        """Descend along *grads*; callers maximising an objective pass its negation."""
        self.t += 1
        updated: Params = {}
        for name, value in params.items():
            g = grads.get(name)
            if g is None:
                updated[name] = value
                continue
            if g.shape != value.shape:
                raise ShapeMismatch(f"Gradient for {name} has shape {g.shape}, expected {value.shape}")
            m = self.beta1 * self.m.get(name, np.zeros_like(value)) + (1.0 - self.beta1) * g
            v = self.beta2 * self.v.get(name, np.zeros_like(value)) + (1.0 - self.beta2) * g * g
            self.m[name], self.v[name] = m, v
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            updated[name] = value - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return updated


def adam_step(params: Params, grads: Params, state: Adam) -> Params:
    return state.step(params, grads)
