"""
Score-based policy: an MLP scores each cut independently and the top
``ceil(ratio * N)`` cuts are added by descending score.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from HierarchicalCutSelector.features import NUM_FEATURES, CutSelState
from HierarchicalCutSelector.neural.autograd import Params, check_finite
from HierarchicalCutSelector.neural.checkpoint import load_checkpoint, save_checkpoint
from HierarchicalCutSelector.neural.layers import Mlp
from HierarchicalCutSelector.policies.rules import DEFAULT_RATIO, top_by_score
from HierarchicalCutSelector.solver.cuts import Cut

CHECKPOINT_KIND = 'sbp'


def scorer_network(hidden_size: int) -> Mlp:
    return Mlp('scorer', [NUM_FEATURES, hidden_size, hidden_size, 1])


@dataclass
class SbpParams:
    weights: Params
    ratio: float = DEFAULT_RATIO
    hidden_size: int = 128

    @classmethod
    def initialize(cls, rng: np.random.Generator, hidden_size: int = 128, ratio: float = DEFAULT_RATIO) -> 'SbpParams':
        return cls(scorer_network(hidden_size).init(rng), ratio, hidden_size)

    @classmethod
    def zeros(cls, hidden_size: int = 128, ratio: float = DEFAULT_RATIO) -> 'SbpParams':
        template = scorer_network(hidden_size).init(np.random.default_rng(0))
        return cls({k: np.zeros_like(v) for k, v in template.items()}, ratio, hidden_size)

    @property
    def network(self) -> Mlp:
        return scorer_network(self.hidden_size)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.weights[name].ravel() for name in sorted(self.weights)])

    def with_vector(self, vector: np.ndarray) -> 'SbpParams':
        weights: Params = {}
        offset = 0
        for name in sorted(self.weights):
            size = self.weights[name].size
            weights[name] = vector[offset:offset + size].reshape(self.weights[name].shape).copy()
            offset += size
        return SbpParams(weights, self.ratio, self.hidden_size)

    def save(self, path: Path, metadata: Optional[Dict] = None) -> None:
        meta = {'ratio': self.ratio, 'hidden_size': self.hidden_size, **(metadata or {})}
        save_checkpoint(path, CHECKPOINT_KIND, {'scorer': self.weights}, meta)

    @classmethod
    def load(cls, path: Path) -> 'SbpParams':
        _, groups, meta = load_checkpoint(path, CHECKPOINT_KIND)
        return cls(groups['scorer'], float(meta.get('ratio', DEFAULT_RATIO)), int(meta.get('hidden_size', 128)))


def sbp_scores(params: SbpParams, state: CutSelState) -> np.ndarray:
    if state.N == 0:
        return np.zeros(0)
    scores = params.network.predict(params.weights, state.matrix)[:, 0]
    check_finite(scores, 'SBP scores')
    return scores


def sbp_select(params: SbpParams, state: CutSelState, cuts: Sequence[Cut] = ()) -> List[int]:
    return top_by_score(sbp_scores(params, state), state, params.ratio)


class SbpSelector:
    name = 'sbp'

    def __init__(self, params: SbpParams) -> None:
        self.params = params

    def select(self, state, cuts, rng) -> List[int]:
        return sbp_select(self.params, state, cuts)
