"""
Rule-based cut selectors.

Every selector implements ``select(state, cuts, rng)`` and returns cut
positions in the order the cuts should be added. Fixed-ratio rules keep
``ceil(ratio * N)`` cuts.
"""

import math
from typing import List, Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from HierarchicalCutSelector.features import CutSelState
from HierarchicalCutSelector.solver.cuts import Cut

DEFAULT_RATIO = 0.2
COUNT_EPS = 1e-9


@runtime_checkable
class CutSelector(Protocol):
    name: str

    def select(self, state: CutSelState, cuts: Sequence[Cut], rng: np.random.Generator) -> List[int]:
        ...


def ceil_count(ratio: float, n: int) -> int:
    """``ceil(ratio * n)`` robust to float noise such as ``0.2 * 45``."""
    if not 0 < ratio <= 1:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    if n == 0:
        return 0
    return min(n, max(1, math.ceil(ratio * n - COUNT_EPS)))


def _ids(state: CutSelState) -> Sequence[int]:
    return state.cut_ids if len(state.cut_ids) == state.N else range(state.N)


def rank_by_score(scores: np.ndarray, ids: Sequence[int]) -> List[int]:
    """Positions sorted by descending score, ties to the lower cut id."""
    return sorted(range(len(scores)), key=lambda i: (-float(scores[i]), ids[i]))


def top_by_score(scores: np.ndarray, state: CutSelState, ratio: float) -> List[int]:
    return rank_by_score(scores, _ids(state))[:ceil_count(ratio, state.N)]


def select_nv(state: CutSelState, cuts: Sequence[Cut], ratio: float = DEFAULT_RATIO) -> List[int]:
    return top_by_score(state.column('normalized_violation'), state, ratio)


def select_eff(state: CutSelState, cuts: Sequence[Cut], ratio: float = DEFAULT_RATIO) -> List[int]:
    return top_by_score(state.column('efficacy'), state, ratio)


def select_random_all(state: CutSelState, cuts: Sequence[Cut], rng: np.random.Generator) -> List[int]:
    return [int(i) for i in rng.permutation(state.N)]


def select_random_nv(
    state: CutSelState, cuts: Sequence[Cut], ratio: float, rng: np.random.Generator
) -> List[int]:
    chosen = select_nv(state, cuts, ratio)
    return [chosen[int(i)] for i in rng.permutation(len(chosen))]


class NoCuts:
    name = 'nocuts'

    def select(self, state, cuts, rng) -> List[int]:
        return []


class RandomSelector:
    """Random subset of fixed ratio in random order."""
    name = 'random'

    def __init__(self, ratio: float = DEFAULT_RATIO) -> None:
        self.ratio = ratio

    def select(self, state, cuts, rng) -> List[int]:
        return [int(i) for i in rng.permutation(state.N)[:ceil_count(self.ratio, state.N)]]


class NvSelector:
    name = 'nv'

    def __init__(self, ratio: float = DEFAULT_RATIO) -> None:
        self.ratio = ratio

    def select(self, state, cuts, rng) -> List[int]:
        return select_nv(state, cuts, self.ratio)


class EffSelector:
    name = 'eff'

    def __init__(self, ratio: float = DEFAULT_RATIO) -> None:
        self.ratio = ratio

    def select(self, state, cuts, rng) -> List[int]:
        return select_eff(state, cuts, self.ratio)


class RandomAllSelector:
    name = 'random_all'

    def select(self, state, cuts, rng) -> List[int]:
        return select_random_all(state, cuts, rng)


class RandomNvSelector:
    name = 'random_nv'

    def __init__(self, ratio: float = DEFAULT_RATIO) -> None:
        self.ratio = ratio

    def select(self, state, cuts, rng) -> List[int]:
        return select_random_nv(state, cuts, self.ratio, rng)


class ReplaySelector:
    """Replays fixed per-round orders; rounds beyond the script add nothing."""
    name = 'replay'

    def __init__(self, orders: Sequence[Sequence[int]]) -> None:
        self.orders = [list(o) for o in orders]
        self.calls = 0

    def select(self, state, cuts, rng) -> List[int]:
        order: Optional[List[int]] = self.orders[self.calls] if self.calls < len(self.orders) else []
        self.calls += 1
        return [i for i in order if i < state.N]
