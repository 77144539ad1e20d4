"""
Evolution-strategies training of the score-based policy.

Antithetic Gaussian perturbations of the flattened scorer weights are ranked
by fitness (mean reward on a fixed mini-pool) and the centered ranks weight
the search direction.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from HierarchicalCutSelector.models.dtos import EsConfig, RewardKind, SolveConfig
from HierarchicalCutSelector.policies.sbp import SbpParams, SbpSelector
from HierarchicalCutSelector.solver.lp import MilpInstance
from HierarchicalCutSelector.solver.search import branch_and_cut
from HierarchicalCutSelector.training.trainer import compute_reward

logger = logging.getLogger(__name__)

Fitness = Callable[[SbpParams], float]


@dataclass
class EsResult:
    params: SbpParams
    best_fitness: float
    history: List[float] = field(default_factory=list)


def centered_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks mapped to ``[-0.5, 0.5]``; tied values share their mean rank."""
    values = np.asarray(values, dtype=float)
    n = values.size
    if n < 2:
        return np.zeros(n)
    order = np.argsort(values, kind='stable')
    ranks = np.empty(n)
    ranks[order] = np.arange(n, dtype=float)
    for value in np.unique(values):
        tied = values == value
        ranks[tied] = ranks[tied].mean()
    return ranks / (n - 1) - 0.5


def pool_fitness(
    pool: Sequence[MilpInstance], solve_config: SolveConfig, kind: RewardKind, scale: float = 1.0
) -> Fitness:
    """Mean reward of the SBP selector over *pool*."""
    def fitness(params: SbpParams) -> float:
        selector = SbpSelector(params)
        rewards = [compute_reward(branch_and_cut(inst, selector, solve_config), kind, solve_config) for inst in pool]
        return float(np.mean(rewards)) / scale
    return fitness


def es_train_sbp(
    config: EsConfig,
    fitness: Fitness,
    params_init: Optional[SbpParams] = None,
    evaluate: Optional[Callable[[int, SbpParams], None]] = None,
) -> EsResult:
    """
    Optimise SBP weights by antithetic evolution strategies.

    Args:
        config: Population size (even), noise scale, step size, generations.
        fitness: Higher is better; see ``pool_fitness``.
        params_init: Starting weights; initialised from ``config.seed`` if omitted.
        evaluate: Called after every generation with the current weights.

    Returns:
        The best parameters seen among all evaluated vectors.
    """
    rng = np.random.default_rng(config.seed)
    params = params_init or SbpParams.initialize(rng, config.hidden_size, config.ratio)
    theta = params.to_vector()
    pairs = config.population // 2

    best_fitness = fitness(params)
    best = params
    result = EsResult(best, best_fitness, [best_fitness])

    for generation in range(config.generations):
        eps = rng.standard_normal((pairs, theta.size))
        plus, minus = np.empty(pairs), np.empty(pairs)
        for i in range(pairs):
            for sign, out in ((1.0, plus), (-1.0, minus)):
                candidate = params.with_vector(theta + sign * config.sigma * eps[i])
                out[i] = fitness(candidate)
                if out[i] > best_fitness:
                    best_fitness, best = out[i], candidate

        weights = centered_ranks(np.concatenate([plus, minus]))
        direction = (weights[:pairs] - weights[pairs:]) @ eps / (config.population * config.sigma)
        theta = theta + config.step_size * direction
        params = params.with_vector(theta)

        current = fitness(params)
        if current > best_fitness:
            best_fitness, best = current, params
        result.history.append(current)
        logger.info("Generation %d: fitness %.6g (best %.6g)", generation, current, best_fitness)
        if evaluate:
            evaluate(generation, params)
        if not math.isfinite(current):
            logger.warning("Non-finite fitness at generation %d", generation)

    result.params, result.best_fitness = best, best_fitness
    return result
