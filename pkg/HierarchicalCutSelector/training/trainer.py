"""
Hierarchical policy-gradient training of the cut-selection policy.

Each epoch samples a batch of instances, rolls the stochastic policy out in
the solver, turns the solve statistics into rewards, and takes one REINFORCE
step: theta2 every epoch, theta1 only every ``delay_freq`` epochs.
"""

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from HierarchicalCutSelector.exceptions import DegenerateState, NonFiniteDetected
from HierarchicalCutSelector.features import CutSelState
from HierarchicalCutSelector.models.dtos import DecodeMode, PolicyVariant, RewardKind, SolveConfig, TrainConfig
from HierarchicalCutSelector.neural.autograd import Params, check_finite
from HierarchicalCutSelector.neural.optim import Adam
from HierarchicalCutSelector.policies.hem import HemAction, HemParams, HemSelector, log_prob_gradients
from HierarchicalCutSelector.policies.rules import NoCuts
from HierarchicalCutSelector.solver.lp import MilpInstance
from HierarchicalCutSelector.solver.metrics import pd_integral
from HierarchicalCutSelector.solver.search import SolveStats, branch_and_cut

logger = logging.getLogger(__name__)

MAX_DRAW_FACTOR = 10
METRICS_HEADER = ['epoch', 'mean_reward', 'eval_metric', 'wall_time']


@dataclass(frozen=True)
class RolloutSample:
    """One rollout: the decisions taken at the root and the reward they earned."""
    instance_name: str
    decisions: Tuple[Tuple[CutSelState, HemAction], ...]
    reward: float
    raw_reward: float

    @property
    def state(self) -> CutSelState:
        return self.decisions[0][0]

    @property
    def action(self) -> HemAction:
        return self.decisions[0][1]

    @property
    def k(self) -> float:
        return self.action.k

    @property
    def logp_h(self) -> float:
        return sum(a.logp_h for _, a in self.decisions)

    @property
    def logp_l(self) -> float:
        return sum(a.logp_l for _, a in self.decisions)


@dataclass
class EpochRecord:
    epoch: int
    mean_reward: float
    eval_metric: float
    wall_time: float


@dataclass
class TrainResult:
    params: HemParams
    best_params: HemParams
    metrics: List[EpochRecord] = field(default_factory=list)
    checkpoints: List[Path] = field(default_factory=list)
    theta1_updates: int = 0


def compute_reward(stats: SolveStats, kind: RewardKind, solve_config: SolveConfig) -> float:
    """
    Turn a solve into a scalar reward.

    ``NEG_PD_INTEGRAL`` integrates over the configured time limit and
    ``NEG_DUAL_BOUND_IMPROVEMENT`` is ``-(root bound after cuts - before)``.
    """
    if kind == RewardKind.NEG_SOLVE_TIME:
        return -stats.solve_time
    if kind == RewardKind.NEG_PD_INTEGRAL:
        return -pd_integral(stats, solve_config.time_limit)
    return -stats.root_dual_improvement


def reward_scale(
    pool: Sequence[MilpInstance], kind: RewardKind, solve_config: SolveConfig
) -> float:
    """Mean absolute NoCuts reward over *pool*; 1.0 when that is zero."""
    rewards = [abs(compute_reward(branch_and_cut(inst, NoCuts(), solve_config), kind, solve_config)) for inst in pool]
    scale = float(np.mean(rewards)) if rewards else 0.0
    return scale if scale > 0 and math.isfinite(scale) else 1.0


def rollout(
    params: HemParams,
    instance: MilpInstance,
    solve_config: SolveConfig,
    kind: RewardKind,
    scale: float = 1.0,
) -> Optional[RolloutSample]:
    """Solve *instance* with the sampling policy; ``None`` when the root pool is empty."""
    selector = HemSelector(params, mode=DecodeMode.SAMPLE, record=True)
    stats = branch_and_cut(instance, selector, solve_config)
    if not selector.history:
        return None
    raw = compute_reward(stats, kind, solve_config)
    return RolloutSample(instance.name, tuple(selector.history), raw / scale, raw)


def collect_batch(
    params: HemParams,
    instance_pool: Sequence[MilpInstance],
    config: TrainConfig,
    solve_config: SolveConfig,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> List[RolloutSample]:
    """
    Draw ``config.batch_size`` rollouts, sampling instances with replacement.

    Draws are fixed from *rng* before any rollout runs, so the batch does not
    depend on the number of workers. Instances without candidate cuts are
    logged and redrawn.
    """
    if not instance_pool:
        raise ValueError("Instance pool is empty")
    samples: List[RolloutSample] = []
    draws = 0
    limit = MAX_DRAW_FACTOR * config.batch_size
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        while len(samples) < config.batch_size:
            needed = config.batch_size - len(samples)
            if draws + needed > limit:
                raise DegenerateState("Too many instances without candidate cuts; cannot fill the batch")
            jobs = []
            for _ in range(needed):
                instance = instance_pool[int(rng.integers(len(instance_pool)))]
                seed = int(rng.integers(2 ** 31 - 1))
                jobs.append((instance, solve_config.model_copy(update={'seed': seed})))
            draws += needed
            results = pool.map(lambda job: rollout(params, job[0], job[1], config.reward, scale), jobs)
            for (instance, _), sample in zip(jobs, results):
                if sample is None:
                    logger.warning("Skipping %s: empty candidate pool at the root", instance.name)
                    continue
                samples.append(sample)
    return samples


def _zeros_like(params: Params) -> Params:
    return {name: np.zeros_like(value) for name, value in params.items()}


def advantages(rewards: np.ndarray, baseline: bool) -> np.ndarray:
    """Rewards minus the batch mean; exactly zero when all rewards agree."""
    rewards = np.asarray(rewards, dtype=float)
    if not baseline or rewards.size == 0:
        return rewards
    shifted = rewards - rewards[0]
    return shifted - shifted.mean()


def sample_gradients(params: HemParams, sample: RolloutSample) -> Tuple[Params, Params]:
    """Sum of ``grad log pi_h`` and ``grad log pi_l`` over the sample's decisions."""
    g1, g2 = _zeros_like(params.theta1), _zeros_like(params.theta2)
    for state, action in sample.decisions:
        d1, d2, _, _ = log_prob_gradients(params, state, action)
        for name in g1:
            g1[name] += d1[name]
        for name in g2:
            g2[name] += d2[name]
    return g1, g2


def estimate_gradients(
    params: HemParams, batch: Sequence[RolloutSample], baseline: bool = True
) -> Tuple[Params, Params]:
    """
    Monte-Carlo estimates of the ascent directions for theta1 and theta2.

    Raises:
        ValueError: for an empty batch.
        NonFiniteDetected: when any gradient entry is NaN or infinite.
    """
    if not batch:
        raise ValueError("Batch is empty")
    adv = advantages(np.array([s.reward for s in batch]), baseline)
    g1, g2 = _zeros_like(params.theta1), _zeros_like(params.theta2)
    for sample, a in zip(batch, adv):
        if a == 0.0:
            continue
        d1, d2 = sample_gradients(params, sample)
        for name in g1:
            g1[name] += a * d1[name]
        for name in g2:
            g2[name] += a * d2[name]
    for grads in (g1, g2):
        for name in grads:
            grads[name] /= len(batch)
    check_finite(g1, 'theta1 gradient')
    check_finite(g2, 'theta2 gradient')
    return g1, g2


def updates_theta1(params: HemParams, config: TrainConfig, epoch_index: int) -> bool:
    return params.variant == PolicyVariant.HEM and epoch_index % config.delay_freq == config.delay_freq - 1


def hierarchical_pg_step(
    params: HemParams,
    batch: Sequence[RolloutSample],
    optimizers: Tuple[Adam, Adam],
    config: TrainConfig,
    epoch_index: int,
) -> HemParams:
    """
    One policy-gradient ascent step.

    ``optimizers`` is ``(theta1_adam, theta2_adam)``. Nothing is updated when
    the gradient is not finite.
    """
    g1, g2 = estimate_gradients(params, batch, config.baseline)
    adam1, adam2 = optimizers
    theta2 = adam2.step(params.theta2, {n: -g for n, g in g2.items()})
    theta1 = params.theta1
    if updates_theta1(params, config, epoch_index):
        theta1 = adam1.step(params.theta1, {n: -g for n, g in g1.items()})
    return params.replace(theta1=theta1, theta2=theta2)


def greedy_metric(params: HemParams, pool: Sequence[MilpInstance], solve_config: SolveConfig) -> float:
    """Mean PD integral of greedy decoding over *pool*."""
    if not pool:
        return math.nan
    selector = HemSelector(params, mode=DecodeMode.GREEDY)
    return float(np.mean([branch_and_cut(inst, selector, solve_config).pd_integral for inst in pool]))


def write_metrics_csv(path: Path, records: Sequence[EpochRecord]) -> None:
    with open(path, 'w', newline='') as handle:
        writer = csv.writer(handle)
        writer.writerow(METRICS_HEADER)
        for r in records:
            writer.writerow([r.epoch, repr(r.mean_reward), repr(r.eval_metric), f'{r.wall_time:.3f}'])


def train(
    params_init: HemParams,
    train_pool: Sequence[MilpInstance],
    config: TrainConfig,
    solve_config: SolveConfig,
    eval_pool: Sequence[MilpInstance] = (),
    out_dir: Optional[Path] = None,
    on_epoch: Optional[Callable[[EpochRecord], None]] = None,
) -> TrainResult:
    """
    Run ``config.epochs`` epochs of rollout collection and policy updates.

    Args:
        params_init: Starting parameters; returned untouched when epochs is 0.
        train_pool: Instances rollouts are drawn from.
        config: Training hyperparameters.
        solve_config: Limits and clock for every rollout.
        eval_pool: Held-out instances for the greedy metric.
        out_dir: When set, receives ``metrics.csv`` and checkpoints.
        on_epoch: Called with each epoch record (the CLI stores them).

    Raises:
        NonFiniteDetected: after saving ``last_good.json`` under *out_dir*.
    """
    result = TrainResult(params=params_init, best_params=params_init)
    if config.epochs == 0:
        return result

    rng = np.random.default_rng(config.seed)
    scale = reward_scale(train_pool, config.reward, solve_config) if config.normalize_rewards else 1.0
    logger.info("Reward scale %.6g for %d training instances", scale, len(train_pool))
    optimizers = (Adam(lr=config.lr_high), Adam(lr=config.lr_low))
    checkpoint_dir = Path(out_dir) / 'checkpoints' if out_dir else None

    params = params_init
    best_reward = -math.inf
    start = time.perf_counter()
    for epoch in range(config.epochs):
        batch = collect_batch(params, train_pool, config, solve_config, rng, scale)
        try:
            new_params = hierarchical_pg_step(params, batch, optimizers, config, epoch)
        except NonFiniteDetected:
            logger.error("Non-finite gradient at epoch %d; keeping the last good parameters", epoch)
            if checkpoint_dir:
                params.save(checkpoint_dir / 'last_good.json', {'epoch': epoch})
            raise
        if updates_theta1(params, config, epoch):
            result.theta1_updates += 1

        mean_reward = float(np.mean([s.raw_reward for s in batch]))
        if mean_reward > best_reward:
            best_reward = mean_reward
            result.best_params = params
        params = new_params

        eval_metric = greedy_metric(params, list(eval_pool)[:config.eval_size], solve_config)
        record = EpochRecord(epoch, mean_reward, eval_metric, time.perf_counter() - start)
        result.metrics.append(record)
        logger.info("Epoch %d: mean reward %.6g, eval %.6g", epoch, mean_reward, eval_metric)
        if on_epoch:
            on_epoch(record)

        if checkpoint_dir and (epoch + 1) % config.checkpoint_every == 0:
            path = checkpoint_dir / f'epoch_{epoch + 1:04d}.json'
            params.save(path, {'epoch': epoch + 1})
            result.checkpoints.append(path)

    result.params = params
    if out_dir:
        write_metrics_csv(Path(out_dir) / 'metrics.csv', result.metrics)
        params.save(Path(out_dir) / 'final.json', {'epoch': config.epochs})
        result.best_params.save(Path(out_dir) / 'best.json', {'mean_reward': best_reward})
    return result
