"""
Branch-and-cut with root-only cut separation.

The root runs ``separation_rounds`` rounds of solve LP, generate Gomory pool,
ask the selector for an ordered subset, append it. Best-first branch and
bound then closes the gap. Every improvement of the global primal or dual
bound is time-stamped so the gap metrics can be recomputed afterwards.
"""

import heapq
import itertools
import logging
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from HierarchicalCutSelector.exceptions import NumericalFailure
from HierarchicalCutSelector.features import featurize
from HierarchicalCutSelector.models.dtos import ClockKind, LpStatus, SolveConfig, SolveStatsDTO, SolveStatus
from HierarchicalCutSelector.solver.cuts import generate_cuts
from HierarchicalCutSelector.solver.lp import LpSolution, MilpInstance, add_rows, solve_lp
from HierarchicalCutSelector.solver.metrics import GAP_INIT, final_gap, pd_integral

logger = logging.getLogger(__name__)

PRUNE_TOL = 1e-9


@dataclass
class SolveStats:
    """Outcome of one branch-and-cut run; times are in the run's clock units."""
    solve_time: float = 0.0
    nodes: int = 0
    status: SolveStatus = SolveStatus.TIME_LIMIT
    primal_events: List[Tuple[float, float]] = field(default_factory=list)
    dual_events: List[Tuple[float, float]] = field(default_factory=list)
    pd_gap: Optional[float] = None
    pd_integral: float = 0.0
    gap_init: float = GAP_INIT
    work_units: int = 0
    wall_time: float = 0.0
    numerical_trouble: bool = False
    root_dual_bounds: List[float] = field(default_factory=list)
    pool_sizes: List[int] = field(default_factory=list)
    cuts_added: List[List[int]] = field(default_factory=list)
    best_solution: Optional[np.ndarray] = None

    @property
    def primal_bound(self) -> float:
        return self.primal_events[-1][1] if self.primal_events else math.inf

    @property
    def dual_bound(self) -> float:
        return self.dual_events[-1][1] if self.dual_events else -math.inf

    @property
    def root_dual_improvement(self) -> float:
        """Root dual bound gained by the separation rounds."""
        if len(self.root_dual_bounds) < 2:
            return 0.0
        return self.root_dual_bounds[-1] - self.root_dual_bounds[0]

    def to_dto(self) -> SolveStatsDTO:
        return SolveStatsDTO(
            time=self.solve_time,
            work_units=self.work_units,
            nodes=self.nodes,
            status=self.status,
            pd_gap=self.pd_gap,
            pd_integral=self.pd_integral,
            primal_events=list(self.primal_events),
            dual_events=list(self.dual_events),
            numerical_trouble=self.numerical_trouble,
        )


class BoundClock:
    """Wall clock or deterministic pivot counter; each LP solve also costs one unit."""

    def __init__(self, kind: ClockKind, work_unit_seconds: float) -> None:
        self.kind = kind
        self.work_unit_seconds = work_unit_seconds
        self.work_units = 0
        self._start = time.perf_counter()

    def charge(self, pivots: int) -> None:
        self.work_units += pivots + 1

    def wall(self) -> float:
        return time.perf_counter() - self._start

    def now(self) -> float:
        if self.kind == ClockKind.WORK:
            return self.work_units * self.work_unit_seconds
        return self.wall()


class _BoundTracker:
    def __init__(self, stats: SolveStats, clock: BoundClock) -> None:
        self.stats = stats
        self.clock = clock

    def primal(self, value: float) -> None:
        if value < self.stats.primal_bound - PRUNE_TOL:
            self.stats.primal_events.append((self.clock.now(), float(value)))

    def dual(self, value: float) -> None:
        if not math.isfinite(value):
            return
        # never report a dual bound above the incumbent
        value = min(value, self.stats.primal_bound)
        if value > self.stats.dual_bound + PRUNE_TOL:
            self.stats.dual_events.append((self.clock.now(), float(value)))


def _objective_is_integral(instance: MilpInstance) -> bool:
    mask = instance.integer_mask
    cost = instance.cost
    return bool(np.all((cost == 0) | mask)) and all(abs(v - round(v)) < 1e-12 for v in cost)


def _prunable(bound: float, incumbent: float, integral_objective: bool) -> bool:
    if not math.isfinite(incumbent) or not math.isfinite(bound):
        return False
    if integral_objective:
        return math.ceil(bound - 1e-6) >= incumbent - PRUNE_TOL
    return bound >= incumbent - PRUNE_TOL


def _check_order(order: Sequence[int], pool_size: int) -> List[int]:
    order = [int(i) for i in order]
    if len(set(order)) != len(order) or any(i < 0 or i >= pool_size for i in order):
        raise ValueError(f"Selector returned invalid indices {order} for a pool of {pool_size}")
    return order


def _solve_node(model: MilpInstance, config: SolveConfig, clock: BoundClock, stats: SolveStats) -> Optional[LpSolution]:
    try:
        lp = solve_lp(model, config.max_lp_iterations)
    except NumericalFailure as exc:
        clock.charge(config.max_lp_iterations)
        stats.numerical_trouble = True
        logger.warning("Pruning node of %s after numerical failure: %s", model.name, exc)
        return None
    clock.charge(lp.iterations)
    return lp


def _most_fractional(lp: LpSolution) -> int:
    best, best_score = -1, math.inf
    for j in lp.fractional_variables():
        frac = lp.x_star[j] - math.floor(lp.x_star[j])
        score = abs(frac - 0.5)
        if score < best_score - 1e-12 or (abs(score - best_score) <= 1e-12 and j < best):
            best, best_score = j, score
    return best


def separate_root(
    instance: MilpInstance,
    selector,
    config: SolveConfig,
    rng: np.random.Generator,
    clock: BoundClock,
    stats: SolveStats,
    tracker: _BoundTracker,
) -> MilpInstance:
    """Run the root separation rounds and return the model with the selected cuts appended."""
    model = instance
    next_id = 0
    for rnd in range(config.separation_rounds):
        lp = _solve_node(model, config, clock, stats)
        if lp is None or lp.status != LpStatus.OPTIMAL:
            break
        stats.root_dual_bounds.append(lp.z_lp)
        tracker.dual(lp.z_lp)

        cuts = generate_cuts(model, lp, first_id=next_id, separation_round=rnd)
        if not cuts:
            break
        next_id += len(cuts)
        stats.pool_sizes.append(len(cuts))

        state = featurize(model, lp, cuts)
        order = _check_order(selector.select(state, cuts, rng), len(cuts))
        stats.cuts_added.append([cuts[i].id for i in order])
        if not order:
            break
        model = add_rows(model, [cuts[i] for i in order])
        logger.debug("Round %d on %s: added %d of %d cuts", rnd, instance.name, len(order), len(cuts))
    return model


def branch_and_cut(instance: MilpInstance, selector, config: Optional[SolveConfig] = None) -> SolveStats:
    """
    Solve *instance* with root cut separation driven by *selector*.

    Args:
        instance: The MILP to solve.
        selector: Any object with ``select(state, cuts, rng) -> indices``.
        config: Limits, clock and seed; defaults to ``SolveConfig()``.

    Returns:
        SolveStats with bound trajectories and derived metrics. Nodes whose
        LP fails numerically are pruned and ``numerical_trouble`` is set.
    """
    config = config or SolveConfig()
    rng = np.random.default_rng(config.seed)
    clock = BoundClock(config.clock, config.work_unit_seconds)
    stats = SolveStats(gap_init=config.gap_init)
    tracker = _BoundTracker(stats, clock)

    model = separate_root(instance, selector, config, rng, clock, stats, tracker)
    cuts_in_model = model.m > instance.m

    integral_objective = _objective_is_integral(instance)
    integer_mask = instance.integer_mask
    incumbent = math.inf
    counter = itertools.count()
    heap = [(-math.inf, next(counter), model.lower, model.upper)]
    stats.status = SolveStatus.OPTIMAL_PROVEN

    while heap:
        if clock.now() >= config.time_limit:
            stats.status = SolveStatus.TIME_LIMIT
            break
        if stats.nodes >= config.node_limit:
            stats.status = SolveStatus.NODE_LIMIT
            break

        bound, _, lower, upper = heapq.heappop(heap)
        if _prunable(bound, incumbent, integral_objective):
            continue
        stats.nodes += 1

        lp = _solve_node(model.with_bounds(lower, upper), config, clock, stats)
        if stats.nodes == 1 and lp is not None and lp.status == LpStatus.OPTIMAL:
            if cuts_in_model or not stats.root_dual_bounds:
                stats.root_dual_bounds.append(lp.z_lp)

        if lp is not None and lp.status == LpStatus.UNBOUNDED:
            stats.numerical_trouble = True
            logger.warning("Unbounded relaxation at a node of %s; node dropped", instance.name)
        elif lp is not None and lp.status == LpStatus.OPTIMAL:
            node_bound = max(bound, lp.z_lp)
            if not _prunable(node_bound, incumbent, integral_objective):
                candidate = lp.x_star.copy()
                candidate[integer_mask] = np.round(candidate[integer_mask])
                branch_var = _most_fractional(lp)

                if branch_var < 0 or instance.is_feasible(candidate):
                    value = float(instance.cost @ candidate)
                    if value < incumbent - PRUNE_TOL:
                        incumbent = value
                        stats.best_solution = candidate
                        tracker.primal(value)

                if branch_var >= 0 and not _prunable(node_bound, incumbent, integral_objective):
                    x_j = lp.x_star[branch_var]
                    down_upper = list(upper)
                    down_upper[branch_var] = float(math.floor(x_j))
                    up_lower = list(lower)
                    up_lower[branch_var] = float(math.ceil(x_j))
                    heapq.heappush(heap, (node_bound, next(counter), lower, tuple(down_upper)))
                    heapq.heappush(heap, (node_bound, next(counter), tuple(up_lower), upper))

        open_bound = min((entry[0] for entry in heap), default=math.inf)
        tracker.dual(min(open_bound, incumbent))

    if stats.status == SolveStatus.OPTIMAL_PROVEN:
        if math.isfinite(incumbent):
            tracker.dual(incumbent)
        else:
            stats.status = SolveStatus.INFEASIBLE

    stats.solve_time = clock.now()
    stats.work_units = clock.work_units
    stats.wall_time = clock.wall()
    stats.pd_gap = final_gap(stats)
    stats.pd_integral = pd_integral(stats, stats.solve_time) if stats.solve_time > 0 else 0.0
    logger.debug(
        "%s: %s after %d nodes, primal %s dual %s",
        instance.name, stats.status, stats.nodes, stats.primal_bound, stats.dual_bound,
    )
    return stats
