"""
Solver performance metrics: primal-dual gap integral and Improvement.
"""

import bisect
import math
from typing import Optional, Sequence, Tuple

from HierarchicalCutSelector.exceptions import UndefinedImprovement

GAP_INIT = 100.0


def _bound_at(events: Sequence[Tuple[float, float]], times: Sequence[float], t: float) -> Optional[float]:
    pos = bisect.bisect_right(times, t) - 1
    return events[pos][1] if pos >= 0 else None


def pd_integral(stats, horizon: float, gap_init: Optional[float] = None) -> float:
    """
    Integrate the primal-dual gap step function over ``[0, horizon]``.

    While either bound is still unknown the gap is *gap_init* (default 100,
    or ``stats.gap_init`` when the stats carry one). Once the dual bound
    meets the primal bound the gap, and so the contribution, is zero.

    Args:
        stats: Anything with ``primal_events`` and ``dual_events`` lists of
            ``(time, bound)`` pairs ordered by time.
        horizon: Upper end of the integration window, must be positive.
        gap_init: Override for the unknown-bound gap.

    Returns:
        The non-negative area under the gap curve.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if gap_init is None:
        gap_init = getattr(stats, 'gap_init', GAP_INIT)

    primal = sorted(stats.primal_events, key=lambda e: e[0])
    dual = sorted(stats.dual_events, key=lambda e: e[0])
    primal_times = [t for t, _ in primal]
    dual_times = [t for t, _ in dual]

    breakpoints = sorted({0.0, *(t for t in primal_times + dual_times if 0.0 < t < horizon)})
    total = 0.0
    for start, end in zip(breakpoints, breakpoints[1:] + [horizon]):
        p = _bound_at(primal, primal_times, start)
        d = _bound_at(dual, dual_times, start)
        gap = gap_init if p is None or d is None else max(p - d, 0.0)
        total += gap * (end - start)
    return total


def final_gap(stats) -> Optional[float]:
    """Last primal minus last dual bound, ``None`` when either is missing."""
    if not stats.primal_events or not stats.dual_events:
        return None
    return max(stats.primal_events[-1][1] - stats.dual_events[-1][1], 0.0)


def improvement(metric_nocuts: float, metric_method: float) -> float:
    """
    Relative improvement of a method over NoCuts.

    Raises:
        UndefinedImprovement: when the NoCuts metric is zero.
    """
    if metric_nocuts == 0:
        raise UndefinedImprovement("NoCuts metric is zero; Improvement is undefined")
    return (metric_nocuts - metric_method) / metric_nocuts


def format_improvement(value: Optional[float]) -> str:
    """Render an Improvement ratio as a percentage with one decimal."""
    if value is None or not math.isfinite(value):
        return 'NA'
    return f'{100.0 * value:.1f}%'
