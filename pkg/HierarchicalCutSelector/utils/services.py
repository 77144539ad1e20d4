"""
Service layer for evaluation runs, reports and training metrics.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from sqlalchemy import delete, func, select
from sqlalchemy.orm import Session

from HierarchicalCutSelector.exceptions import UndefinedImprovement
from HierarchicalCutSelector.models import EpochMetric, EvalRecord, finite_or_none
from HierarchicalCutSelector.models.dtos import MethodSummary, SelectorName, SolveConfig
from HierarchicalCutSelector.policies.rules import CutSelector
from HierarchicalCutSelector.solver.lp import MilpInstance
from HierarchicalCutSelector.solver.metrics import format_improvement, improvement
from HierarchicalCutSelector.solver.search import SolveStats, branch_and_cut

logger = logging.getLogger(__name__)

SelectorFactory = Callable[[], CutSelector]

RECORD_FIELDS = [
    'run_id', 'method', 'instance', 'seed', 'time', 'work_units', 'nodes',
    'pd_gap', 'pd_integral', 'status', 'wall_time', 'cuts_added', 'numerical_trouble',
]


def _solve(job: Tuple[str, SelectorFactory, MilpInstance, SolveConfig]) -> SolveStats:
    _, factory, instance, config = job
    return branch_and_cut(instance, factory(), config)


class EvaluationService:
    """Runs selectors over instances and seeds and stores one row per solve."""

    def __init__(self, db_session: Session) -> None:
        self.db = db_session

    def record(self, run_id: str, method: str, instance: str, seed: int, stats: SolveStats) -> EvalRecord:
        """Store the outcome of one solve."""
        record = EvalRecord(
            run_id=run_id,
            method=method,
            instance=instance,
            seed=seed,
            time=stats.solve_time,
            work_units=stats.work_units,
            nodes=stats.nodes,
            pd_integral=stats.pd_integral,
            status=stats.status,
            pd_gap=finite_or_none(stats.pd_gap),
            wall_time=stats.wall_time,
            cuts_added=sum(len(r) for r in stats.cuts_added),
            numerical_trouble=stats.numerical_trouble,
        )
        self.db.add(record)
        return record

    def evaluate(
        self,
        run_id: str,
        instances: Sequence[MilpInstance],
        selectors: Mapping[str, SelectorFactory],
        seeds: Sequence[int],
        solve_config: SolveConfig,
        workers: int = 1,
    ) -> List[EvalRecord]:
        """
        Solve every instance with every selector under every seed.

        Solves run on a thread pool; rows are written in job order afterwards.
        """
        jobs = [
            (method, factory, instance, solve_config.model_copy(update={'seed': seed}))
            for method, factory in selectors.items()
            for instance in instances
            for seed in seeds
        ]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve, jobs))

        records = []
        for (method, _, instance, config), stats in zip(jobs, results):
            if stats.numerical_trouble:
                logger.warning("Numerical trouble while solving %s with %s", instance.name, method)
            records.append(self.record(run_id, method, instance.name, config.seed, stats))
        self.db.commit()
        logger.info("Stored %d evaluation rows for run %s", len(records), run_id)
        return records

    def get_records(self, run_id: str, method: Optional[str] = None) -> List[EvalRecord]:
        stmt = select(EvalRecord).where(EvalRecord.run_id == run_id)
        if method is not None:
            stmt = stmt.where(EvalRecord.method == method)
        return list(self.db.scalars(stmt.order_by(EvalRecord.id)).all())

    def delete_run(self, run_id: str) -> int:
        result = self.db.execute(delete(EvalRecord).where(EvalRecord.run_id == run_id))
        self.db.commit()
        return result.rowcount


def write_records_csv(path: Path, records: Iterable[EvalRecord]) -> None:
    with open(path, 'w', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=RECORD_FIELDS)
        writer.writeheader()
        for record in records:
            writer.writerow(record.to_dict())


def read_records_csv(path: Path) -> List[Dict[str, str]]:
    with open(path, newline='') as handle:
        return list(csv.DictReader(handle))


def _mean_std(values: Sequence[float]) -> Tuple[float, float]:
    if not values:
        return float('nan'), float('nan')
    arr = np.asarray(values, dtype=float)
    return float(arr.mean()), float(arr.std())


def summarize_rows(rows: Sequence[Mapping], baseline: str = SelectorName.NOCUTS.value) -> List[MethodSummary]:
    """
    Mean and population stdev per method, plus Improvement over *baseline*.

    Accepts ORM ``to_dict()`` rows or rows read back from the raw CSV.
    Improvement is ``None`` when the baseline is absent or its mean is zero.
    """
    by_method: Dict[str, List[Mapping]] = {}
    for row in rows:
        by_method.setdefault(str(row['method']), []).append(row)

    def column(group: Sequence[Mapping], name: str) -> List[float]:
        return [float(r[name]) for r in group if r[name] not in (None, '')]

    summaries = []
    for method, group in by_method.items():
        time_mean, time_std = _mean_std(column(group, 'time'))
        work_mean, work_std = _mean_std(column(group, 'work_units'))
        nodes_mean, nodes_std = _mean_std(column(group, 'nodes'))
        gaps = column(group, 'pd_gap')
        gap_mean, gap_std = _mean_std(gaps) if gaps else (None, None)
        pdi_mean, pdi_std = _mean_std(column(group, 'pd_integral'))
        summaries.append(MethodSummary(
            method=method, runs=len(group),
            time_mean=time_mean, time_std=time_std,
            work_mean=work_mean, work_std=work_std,
            nodes_mean=nodes_mean, nodes_std=nodes_std,
            pd_gap_mean=gap_mean, pd_gap_std=gap_std,
            pd_integral_mean=pdi_mean, pd_integral_std=pdi_std,
        ))

    base = next((s for s in summaries if s.method == baseline), None)
    if base is None:
        return summaries
    for summary in summaries:
        for attr, metric in (('improvement_time', 'time_mean'), ('improvement_pd_integral', 'pd_integral_mean')):
            try:
                value = improvement(getattr(base, metric), getattr(summary, metric))
            except UndefinedImprovement:
                value = None
            setattr(summary, attr, value)
    return summaries


class ReportService:
    """Aggregates stored evaluation rows into per-method summaries."""

    def __init__(self, db_session: Session) -> None:
        self.db = db_session

    def list_runs(self) -> List[Tuple[str, int]]:
        stmt = select(EvalRecord.run_id, func.count(EvalRecord.id)).group_by(EvalRecord.run_id).order_by(EvalRecord.run_id)
        return [(run_id, count) for run_id, count in self.db.execute(stmt).all()]

    def summarize(self, run_id: str, baseline: str = SelectorName.NOCUTS.value) -> List[MethodSummary]:
        records = self.db.scalars(select(EvalRecord).where(EvalRecord.run_id == run_id).order_by(EvalRecord.id)).all()
        if not records:
            raise ValueError(f"No evaluation rows for run {run_id}")
        return summarize_rows([r.to_dict() for r in records], baseline)


def _cell(mean: Optional[float], std: Optional[float]) -> str:
    if mean is None:
        return 'NA'
    return f'{mean:.2f} ({std:.2f})'


def format_table(summaries: Sequence[MethodSummary]) -> str:
    """Human-readable table: mean (stdev) per metric, Improvement in percent."""
    header = ['Method', 'Time', 'Work', 'Nodes', 'PD gap', 'PD integral', 'Impr. time', 'Impr. PD integral']
    lines = [header]
    for s in summaries:
        lines.append([
            s.method,
            _cell(s.time_mean, s.time_std),
            _cell(s.work_mean, s.work_std),
            _cell(s.nodes_mean, s.nodes_std),
            _cell(s.pd_gap_mean, s.pd_gap_std),
            _cell(s.pd_integral_mean, s.pd_integral_std),
            format_improvement(s.improvement_time),
            format_improvement(s.improvement_pd_integral),
        ])
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    return '\n'.join('  '.join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in lines)


def write_summary_csv(path: Path, summaries: Sequence[MethodSummary]) -> None:
    fields = list(MethodSummary.model_fields)
    with open(path, 'w', newline='') as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        for summary in summaries:
            writer.writerow(summary.model_dump())


@dataclass
class OrderSpread:
    instance: str
    candidates: int
    mean: float
    std: float


class OrderStudyService:
    """Solves each instance under several random cut orders and reports the spread."""

    def __init__(self, db_session: Session) -> None:
        self.db = db_session
        self.evaluations = EvaluationService(db_session)

    def run(
        self,
        run_id: str,
        instances: Sequence[MilpInstance],
        method: str,
        factory: SelectorFactory,
        n_orders: int,
        solve_config: SolveConfig,
        workers: int = 1,
    ) -> List[OrderSpread]:
        """
        Solve every instance ``n_orders`` times; order ``k`` uses seed ``config.seed + k``.

        Returns per-instance mean and population stdev of the PD integral.
        """
        seeds = [solve_config.seed + k for k in range(n_orders)]
        jobs = [(method, factory, inst, solve_config.model_copy(update={'seed': s})) for inst in instances for s in seeds]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve, jobs))

        candidates: Dict[str, int] = {}
        for (_, _, instance, config), stats in zip(jobs, results):
            candidates[instance.name] = stats.pool_sizes[0] if stats.pool_sizes else 0
            self.evaluations.record(run_id, method, instance.name, config.seed, stats)
        self.db.commit()
        return [
            OrderSpread(name, candidates.get(name, 0), mean, std)
            for name, (mean, std) in self.spread(run_id, method).items()
        ]

    def spread(self, run_id: str, method: str) -> Dict[str, Tuple[float, float]]:
        """Per-instance mean and stdev of the stored PD integrals."""
        grouped: Dict[str, List[float]] = {}
        for record in self.evaluations.get_records(run_id, method):
            grouped.setdefault(record.instance, []).append(record.pd_integral)
        return {name: _mean_std(values) for name, values in grouped.items()}


class TrainingService:
    """Stores and reads per-epoch training metrics."""

    def __init__(self, db_session: Session) -> None:
        self.db = db_session

    def record_epoch(
        self, run_id: str, epoch: int, mean_reward: float, eval_metric: Optional[float], wall_time: float
    ) -> EpochMetric:
        metric = EpochMetric(
            run_id=run_id,
            epoch=epoch,
            mean_reward=mean_reward,
            eval_metric=finite_or_none(eval_metric),
            wall_time=wall_time,
        )
        self.db.add(metric)
        self.db.commit()
        return metric

    def get_epochs(self, run_id: str) -> List[EpochMetric]:
        stmt = select(EpochMetric).where(EpochMetric.run_id == run_id).order_by(EpochMetric.epoch)
        return list(self.db.scalars(stmt).all())
