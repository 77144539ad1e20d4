"""
Database models for the experiment results store.
"""

import math
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from sqlalchemy import String
from sqlalchemy.orm import Mapped, mapped_column

from HierarchicalCutSelector.models.dtos import SolveStatus
from HierarchicalCutSelector.utils.database import Base


utcnow = lambda: datetime.now(timezone.utc).replace(tzinfo=None)


def finite_or_none(value: Optional[float]) -> Optional[float]:
    """SQL has no infinities or NaN; store them as NULL."""
    if value is None or not math.isfinite(value):
        return None
    return float(value)


class EvalRecord(Base):
    """One solve of one instance by one selector under one seed."""

    __tablename__ = 'eval_records'

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True, init=False)
    run_id: Mapped[str] = mapped_column(String(64), nullable=False, index=True)
    method: Mapped[str] = mapped_column(String(64), nullable=False, index=True)
    instance: Mapped[str] = mapped_column(String(200), nullable=False)
    seed: Mapped[int] = mapped_column(nullable=False)
    time: Mapped[float] = mapped_column(nullable=False)
    work_units: Mapped[int] = mapped_column(nullable=False)
    nodes: Mapped[int] = mapped_column(nullable=False)
    pd_integral: Mapped[float] = mapped_column(nullable=False)
    status: Mapped[SolveStatus] = mapped_column(nullable=False)
    pd_gap: Mapped[Optional[float]] = mapped_column(nullable=True, default=None)
    wall_time: Mapped[float] = mapped_column(nullable=False, default=0.0)
    cuts_added: Mapped[int] = mapped_column(nullable=False, default=0)
    numerical_trouble: Mapped[bool] = mapped_column(nullable=False, default=False)
    created_at: Mapped[datetime] = mapped_column(default_factory=utcnow, nullable=False, init=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'run_id': self.run_id,
            'method': self.method,
            'instance': self.instance,
            'seed': self.seed,
            'time': self.time,
            'work_units': self.work_units,
            'nodes': self.nodes,
            'pd_gap': self.pd_gap,
            'pd_integral': self.pd_integral,
            'status': self.status.value,
            'wall_time': self.wall_time,
            'cuts_added': self.cuts_added,
            'numerical_trouble': self.numerical_trouble,
        }

    def __repr__(self) -> str:
        return f"<EvalRecord(method='{self.method}', instance='{self.instance}', seed={self.seed})>"


class EpochMetric(Base):
    """Per-epoch training metrics of one run."""

    __tablename__ = 'epoch_metrics'

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True, init=False)
    run_id: Mapped[str] = mapped_column(String(64), nullable=False, index=True)
    epoch: Mapped[int] = mapped_column(nullable=False)
    mean_reward: Mapped[float] = mapped_column(nullable=False)
    eval_metric: Mapped[Optional[float]] = mapped_column(nullable=True, default=None)
    wall_time: Mapped[float] = mapped_column(nullable=False, default=0.0)
    created_at: Mapped[datetime] = mapped_column(default_factory=utcnow, nullable=False, init=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'run_id': self.run_id,
            'epoch': self.epoch,
            'mean_reward': self.mean_reward,
            'eval_metric': self.eval_metric,
            'wall_time': self.wall_time,
        }

    def __repr__(self) -> str:
        return f"<EpochMetric(run_id='{self.run_id}', epoch={self.epoch})>"
