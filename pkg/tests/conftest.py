"""
Pytest configuration file for the cut-selection experiments.
Defines fixtures and test configuration.

Note: Pytest configuration (markers, coverage, etc.) is in pyproject.toml
under [tool.pytest.ini_options]. This file only contains fixtures.
"""

import itertools
import os
import tempfile

import numpy as np
import pytest
from click.testing import CliRunner
from sqlalchemy import delete as sa_delete

from HierarchicalCutSelector import create_cli
from HierarchicalCutSelector.config import get_config_class
from HierarchicalCutSelector.features import NUM_FEATURES, CutSelState
from HierarchicalCutSelector.models import EpochMetric, EvalRecord
from HierarchicalCutSelector.models.dtos import ClockKind, SolveConfig
from HierarchicalCutSelector.solver.lp import MilpInstance, Row
from HierarchicalCutSelector.utils.database import init_database, make_engine, make_session


def _clear_tables(session):
    """Delete all rows from the results tables."""
    session.execute(sa_delete(EvalRecord))
    session.execute(sa_delete(EpochMetric))
    session.commit()


def _enumerate_optimum(instance: MilpInstance):
    """
    Brute-force optimum of a small bounded pure-integer instance.

    Returns ``(value, point)``, or ``(inf, None)`` when nothing is feasible.
    """
    ranges = [range(int(lo), int(hi) + 1) for lo, hi in zip(instance.lower, instance.upper)]
    best, best_x = float('inf'), None
    for point in itertools.product(*ranges):
        x = np.array(point, dtype=float)
        if instance.is_feasible(x):
            value = float(instance.cost @ x)
            if value < best:
                best, best_x = value, x
    return best, best_x


@pytest.fixture(scope='session')
def engine():
    """
    Create a temporary SQLite results store.
    This fixture is session-scoped, so it's created once per test session.
    """
    db_fd, db_path = tempfile.mkstemp(suffix='.db')
    os.close(db_fd)

    engine = make_engine(f'sqlite:///{db_path}')
    init_database(engine)

    yield engine

    engine.dispose()
    os.unlink(db_path)


@pytest.fixture(scope='function')
def db(engine):
    """
    Provide a database session for tests.
    Tables are emptied before and after each test.
    """
    session = make_session(engine)
    _clear_tables(session)
    yield session
    session.rollback()
    _clear_tables(session)
    session.close()


@pytest.fixture(scope='function')
def runner():
    """Create a CLI runner for testing the command group."""
    return CliRunner()


@pytest.fixture(scope='function')
def cli():
    """The command group bound to the testing preset."""
    return create_cli(config_class=get_config_class('testing'))


@pytest.fixture
def enumerate_optimum():
    return _enumerate_optimum


@pytest.fixture
def solve_config():
    """Deterministic work-unit clock with limits far beyond what the toy models need."""
    return SolveConfig(time_limit=1e6, node_limit=20_000, clock=ClockKind.WORK, seed=0)


@pytest.fixture
def half_instance():
    """
    ``min -(x0 + x1)`` subject to ``2 x0 + 2 x1 <= 3`` over binaries.

    The relaxation sits at ``x0 + x1 = 1.5``; the integer optimum is -1.
    """
    return MilpInstance(
        name='half',
        c=(-1.0, -1.0),
        rows=(Row((0, 1), (2.0, 2.0), 3.0),),
        integer_set=(0, 1),
        lower=(0.0, 0.0),
        upper=(1.0, 1.0),
    )


@pytest.fixture
def small_knapsack():
    """Three-item knapsack with a fractional relaxation; optimum -9 (item 0 with either other item)."""
    return MilpInstance(
        name='knap3',
        c=(-5.0, -4.0, -4.0),
        rows=(Row((0, 1, 2), (4.0, 3.0, 3.0), 7.0),),
        integer_set=(0, 1, 2),
        lower=(0.0, 0.0, 0.0),
        upper=(1.0, 1.0, 1.0),
    )


@pytest.fixture
def random_state():
    """Five candidate cuts with random features and shuffled ids."""
    rng = np.random.default_rng(7)
    return CutSelState(rng.normal(size=(5, NUM_FEATURES)), (4, 0, 3, 1, 2))
