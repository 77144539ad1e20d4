"""
Experiment configuration.

Select a preset by setting the ``HCS_PRESET`` environment variable (or the
``--preset`` flag):

    HCS_PRESET=desk     → DeskConfig     (default; instances small enough for a laptop)
    HCS_PRESET=paper    → PaperConfig    (published instance sizes)
    HCS_PRESET=testing  → TestingConfig  (tiny sizes, deterministic work-unit clock)

Any attribute defined on the active config class can be overridden by setting
``HCS_<NAME>`` in the environment or a ``.env`` file, or by a JSON file passed
with ``--config`` (keys case-insensitive).

Unknown preset names fall back to ``DeskConfig``.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from dotenv import load_dotenv

from HierarchicalCutSelector.exceptions import ConfigError
from HierarchicalCutSelector.models.dtos import (
    EsConfig,
    Family,
    GenSpec,
    SolveConfig,
    TrainConfig,
)

# .env values must be in the environment before the classes below read it.
load_dotenv()


def _env(name: str, default: str) -> str:
    return os.environ.get(f'HCS_{name}', default)


def _env_flag(name: str, default: bool) -> bool:
    return _env(name, str(default)).strip().lower() in ('1', 'true', 'yes', 'on')


class Config:
    """Base configuration shared by all presets."""

    # ------------------------------------------------------------------ #
    # Logging and results store                                            #
    # ------------------------------------------------------------------ #
    LOG_LEVEL: str = _env('LOG_LEVEL', 'INFO')
    SQLITE_PATH: str = _env('SQLITE_PATH', 'results.db')
    DATABASE_URL: str | None = os.environ.get('HCS_DATABASE_URL')

    # ------------------------------------------------------------------ #
    # Instance generation                                                  #
    # ------------------------------------------------------------------ #
    SC_ROWS: int = int(_env('SC_ROWS', '30'))
    SC_COLS: int = int(_env('SC_COLS', '60'))
    SC_DENSITY: float = float(_env('SC_DENSITY', '0.05'))
    MIS_NODES: int = int(_env('MIS_NODES', '25'))
    MIS_AFFINITY: int = int(_env('MIS_AFFINITY', '4'))
    MK_ITEMS: int = int(_env('MK_ITEMS', '12'))
    MK_KNAPSACKS: int = int(_env('MK_KNAPSACKS', '3'))
    INSTANCE_COUNT: int = int(_env('INSTANCE_COUNT', '50'))

    # ------------------------------------------------------------------ #
    # Branch and cut                                                       #
    # ------------------------------------------------------------------ #
    TIME_LIMIT: float = float(_env('TIME_LIMIT', '60'))
    NODE_LIMIT: int = int(_env('NODE_LIMIT', '10000'))
    SEPARATION_ROUNDS: int = int(_env('SEPARATION_ROUNDS', '1'))
    GAP_INIT: float = float(_env('GAP_INIT', '100'))
    CLOCK: str = _env('CLOCK', 'work')
    WORK_UNIT_SECONDS: float = float(_env('WORK_UNIT_SECONDS', '0.001'))
    MAX_LP_ITERATIONS: int = int(_env('MAX_LP_ITERATIONS', '5000'))

    # ------------------------------------------------------------------ #
    # Policies and training                                                #
    # ------------------------------------------------------------------ #
    SELECTION_RATIO: float = float(_env('SELECTION_RATIO', '0.2'))
    HIDDEN_SIZE: int = int(_env('HIDDEN_SIZE', '128'))
    BATCH_SIZE: int = int(_env('BATCH_SIZE', '32'))
    EPOCHS: int = int(_env('EPOCHS', '100'))
    LR_LOW: float = float(_env('LR_LOW', '1e-4'))
    LR_HIGH: float = float(_env('LR_HIGH', '5e-4'))
    DELAY_FREQ: int = int(_env('DELAY_FREQ', '2'))
    REWARD: str = _env('REWARD', 'neg_pd_integral')
    BASELINE: bool = _env_flag('BASELINE', True)
    NORMALIZE_REWARDS: bool = _env_flag('NORMALIZE_REWARDS', True)
    VARIANT: str = _env('VARIANT', 'hem')
    WORKERS: int = int(_env('WORKERS', '1'))
    CHECKPOINT_EVERY: int = int(_env('CHECKPOINT_EVERY', '10'))
    EVAL_SIZE: int = int(_env('EVAL_SIZE', '4'))

    ES_POPULATION: int = int(_env('ES_POPULATION', '16'))
    ES_SIGMA: float = float(_env('ES_SIGMA', '0.05'))
    ES_STEP_SIZE: float = float(_env('ES_STEP_SIZE', '0.01'))
    ES_GENERATIONS: int = int(_env('ES_GENERATIONS', '50'))
    ES_MINI_POOL: int = int(_env('ES_MINI_POOL', '4'))

    # ------------------------------------------------------------------ #
    # Evaluation                                                           #
    # ------------------------------------------------------------------ #
    EVAL_SEEDS: str = _env('EVAL_SEEDS', '1,2,3')
    ORDER_STUDY_ORDERS: int = int(_env('ORDER_STUDY_ORDERS', '10'))
    GENERALIZE_SCALES: str = _env('GENERALIZE_SCALES', '2,4')


class DeskConfig(Config):
    """
    Desk-scale preset.

    Inherits all defaults from ``Config``: Set Covering 30×60, MIS on 25
    nodes, Multiple Knapsack with 12 items and 3 knapsacks.
    """


class PaperConfig(Config):
    """Published instance sizes. Expect hours per experiment."""

    SC_ROWS: int = int(_env('SC_ROWS', '500'))
    SC_COLS: int = int(_env('SC_COLS', '1000'))
    MIS_NODES: int = int(_env('MIS_NODES', '500'))
    MK_ITEMS: int = int(_env('MK_ITEMS', '60'))
    MK_KNAPSACKS: int = int(_env('MK_KNAPSACKS', '12'))
    INSTANCE_COUNT: int = int(_env('INSTANCE_COUNT', '10000'))
    TIME_LIMIT: float = float(_env('TIME_LIMIT', '300'))
    GENERALIZE_SCALES: str = _env('GENERALIZE_SCALES', '4,9')


class TestingConfig(Config):
    """
    Test preset.

    Tiny instances and networks so whole pipelines run in seconds.
    """

    SC_ROWS: int = 6
    SC_COLS: int = 10
    SC_DENSITY: float = 0.3
    MIS_NODES: int = 8
    MIS_AFFINITY: int = 2
    MK_ITEMS: int = 5
    MK_KNAPSACKS: int = 2
    INSTANCE_COUNT: int = 5
    TIME_LIMIT: float = 10.0
    NODE_LIMIT: int = 200
    CLOCK: str = 'work'
    HIDDEN_SIZE: int = 4
    BATCH_SIZE: int = 2
    EPOCHS: int = 2
    CHECKPOINT_EVERY: int = 1
    EVAL_SIZE: int = 1
    ES_POPULATION: int = 4
    ES_GENERATIONS: int = 2
    ES_MINI_POOL: int = 2
    EVAL_SEEDS: str = '1,2'
    ORDER_STUDY_ORDERS: int = 3
    GENERALIZE_SCALES: str = '2'


# ------------------------------------------------------------------ #
# Config registry and factory helper                                  #
# ------------------------------------------------------------------ #

_CONFIG_MAP: dict[str, type[Config]] = {
    'desk': DeskConfig,
    'paper': PaperConfig,
    'testing': TestingConfig,
}


def get_config_class(name: str | None = None) -> type[Config]:
    """
    Return the config class that corresponds to *name*.

    When *name* is ``None`` the value of the ``HCS_PRESET`` environment
    variable is used, defaulting to ``'desk'``. Unknown names also fall back
    to ``DeskConfig``.

    Args:
        name: One of ``'desk'``, ``'paper'``, or ``'testing'``.

    Returns:
        A :class:`Config` subclass (not an instance).
    """
    if name is None:
        name = os.environ.get('HCS_PRESET', 'desk')
    return _CONFIG_MAP.get(name.lower(), DeskConfig)


def preset_name(config_class: type[Config]) -> str:
    for name, cls in _CONFIG_MAP.items():
        if cls is config_class:
            return name
    return config_class.__name__


def load_settings(config_class: type[Config], overrides: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """
    Collect the UPPERCASE attributes of *config_class*, then apply *overrides*.

    Raises:
        ConfigError: when an override names an unknown setting.
    """
    settings = {key: getattr(config_class, key) for key in dir(config_class) if key.isupper()}
    for key, value in (overrides or {}).items():
        upper = key.upper()
        if upper not in settings:
            raise ConfigError(f"Unknown setting: {key}")
        settings[upper] = value
    return settings


def read_overrides(path: Optional[Path]) -> Dict[str, Any]:
    """Read a JSON object of setting overrides from *path*."""
    if path is None:
        return {}
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"Config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Malformed config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return data


def config_hash(settings: Mapping[str, Any]) -> str:
    """sha256 of the canonical JSON form of *settings*."""
    canonical = json.dumps(dict(settings), sort_keys=True, default=str, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def parse_ints(value: Any) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    return [int(v) for v in str(value).split(',') if v.strip()]


def parse_floats(value: Any) -> list[float]:
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(v) for v in str(value).split(',') if v.strip()]


# ------------------------------------------------------------------ #
# Typed views                                                         #
# ------------------------------------------------------------------ #

def solve_config(settings: Mapping[str, Any], seed: int = 0) -> SolveConfig:
    return SolveConfig(
        time_limit=settings['TIME_LIMIT'],
        node_limit=settings['NODE_LIMIT'],
        separation_rounds=settings['SEPARATION_ROUNDS'],
        seed=seed,
        gap_init=settings['GAP_INIT'],
        clock=settings['CLOCK'],
        work_unit_seconds=settings['WORK_UNIT_SECONDS'],
        max_lp_iterations=settings['MAX_LP_ITERATIONS'],
    )


def train_config(settings: Mapping[str, Any], seed: int = 0) -> TrainConfig:
    return TrainConfig(
        batch_size=settings['BATCH_SIZE'],
        epochs=settings['EPOCHS'],
        lr_low=settings['LR_LOW'],
        lr_high=settings['LR_HIGH'],
        delay_freq=settings['DELAY_FREQ'],
        reward=settings['REWARD'],
        baseline=settings['BASELINE'],
        normalize_rewards=settings['NORMALIZE_REWARDS'],
        variant=settings['VARIANT'],
        fixed_ratio=settings['SELECTION_RATIO'],
        hidden_size=settings['HIDDEN_SIZE'],
        workers=settings['WORKERS'],
        checkpoint_every=settings['CHECKPOINT_EVERY'],
        eval_size=settings['EVAL_SIZE'],
        seed=seed,
    )


def es_config(settings: Mapping[str, Any], seed: int = 0) -> EsConfig:
    return EsConfig(
        population=settings['ES_POPULATION'],
        sigma=settings['ES_SIGMA'],
        step_size=settings['ES_STEP_SIZE'],
        generations=settings['ES_GENERATIONS'],
        mini_pool=settings['ES_MINI_POOL'],
        ratio=settings['SELECTION_RATIO'],
        hidden_size=settings['HIDDEN_SIZE'],
        seed=seed,
    )


def gen_spec(settings: Mapping[str, Any], family: Family, seed: int = 0, count: Optional[int] = None) -> GenSpec:
    return GenSpec(
        family=family,
        n_rows=settings['SC_ROWS'],
        n_cols=settings['SC_COLS'],
        density=settings['SC_DENSITY'],
        n_nodes=settings['MIS_NODES'],
        affinity=settings['MIS_AFFINITY'],
        n_items=settings['MK_ITEMS'],
        n_knapsacks=settings['MK_KNAPSACKS'],
        seed=seed,
        count=settings['INSTANCE_COUNT'] if count is None else count,
    )
