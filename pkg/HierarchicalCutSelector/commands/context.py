"""
State shared by every CLI command: resolved settings, output directory,
results store, run manifests and selector construction.
"""

import logging
import platform
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import click
import numpy as np
from sqlalchemy import Engine
from sqlalchemy.orm import Session

from HierarchicalCutSelector import config as cfg
from HierarchicalCutSelector.exceptions import ConfigError, MissingCheckpoint
from HierarchicalCutSelector.models.dtos import RunManifestDTO, SelectorName
from HierarchicalCutSelector.policies.hem import HemParams, HemSelector
from HierarchicalCutSelector.policies.rules import (
    EffSelector,
    NoCuts,
    NvSelector,
    RandomAllSelector,
    RandomNvSelector,
    RandomSelector,
)
from HierarchicalCutSelector.policies.sbp import SbpParams, SbpSelector
from HierarchicalCutSelector.utils.database import build_database_url, init_database, make_engine, make_session
from HierarchicalCutSelector.utils.services import SelectorFactory

logger = logging.getLogger(__name__)

PACKAGE = 'HierarchicalCutSelector'


def package_version() -> str:
    try:
        return metadata.version(PACKAGE)
    except metadata.PackageNotFoundError:
        return 'unknown'


@dataclass
class RunContext:
    settings: Dict[str, Any]
    preset: str
    seed: int
    out_dir: Path
    _engine: Optional[Engine] = field(default=None, repr=False)
    _session: Optional[Session] = field(default=None, repr=False)

    @property
    def config_hash(self) -> str:
        return cfg.config_hash(self.settings)

    def database_url(self) -> str:
        path = Path(self.settings['SQLITE_PATH'])
        if not path.is_absolute():
            path = self.out_dir / path
        return build_database_url(str(path), self.settings.get('DATABASE_URL'))

    @property
    def engine(self) -> Engine:
        if self._engine is None:
            self._engine = make_engine(self.database_url())
            init_database(self._engine)
        return self._engine

    @property
    def session(self) -> Session:
        if self._session is None:
            self._session = make_session(self.engine)
        return self._session

    def close(self) -> None:
        if self._session is not None:
            self._session.close()
        if self._engine is not None:
            self._engine.dispose()

    def output(self, *parts: str) -> Path:
        path = self.out_dir.joinpath(*parts)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def write_manifest(self, command: str, seeds: Sequence[int], directory: Optional[Path] = None) -> Path:
        """Record the settings hash, seeds and library versions of this run."""
        manifest = RunManifestDTO(
            command=command,
            preset=self.preset,
            config_hash=self.config_hash,
            seeds=[int(s) for s in seeds],
            versions={PACKAGE: package_version(), 'python': platform.python_version(), 'numpy': np.__version__},
            settings={k: v for k, v in self.settings.items()},
        )
        path = (directory or self.output()) / f'manifest_{command}.json'
        path.write_text(manifest.model_dump_json(indent=2))
        return path

    def eval_seeds(self, override: Optional[str] = None) -> List[int]:
        return cfg.parse_ints(override if override is not None else self.settings['EVAL_SEEDS'])


def parse_selectors(value: str) -> List[SelectorName]:
    try:
        return [SelectorName(name.strip()) for name in value.split(',') if name.strip()]
    except ValueError as exc:
        raise ConfigError(f"Unknown selector in '{value}'") from exc


def parse_checkpoints(values: Sequence[str]) -> Dict[str, Path]:
    """``name=path`` pairs from repeated ``--checkpoint`` options."""
    checkpoints = {}
    for item in values:
        name, sep, path = item.partition('=')
        if not sep:
            raise ConfigError(f"--checkpoint expects NAME=PATH, got '{item}'")
        checkpoints[name.strip()] = Path(path.strip())
    return checkpoints


def selector_factory(name: SelectorName, settings: Mapping[str, Any], checkpoints: Mapping[str, Path]) -> SelectorFactory:
    """
    Build a zero-argument factory that returns a fresh selector per solve.

    Raises:
        MissingCheckpoint: when a learned selector has no checkpoint.
    """
    ratio = settings['SELECTION_RATIO']
    if not name.is_learned:
        simple = {
            SelectorName.NOCUTS: lambda: NoCuts(),
            SelectorName.RANDOM: lambda: RandomSelector(ratio),
            SelectorName.NV: lambda: NvSelector(ratio),
            SelectorName.EFF: lambda: EffSelector(ratio),
            SelectorName.RANDOM_ALL: lambda: RandomAllSelector(),
            SelectorName.RANDOM_NV: lambda: RandomNvSelector(ratio),
        }
        return simple[name]

    # HEM-ratio-order reuses the HEM-ratio checkpoint
    key = SelectorName.HEM_RATIO.value if name == SelectorName.HEM_RATIO_ORDER and name.value not in checkpoints else name.value
    if key not in checkpoints:
        raise MissingCheckpoint(f"No checkpoint given for selector {name.value}")
    if name == SelectorName.SBP:
        sbp = SbpParams.load(checkpoints[key])
        return lambda: SbpSelector(sbp)
    hem = HemParams.load(checkpoints[key])
    order_by_id = name == SelectorName.HEM_RATIO_ORDER
    return lambda: HemSelector(hem, order_by_id=order_by_id, name=name.value)


def build_selectors(
    names: Sequence[SelectorName], settings: Mapping[str, Any], checkpoints: Mapping[str, Path]
) -> Dict[str, SelectorFactory]:
    return {name.value: selector_factory(name, settings, checkpoints) for name in names}


pass_run = click.make_pass_decorator(RunContext)
