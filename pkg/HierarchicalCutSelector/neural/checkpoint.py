"""
Parameter checkpoints as versioned JSON documents.

A checkpoint holds named groups (``theta1``/``theta2`` for the hierarchical
policy, ``scorer`` for SBP) of named tensors, flattened row-major.
"""

import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from HierarchicalCutSelector.exceptions import ConfigError, MissingCheckpoint
from HierarchicalCutSelector.models.dtos import CheckpointDTO, TensorDTO

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

Groups = Dict[str, Dict[str, np.ndarray]]


def to_dto(kind: str, groups: Groups, metadata: Optional[Dict[str, Any]] = None) -> CheckpointDTO:
    return CheckpointDTO(
        schema_version=SCHEMA_VERSION,
        kind=kind,
        groups={
            group: {
                name: TensorDTO(shape=list(array.shape), values=[float(v) for v in array.ravel()])
                for name, array in tensors.items()
            }
            for group, tensors in groups.items()
        },
        metadata=metadata or {},
    )


def from_dto(dto: CheckpointDTO) -> Tuple[str, Groups, Dict[str, Any]]:
    groups = {
        group: {
            name: np.array(t.values, dtype=np.float64).reshape(t.shape)
            for name, t in tensors.items()
        }
        for group, tensors in dto.groups.items()
    }
    return dto.kind, groups, dict(dto.metadata)


def dumps_checkpoint(kind: str, groups: Groups, metadata: Optional[Dict[str, Any]] = None) -> str:
    return to_dto(kind, groups, metadata).model_dump_json(indent=1)


def save_checkpoint(path: Path, kind: str, groups: Groups, metadata: Optional[Dict[str, Any]] = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_checkpoint(kind, groups, metadata))
    logger.info("Saved %s checkpoint to %s", kind, path)


def load_checkpoint(path: Path, kind: Optional[str] = None) -> Tuple[str, Groups, Dict[str, Any]]:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Raises:
        MissingCheckpoint: when *path* does not exist.
        ConfigError: when the document is malformed, from a newer schema,
            or of a different *kind*.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingCheckpoint(f"Checkpoint not found: {path}")
    try:
        dto = CheckpointDTO.model_validate_json(path.read_text())
    except ValidationError as exc:
        raise ConfigError(f"Malformed checkpoint {path}: {exc}") from exc
    if dto.schema_version > SCHEMA_VERSION:
        raise ConfigError(f"Checkpoint schema {dto.schema_version} is newer than supported {SCHEMA_VERSION}")
    if kind is not None and dto.kind != kind:
        raise ConfigError(f"Checkpoint {path} holds a {dto.kind} model, expected {kind}")
    return from_dto(dto)
