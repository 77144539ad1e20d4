"""
Exception hierarchy for the cut-selection toolkit.

Invalid user data raises ``ValueError`` subclasses so callers that only know
about the builtin can still catch them. The CLI maps the two outermost
families onto exit codes:

    ConfigError      → exit code 2
    MissingArtifact  → exit code 3
"""


class CutSelectorError(Exception):
    """Base class for every error raised by this package."""


class NumericalFailure(CutSelectorError):
    """The simplex method stalled beyond its iteration cap."""


class DimensionMismatch(CutSelectorError, ValueError):
    """A cut or row refers to a variable index outside the instance."""


class ZeroNormCut(CutSelectorError, ValueError):
    """A cut with an all-zero coefficient vector cannot be featurized."""


class DegenerateState(CutSelectorError, ValueError):
    """A policy was asked to act on an empty candidate pool."""


class ShapeMismatch(CutSelectorError, ValueError):
    """Operands of a tensor operation have incompatible shapes."""


class NonFiniteDetected(CutSelectorError):
    """A forward pass, loss or gradient produced NaN or infinity."""


class UndefinedImprovement(CutSelectorError, ZeroDivisionError):
    """The NoCuts reference metric is zero, so Improvement is undefined."""


class ConfigError(CutSelectorError):
    """A configuration file or preset could not be loaded or validated."""


class MissingArtifact(CutSelectorError):
    """A file the command depends on (instances, manifest, checkpoint) is absent."""


class MissingCheckpoint(MissingArtifact):
    """A learned selector was requested without a checkpoint to load."""
