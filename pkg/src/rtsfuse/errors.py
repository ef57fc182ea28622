"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific class that applies.
"""


class RtsFuseError(Exception):
    """Base class for all package errors."""


class InvalidInputError(RtsFuseError, ValueError):
    """Malformed or non-finite input to a kernel or featurizer."""


class MissingArtifactError(RtsFuseError, FileNotFoundError):
    """A required upstream artifact (corpus, cache, checkpoint) is absent."""


class NumericFailureError(RtsFuseError, ArithmeticError):
    """A numeric invariant broke: non-finite gradient, overflow, or an
    infeasible calibration target."""


class CheckpointError(RtsFuseError, ValueError):
    """Checkpoint bytes are malformed or disagree with the model config."""
