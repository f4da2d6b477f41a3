"""Exception types shared across the package."""


class BuffcsError(Exception):
    """Base class for all package errors."""


class EmptyRangeError(BuffcsError):
    """An index was requested from an empty range."""


class EmptySceneError(BuffcsError):
    """A scene or hierarchy was built from zero points."""


class UnknownPointError(BuffcsError):
    """A point id does not exist in the scene."""


class ZeroCapacityError(BuffcsError):
    """A buffer was created or used with capacity 0."""


class NoHierarchyError(BuffcsError):
    """A label hierarchy was required but not available."""


class EmptyBufferError(BuffcsError):
    """A sample was requested from an empty buffer."""


class ShapeMismatchError(BuffcsError):
    """Prediction, payload, or batch shapes do not line up."""


class BadPermutationError(BuffcsError):
    """A stream order is not a permutation of the scene ids."""


class EmptyTestSetError(BuffcsError):
    """Evaluation was requested on an empty query set."""


class IncompleteMatrixError(BuffcsError):
    """An accuracy-matrix row has unpopulated entries."""


class InsufficientSamplesError(BuffcsError):
    """Too few values for the requested statistic."""


class ConfigError(BuffcsError):
    """An experiment configuration is malformed."""
