"""Exception hierarchy shared across the package.

Every condition the library treats as a domain failure derives from
:class:`DogsegError` so callers (and the command line front end) can
distinguish bad inputs from genuine bugs.
"""


class DogsegError(Exception):
    """Base class for all domain errors raised by this package."""


class GridValidationError(DogsegError, ValueError):
    """A grid, mask, or encoded image violates a structural invariant."""


class FileFormatError(DogsegError, ValueError):
    """A file does not conform to its declared binary or text format."""


class FileLengthError(FileFormatError):
    """A file is shorter or longer than its header promises."""


class SceneGenerationError(DogsegError, ValueError):
    """A scene specification cannot produce unambiguous ground truth."""


class TrainingError(DogsegError, RuntimeError):
    """Training aborted (non-finite loss or gradients)."""


class DegenerateCurveError(DogsegError, ValueError):
    """A ROC curve cannot be formed because one class is absent."""


class NotFittedError(DogsegError, RuntimeError):
    """A predictor was used before ``fit`` (or before loading weights)."""
