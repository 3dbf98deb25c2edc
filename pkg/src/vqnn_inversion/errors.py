"""Exception hierarchy shared across the package.

The CLI maps :class:`ConfigurationError` (and its subclasses) to exit code 2
and :class:`ExperimentRuntimeError` to exit code 3.
"""


class VqnnError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VqnnError, ValueError):
    """Invalid configuration: qubit counts, indices, hyperparameters, paths."""


class InputError(VqnnError, ValueError):
    """Invalid data handed to an operation (targets, shapes, empty batches)."""


class FormatError(ConfigurationError):
    """A data file does not parse as the expected format."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UndefinedMetricError(InputError):
    """A metric is undefined for the given data, e.g. R^2 on constant targets."""


class ModelMismatchError(InputError):
    """Attacker and victim gradients do not come from the same model."""


class ExperimentRuntimeError(VqnnError, RuntimeError):
    """A run diverged or produced non-finite values."""

    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class NumericalStateError(ExperimentRuntimeError):
    """A filter reached a numerically invalid state."""
