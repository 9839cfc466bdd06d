"""Exception hierarchy shared by the scattering library and its commands."""


class ScatteringError(Exception):
    """Base class for every error raised by the scattering package."""


class ShapeError(ScatteringError):
    """Operand shapes are incompatible with the requested operation."""


class SingularMatrixError(ScatteringError):
    """A matrix could not be inverted because an LU pivot vanished."""

    def __init__(self, message: str, pivot: float = 0.0):
        super().__init__(message)
        self.pivot = pivot


class CirculantStructureError(ScatteringError):
    """An operator is not the doubly-block circulant form of a kernel of the requested shape."""

    def __init__(self, message: str, deviation: float):
        super().__init__(message)
        self.deviation = deviation


class IntegrationError(ScatteringError):
    """The ODE integrator produced a non-finite state."""


class NonFiniteGradientError(ScatteringError):
    """An optimizer received NaN or infinite gradients."""


class TrainingDivergedError(ScatteringError):
    """The training loss became non-finite."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class ConfigurationError(ScatteringError):
    """A run configuration or ExperimentSpec is incomplete or invalid."""


class CheckpointFormatError(ScatteringError):
    """A parameter checkpoint could not be parsed."""
