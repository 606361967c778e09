"""Exception hierarchy shared by the simulator, diagnostics and CLI."""


class DyadicError(Exception):
    """Base class for all package errors."""


class ConfigError(DyadicError, ValueError):
    """Invalid parameters or run configuration.

    ``field`` names the offending configuration entry when known.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ShapeMismatch(DyadicError, ValueError):
    """Sequence length does not match the number of shells."""


class IntegrationError(DyadicError, RuntimeError):
    """Base class for failures inside the time integrator."""


class StepSizeUnderflow(IntegrationError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


class InvalidLambda(DyadicError, ValueError):
    """Stability constants need lambda**(3/8) < 2."""


class SampleMiss(DyadicError, ValueError):
    """Requested time cannot be resolved on the sample grid."""


class DegenerateWindow(DyadicError, ValueError):
    """Deviation already at the noise floor over the whole fit window."""


class RangeTooSmall(DyadicError, ValueError):
    """Spectrum fit range holds fewer than four shells."""
