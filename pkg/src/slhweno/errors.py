"""Exception hierarchy for the solver."""


class SLHwenoError(Exception):
    """Base class for all solver errors."""


class InitializationError(SLHwenoError, ValueError):
    pass


class TracingError(SLHwenoError, FloatingPointError):
    pass


class GeometryError(SLHwenoError):
    pass


class GeometryDegeneracyError(GeometryError):
    """Feet configuration too degenerate for the least-squares test polynomial."""


class ReconstructionMissingError(SLHwenoError):
    """An upstream piece landed on a background cell with no reconstruction."""


class PositivityError(SLHwenoError):
    pass


class ChargeNeutralityError(SLHwenoError, ValueError):
    pass


class ConfigError(SLHwenoError, ValueError):
    """Invalid user configuration; the CLI maps this to exit code 2."""


class NumericalFailure(SLHwenoError):
    """Non-finite diagnostics during a run."""
