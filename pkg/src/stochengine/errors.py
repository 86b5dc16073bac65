"""Exception and warning types raised by the solvers."""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameters(EngineError, ValueError):
    """Raised when parameters violate model well-posedness."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class ConfigError(InvalidParameters):
    """Malformed configuration document (unknown keys, bad values)."""


class InvalidRegime(EngineError, ValueError):
    """Closed-form underdamped results are outside their validity regime."""


class NumericalFailure(EngineError):
    """Base class for failures of a numerical procedure on valid input."""


class NoConvergence(NumericalFailure):
    """Periodic steady state not reached (instability or lost positivity)."""

    def __init__(self, message, time=None, defect=None):
        super().__init__(message)
        self.time = time
        self.defect = defect


class StepTooCoarse(NumericalFailure):
    """Halving the integration step changed the result beyond tolerance."""


class SingularSystem(NumericalFailure):
    """Harmonic-balance linear system is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NonRealPower(NumericalFailure):
    """Spectral power has a non-negligible imaginary part."""


class Unstable(NumericalFailure):
    """Monte Carlo trajectories blew up."""


class PeriodMismatch(EngineError, ValueError):
    """Trajectory does not span exactly one drive period."""


class ModelMismatch(EngineError, ValueError):
    """Trajectory model tag does not match the parameters."""


class TruncationWarning(UserWarning):
    """Highest retained Fourier mode is not negligible."""
