"""
Exception hierarchy for the fractional tunneling simulator.

Everything raised on purpose derives from TunnelingError so the CLI can record a
failed field point and keep going with the rest of a sweep.
"""


class TunnelingError(Exception):
    """Base class for all expected simulation failures"""


class GridError(TunnelingError, ValueError):
    """Invalid grid dimensions"""


class ConfigurationError(TunnelingError, ValueError):
    """Invalid model, mask or run configuration"""


class PropagationError(TunnelingError):
    """Time stepping failed"""


class NumericOverflowError(PropagationError):
    """Amplitudes became NaN or Inf during a step"""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class NumericUnderflowError(PropagationError):
    """Imaginary-time norm collapsed (step too large)"""

    def __init__(self, message: str, norm: float | None = None):
        super().__init__(message)
        self.norm = norm


class GroundStateError(TunnelingError):
    """Imaginary-time propagation did not converge"""

    def __init__(self, message: str, last_delta: float, iterations: int):
        super().__init__(message)
        self.last_delta = last_delta
        self.iterations = iterations


class CalibrationError(TunnelingError):
    """Soft-core calibration failed"""


class BracketError(CalibrationError):
    """No sign change of Ip(a) - Ip_target inside the search range"""


class RateError(TunnelingError, ValueError):
    """Invalid survival-probability data"""


class NoPlateauError(RateError):
    """No window where the instantaneous rate is flat"""


class SlopeFitError(RateError):
    """Field-scaling fit cannot be performed"""


class DegenerateInputError(SlopeFitError):
    """Duplicate field strengths in a slope fit"""


class QuadratureError(TunnelingError):
    """Adaptive quadrature could not reach the tolerance"""


class CheckpointError(TunnelingError):
    """Malformed wavefunction checkpoint"""


class ProvenanceError(TunnelingError):
    """Result tables from different configs were mixed"""
