"""
Fractional Schrodinger static-field tunneling: grids, model, split-step propagation,
ground states, rate extraction and the analytic fADK exponents.
"""

from .fadk import TunnelingModel, adk_exponent, fadk_coefficient, im_action_quadrature, normalized_rate_curve
from .grid import SpatialGrid, make_grid
from .groundstate import CalibrationResult, GroundStateResult, calibrate_softcore, solve_ground_state
from .model import FieldSpec, FractionalOrder, MaskSpec, RampShape, SoftCoreSpec, SystemSpec
from .prop import StepConfig, StepMode, WaveFunction, propagate, step_imag, step_real
from .rates import DecayTrace, RateFit, SlopeFit, fit_rate, fit_slope, survival_probability

__all__ = [
    "SpatialGrid",
    "make_grid",
    "FractionalOrder",
    "SoftCoreSpec",
    "FieldSpec",
    "MaskSpec",
    "RampShape",
    "SystemSpec",
    "WaveFunction",
    "StepConfig",
    "StepMode",
    "step_real",
    "step_imag",
    "propagate",
    "GroundStateResult",
    "CalibrationResult",
    "solve_ground_state",
    "calibrate_softcore",
    "DecayTrace",
    "RateFit",
    "SlopeFit",
    "survival_probability",
    "fit_rate",
    "fit_slope",
    "TunnelingModel",
    "fadk_coefficient",
    "im_action_quadrature",
    "adk_exponent",
    "normalized_rate_curve",
]
