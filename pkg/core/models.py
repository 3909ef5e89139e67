"""
Pydantic models for the run configuration.

Every default documented in docs/CONFIG_REFERENCE.md lives here; that file is
generated from these fields (python cli.py config-reference).
"""
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from tunneling.model import ALPHA_MAX, ALPHA_MIN, RampShape


def _default_curve_fields() -> list[float]:
    return [round(0.03 + 0.005 * i, 6) for i in range(15)]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridConfig(_Section):
    L: float = Field(200.0, gt=0, description="Half-width of the box [-L, L) in bohr")
    N: int = Field(4096, ge=4, description="Number of grid points (even)")
    power_of_two: bool = Field(True, description="Require N to be a power of two")


class SystemConfig(_Section):
    alphas: list[float] = Field(
        default_factory=lambda: [1.2, 1.4, 1.6, 1.8], description="Fractional orders swept, each in (1, 2]"
    )
    Z: float = Field(1.0, gt=0, description="Soft-core effective charge")
    a: float | None = Field(1.0, gt=0, description="Soft-core softening parameter in bohr (Protocol A)")
    Ip_target: float | None = Field(0.67, gt=0, description="Target ionization potential in hartree (Protocol B)")

    @field_validator("alphas")
    @classmethod
    def _check_alphas(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("at least one fractional order is required")
        for alpha in value:
            if not ALPHA_MIN < alpha <= ALPHA_MAX:
                raise ValueError(f"fractional order must satisfy 1 < alpha <= 2, got {alpha}")
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate fractional orders: {value}")
        return value


class FieldConfig(_Section):
    F0_list: list[float] = Field(
        default_factory=lambda: [0.04, 0.05, 0.06, 0.07], description="Static field strengths swept (a.u.)"
    )
    ramp_shape: RampShape = Field(RampShape.SIN2, description="Field turn-on envelope: none, linear or sin2")
    T_ramp: float = Field(20.0, ge=0, description="Ramp duration (a.u. time)")
    F_ref: float = Field(0.05, gt=0, description="Reference field for normalized model curves and ratios")
    allow_over_barrier: bool = Field(
        False, description="Permit fields at or above the barrier-suppression estimate Ip^2/(4Z)"
    )
    curve_F0_list: list[float] = Field(
        default_factory=_default_curve_fields, description="Field grid for the analytic fadk-curves tables"
    )

    @field_validator("F0_list", "curve_F0_list")
    @classmethod
    def _check_fields(cls, value: list[float]) -> list[float]:
        if not value:
            raise ValueError("field list must not be empty")
        if any(f <= 0 for f in value):
            raise ValueError(f"field strengths must be positive: {value}")
        if len(set(value)) != len(value):
            raise ValueError(f"duplicate field strengths: {value}")
        return value


class PropagationConfig(_Section):
    dt: float = Field(0.01, gt=0, description="Real-time step (a.u.)")
    dtau: float = Field(0.005, gt=0, description="Imaginary-time step (a.u.)")
    T_total: float | None = Field(
        None, gt=0, description="Fixed propagation time; adaptive max(T_min, 20/Gamma_estimate) when unset"
    )
    T_min: float = Field(2000.0, gt=0, description="Lower bound of the adaptive propagation time")
    T_max: float = Field(20000.0, gt=0, description="Cap on the adaptive propagation time")
    rate_prefactor: float = Field(1.0, gt=0, description="Prefactor of the fADK rate estimate used for T_total")
    observer_stride: int = Field(100, ge=1, description="Steps between survival-probability samples")
    ground_state_tol: float = Field(1e-10, gt=0, description="Energy change per unit imaginary time at convergence")
    ground_state_state_tol: float = Field(
        1e-12, gt=0, description="L2 change of the normalized ground state per unit imaginary time at convergence"
    )
    max_tau: float = Field(2000.0, gt=0, description="Imaginary-time budget before giving up")

    @model_validator(mode="after")
    def _check_budget(self):
        if self.T_min > self.T_max:
            raise ValueError(f"T_min={self.T_min} exceeds T_max={self.T_max}")
        return self


class MaskConfig(_Section):
    x_cap: float | None = Field(None, gt=0, description="Absorber onset in bohr; 0.8 L when unset")
    eta: float = Field(5.0, gt=0, description="Absorber strength")
    m: float = Field(4.0, ge=2, description="Absorber exponent")


class RatesConfig(_Section):
    x_c: float | None = Field(
        None, gt=0, description="Bound-region half-width; x_c_factor times the ground-state 1/e half-width when unset"
    )
    x_c_factor: float = Field(4.0, gt=0, description="Multiple of the 1/e half-width used for the default x_c")
    plateau_tolerance: float = Field(0.10, gt=0, description="Allowed relative spread of Gamma_inst in the window")
    min_window: float = Field(50.0, gt=0, description="Shortest accepted fit window (a.u. time)")
    rate_floor: float = Field(1e-12, gt=0, description="Rates below this are reported as no measurable decay")


class CalibrationConfig(_Section):
    tol_Ip: float = Field(1e-4, gt=0, description="Accepted |Ip - Ip_target| in the Protocol B bisection")
    expansion_factor: float = Field(2.0, gt=1, description="Geometric step of the bracket search from a = 1")


class RunConfig(_Section):
    grid: GridConfig = Field(default_factory=GridConfig)
    system: SystemConfig = Field(default_factory=SystemConfig)
    field: FieldConfig = Field(default_factory=FieldConfig)
    propagation: PropagationConfig = Field(default_factory=PropagationConfig)
    mask: MaskConfig = Field(default_factory=MaskConfig)
    rates: RatesConfig = Field(default_factory=RatesConfig)
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    protocol: Literal["A", "B"] = Field("A", description="A: fixed (Z, a); B: a calibrated per alpha to Ip_target")
    out_dir: str = Field("results", description="Output directory (not part of the config hash)")
    workers: int | None = Field(
        None, ge=1, description="Worker processes; one per (alpha, F0) job when unset (not part of the config hash)"
    )

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.grid.N % 2 != 0:
            raise ValueError(f"grid.N must be even, got {self.grid.N}")
        if self.mask.x_cap is not None and self.mask.x_cap >= self.grid.L:
            raise ValueError(f"mask.x_cap={self.mask.x_cap} must be smaller than grid.L={self.grid.L}")
        if self.protocol == "B" and self.system.Ip_target is None:
            raise ValueError("Protocol B requires system.Ip_target")
        if self.protocol == "A" and self.system.a is None:
            raise ValueError("Protocol A requires a fixed softening parameter system.a")
        return self

    @property
    def x_cap(self) -> float:
        return self.mask.x_cap if self.mask.x_cap is not None else 0.8 * self.grid.L
