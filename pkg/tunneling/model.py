"""
Physical ingredients of the static-field problem in space-fractional quantum mechanics.

Kinetic symbol T(k) = |k|^alpha / 2 (D_alpha fixed to 1/2 for every alpha), the soft-core
binding potential, the length-gauge field term with its turn-on envelope and the
multiplicative absorbing mask.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from core.errors import ConfigurationError

logger = logging.getLogger(__name__)

ALPHA_MIN = 1.0  # exclusive
ALPHA_MAX = 2.0  # inclusive


@dataclass(frozen=True)
class FractionalOrder:
    """Fractional order alpha in (1, 2]"""
    alpha: float

    def __post_init__(self):
        if not (ALPHA_MIN < self.alpha <= ALPHA_MAX):
            raise ConfigurationError(f"Fractional order must satisfy 1 < alpha <= 2, got {self.alpha}")

    def __float__(self) -> float:
        return float(self.alpha)

    @classmethod
    def coerce(cls, value: "FractionalOrder | float") -> "FractionalOrder":
        if isinstance(value, FractionalOrder):
            return value
        return cls(float(value))


@dataclass(frozen=True)
class SoftCoreSpec:
    """V(x) = -Z / sqrt(x^2 + a^2)"""
    Z: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if self.Z <= 0:
            raise ConfigurationError(f"Soft-core charge must be positive, got Z={self.Z}")
        if self.a <= 0:
            raise ConfigurationError(f"Softening parameter must be positive, got a={self.a}")


class RampShape(str, Enum):
    """Turn-on envelope of the static field"""
    NONE = "none"
    LINEAR = "linear"
    SIN2 = "sin2"


@dataclass(frozen=True)
class FieldSpec:
    F0: float = 0.0
    ramp_shape: RampShape = RampShape.SIN2
    T_ramp: float = 20.0

    def __post_init__(self):
        if self.F0 < 0:
            raise ConfigurationError(f"Field strength must be non-negative, got F0={self.F0}")
        if self.T_ramp < 0:
            raise ConfigurationError(f"Ramp duration must be non-negative, got T_ramp={self.T_ramp}")
        # Allow plain strings from config
        object.__setattr__(self, "ramp_shape", RampShape(self.ramp_shape))

    @property
    def ramp_end(self) -> float:
        if self.ramp_shape == RampShape.NONE:
            return 0.0
        return self.T_ramp


@dataclass(frozen=True)
class MaskSpec:
    x_cap: float
    eta: float = 5.0
    m: float = 4.0

    def __post_init__(self):
        if self.x_cap <= 0:
            raise ConfigurationError(f"Absorber onset must be positive, got x_cap={self.x_cap}")
        if self.eta <= 0:
            raise ConfigurationError(f"Absorber strength must be positive, got eta={self.eta}")
        if self.m < 2:
            raise ConfigurationError(f"Absorber exponent must be >= 2, got m={self.m}")


@dataclass(frozen=True)
class SystemSpec:
    """Everything a propagation needs besides the grid and the step settings"""
    alpha: FractionalOrder
    potential: SoftCoreSpec
    field: FieldSpec = FieldSpec()
    mask: MaskSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", FractionalOrder.coerce(self.alpha))

    def field_free(self) -> "SystemSpec":
        return SystemSpec(alpha=self.alpha, potential=self.potential, field=FieldSpec(F0=0.0), mask=None)


def riesz_symbol(k, alpha: FractionalOrder | float):
    """Kinetic energy |k|^alpha / 2 of the Riesz fractional Laplacian"""
    a = float(FractionalOrder.coerce(alpha))
    return 0.5 * np.abs(k) ** a


def soft_core(x, spec: SoftCoreSpec):
    return -spec.Z / np.sqrt(np.asarray(x, dtype=float) ** 2 + spec.a ** 2)


def ramp_envelope(t: float, field: FieldSpec) -> float:
    """Field envelope g(t): 0 at t = 0 (unless no ramp), non-decreasing, 1 from T_ramp on"""
    if field.ramp_shape == RampShape.NONE or field.T_ramp == 0 or t >= field.T_ramp:
        return 1.0
    if t <= 0:
        return 0.0
    if field.ramp_shape == RampShape.LINEAR:
        return t / field.T_ramp
    return math.sin(math.pi * t / (2.0 * field.T_ramp)) ** 2


def total_potential(x, spec: SoftCoreSpec, field: FieldSpec, t: float):
    """Length-gauge potential V(x) + g(t) * F0 * x"""
    if t < 0:
        raise ConfigurationError(f"Time must be non-negative, got t={t}")
    x = np.asarray(x, dtype=float)
    return soft_core(x, spec) + ramp_envelope(t, field) * field.F0 * x


def mask_value(x, spec: MaskSpec, L: float):
    """
    M(x) = 1 for |x| <= x_cap, exp[-eta ((|x| - x_cap) / (L - x_cap))^m] beyond.
    """
    if spec.x_cap >= L:
        raise ConfigurationError(f"Absorber onset x_cap={spec.x_cap} must lie inside the box L={L}")
    ax = np.abs(np.asarray(x, dtype=float))
    depth = np.clip((ax - spec.x_cap) / (L - spec.x_cap), 0.0, None)
    return np.exp(-spec.eta * depth ** spec.m)


def barrier_suppression_field(Ip: float, Z: float) -> float:
    """Nominal tunneling / over-the-barrier boundary Ip^2 / (4Z)"""
    return Ip ** 2 / (4.0 * Z)


def soft_core_suppression_field(Ip: float, spec: SoftCoreSpec) -> float:
    """
    Field at which the outer saddle of V(x) + F x (downhill side, x < 0) drops to -Ip.

    The saddle solves Z|x| / (x^2 + a^2)^(3/2) = F; that relation peaks at |x| = a/sqrt(2)
    with F_max = 2Z / (3 sqrt(3) a^2). If the saddle is still above -Ip when it disappears,
    F_max is returned.
    """
    if Ip <= 0:
        raise ConfigurationError(f"Ionization potential must be positive, got Ip={Ip}")
    Z, a = spec.Z, spec.a
    x_peak = a / math.sqrt(2.0)
    F_max = 2.0 * Z / (3.0 * math.sqrt(3.0) * a ** 2)

    def saddle_height(F: float) -> float:
        # Outer root |x| > a/sqrt(2) of Z|x|/r^3 = F
        g = lambda s: Z * s / (s * s + a * a) ** 1.5 - F  # noqa: E731
        s_hi = x_peak
        while g(s_hi) > 0:
            s_hi *= 2.0
        s = brentq(g, x_peak, s_hi, xtol=1e-14)
        return -Z / math.sqrt(s * s + a * a) - F * s

    if saddle_height(F_max * (1 - 1e-12)) > -Ip:
        return F_max
    return brentq(lambda F: saddle_height(F) + Ip, 1e-12, F_max * (1 - 1e-12), xtol=1e-14)
