"""
Analytic tunneling exponents: conventional ADK and its fractional generalization.

With the triangular exit barrier W(x) = Ip - F0 x on [0, Ip/F0] and the n = 0 momentum
branch p = e^{i pi/alpha} (2W)^{1/alpha}, the under-barrier action is

    S = e^{i pi/alpha} 2^{1/alpha} alpha/(alpha+1) Ip^{1+1/alpha} / F0

and Gamma_alpha ~ exp(-2 Im S) = exp(-C_alpha / F0) with

    C_alpha = 2 alpha/(alpha+1) sin(pi/alpha) 2^{1/alpha} Ip^{1+1/alpha}.

Only the exponent is modeled; absolute prefactors are not.
"""
import cmath
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from core.errors import ConfigurationError, QuadratureError
from tunneling.model import FractionalOrder

logger = logging.getLogger(__name__)

QUADRATURE_TOLERANCE = 1e-10
_QUAD_EPSREL = 1e-12
_QUAD_LIMIT = 200


def _check_positive(name: str, value: float) -> None:
    if not value > 0:
        raise ConfigurationError(f"{name} must be positive, got {value}")


def fadk_coefficient(alpha: FractionalOrder | float, Ip: float) -> float:
    """C_alpha(Ip): slope of -ln(Gamma_alpha) in 1/F0"""
    _check_positive("Ip", Ip)
    a = float(FractionalOrder.coerce(alpha))
    return (2.0 * a / (a + 1.0)) * math.sin(math.pi / a) * 2.0 ** (1.0 / a) * Ip ** (1.0 + 1.0 / a)


@dataclass(frozen=True)
class TunnelingModel:
    alpha: FractionalOrder
    Ip: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", FractionalOrder.coerce(self.alpha))
        _check_positive("Ip", self.Ip)

    @property
    def C_alpha(self) -> float:
        return fadk_coefficient(self.alpha, self.Ip)


@dataclass(frozen=True)
class BarrierFunction:
    """Triangular barrier W(x) = Ip - F0 x between x = 0 and the exit point Ip/F0"""
    Ip: float
    F0: float

    def __post_init__(self):
        _check_positive("Ip", self.Ip)
        _check_positive("F0", self.F0)

    @property
    def x_exit(self) -> float:
        return self.Ip / self.F0

    def __call__(self, x):
        return self.Ip - self.F0 * np.asarray(x, dtype=float)


def branch_momentum(W: float, alpha: FractionalOrder | float, n: int = 0) -> complex:
    """p_n = e^{i(pi + 2 pi n)/alpha} (2W)^{1/alpha}; n = 0 is the decaying branch"""
    if not W > 0:
        raise ConfigurationError(f"Branch momentum needs W > 0 (forbidden region), got W={W}")
    a = float(FractionalOrder.coerce(alpha))
    return cmath.exp(1j * (math.pi + 2.0 * math.pi * n) / a) * (2.0 * W) ** (1.0 / a)


def complex_action(alpha: FractionalOrder | float, Ip: float, F0: float) -> complex:
    """Closed-form under-barrier action S for the triangular barrier"""
    _check_positive("Ip", Ip)
    _check_positive("F0", F0)
    a = float(FractionalOrder.coerce(alpha))
    return cmath.exp(1j * math.pi / a) * 2.0 ** (1.0 / a) * (a / (a + 1.0)) * Ip ** (1.0 + 1.0 / a) / F0


def _adaptive_quadrature(f, lo: float, hi: float, tol: float) -> float:
    """QUADPACK adaptive Gauss-Kronrod on [lo, hi]; any integration warning becomes QuadratureError"""
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, error = quad(f, lo, hi, epsabs=tol, epsrel=_QUAD_EPSREL, limit=_QUAD_LIMIT)
        except IntegrationWarning as e:
            raise QuadratureError(f"Adaptive quadrature on [{lo:.6g}, {hi:.6g}] did not reach {tol:.3g}: {e}") from e
    logger.debug(f"Quadrature on [{lo:.6g}, {hi:.6g}]: {value:.15g} (error estimate {error:.3g})")
    return float(value)


def im_action_quadrature(
    alpha: FractionalOrder | float, Ip: float, F0: float, tol: float = QUADRATURE_TOLERANCE
) -> float:
    """
    Im S = integral over [0, Ip/F0] of sin(pi/alpha) (2 (Ip - F0 x))^{1/alpha} dx, by adaptive
    Gauss-Kronrod quadrature (QUADPACK). Independent check on fadk_coefficient: 2 Im S = C_alpha / F0.
    """
    barrier = BarrierFunction(Ip, F0)
    a = float(FractionalOrder.coerce(alpha))
    phase = math.sin(math.pi / a)

    def integrand(x):
        return phase * (2.0 * max(float(barrier(x)), 0.0)) ** (1.0 / a)

    return _adaptive_quadrature(integrand, 0.0, barrier.x_exit, tol)


def adk_exponent(Ip: float, F0: float) -> float:
    """Conventional ADK exponent 2 (2 Ip)^{3/2} / (3 F0), i.e. -ln(Gamma) up to a constant"""
    _check_positive("Ip", Ip)
    _check_positive("F0", F0)
    return 2.0 * (2.0 * Ip) ** 1.5 / (3.0 * F0)


def fadk_exponent(model: TunnelingModel, F0: float) -> float:
    """Unnormalized exponent C_alpha / F0"""
    _check_positive("F0", F0)
    return model.C_alpha / F0


def normalized_rate_curve(
    model: TunnelingModel, F_ref: float, gamma_ref: float, F_list: list[float]
) -> list[tuple[float, float]]:
    """Model rates gamma_ref * exp[-C_alpha (1/F0 - 1/F_ref)], equal to gamma_ref at F_ref"""
    _check_positive("F_ref", F_ref)
    _check_positive("gamma_ref", gamma_ref)
    C = model.C_alpha
    curve = []
    for F0 in F_list:
        _check_positive("F0", F0)
        curve.append((float(F0), gamma_ref * math.exp(-C * (1.0 / F0 - 1.0 / F_ref))))
    return curve


def ratio_to_model(
    points: list[tuple[float, float]], model: TunnelingModel, F_ref: float
) -> list[tuple[float, float]]:
    """
    Gamma_sim / Gamma_model with the model aligned to the simulation at F_ref.

    F_ref must be one of the simulated fields; the ratio there is exactly 1.
    """
    by_field = dict(points)
    if F_ref not in by_field:
        raise ConfigurationError(f"Reference field {F_ref} is not among the simulated fields {sorted(by_field)}")
    curve = dict(normalized_rate_curve(model, F_ref, by_field[F_ref], list(by_field)))
    return [(F0, 1.0 if F0 == F_ref else gamma / curve[F0]) for F0, gamma in sorted(by_field.items())]
