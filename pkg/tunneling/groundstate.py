"""
Field-free ground states by imaginary-time propagation, and calibration of the
soft-core softening parameter to a target ionization potential.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from core.errors import BracketError, CalibrationError, ConfigurationError, GroundStateError
from tunneling.grid import SpatialGrid
from tunneling.model import FractionalOrder, SoftCoreSpec, SystemSpec
from tunneling.prop import (
    SplitOperator,
    StepConfig,
    StepMode,
    WaveFunction,
    energy_expectation,
    gaussian_wavefunction,
)

logger = logging.getLogger(__name__)

DEFAULT_ENERGY_TOLERANCE = 1e-10
# L2 change of the phase-aligned state over one check interval
DEFAULT_STATE_TOLERANCE = 1e-12
DEFAULT_DTAU = 0.005
DEFAULT_MAX_TAU = 2000.0
# Imaginary time between two energy checks
CHECK_INTERVAL = 1.0

A_SEARCH_RANGE = (1e-3, 1e3)
DEFAULT_IP_TOLERANCE = 1e-4
_MAX_BISECTIONS = 60


@dataclass
class GroundStateResult:
    psi0: WaveFunction = field(repr=False)
    E0: float
    iterations: int
    converged: bool

    @property
    def Ip(self) -> float:
        return -self.E0


@dataclass
class CalibrationResult:
    a_star: float
    achieved_Ip: float
    bracket: tuple[float, float]
    iterations: int
    ground_state: GroundStateResult | None = field(default=None, repr=False)


def _fix_phase(amplitudes: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Scale so psi(0) is real and positive (falls back to the largest amplitude if psi(0) vanishes)"""
    anchor = amplitudes[grid.center_index]
    if abs(anchor) == 0.0:
        anchor = amplitudes[int(np.argmax(np.abs(amplitudes)))]
    return amplitudes * (abs(anchor) / anchor)


def state_change(previous: np.ndarray, current: np.ndarray, dx: float) -> float:
    """L2 distance between two unit-norm states after removing their relative phase"""
    overlap = np.vdot(previous, current)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.sqrt(np.sum(np.abs(current - phase * previous) ** 2) * dx))


def solve_ground_state(
    alpha: FractionalOrder | float,
    potential: SoftCoreSpec,
    grid: SpatialGrid,
    tol: float = DEFAULT_ENERGY_TOLERANCE,
    dtau: float = DEFAULT_DTAU,
    max_tau: float = DEFAULT_MAX_TAU,
    psi_init: WaveFunction | None = None,
    potential_values: np.ndarray | None = None,
    state_tol: float = DEFAULT_STATE_TOLERANCE,
) -> GroundStateResult:
    """
    Imaginary-time split-step until, over one unit of tau, the energy changes by less
    than tol and the normalized state moves by less than state_tol in L2 norm.

    psi_init defaults to a unit-width Gaussian; potential_values replaces the soft-core
    potential on the grid when given (used for analytic test potentials).
    """
    if not tol > 0:
        raise ConfigurationError(f"Energy tolerance must be positive, got tol={tol}")
    if not state_tol > 0:
        raise ConfigurationError(f"State tolerance must be positive, got state_tol={state_tol}")
    if not max_tau > 0:
        raise ConfigurationError(f"max_tau must be positive, got {max_tau}")

    system = SystemSpec(alpha=alpha, potential=potential)
    op = SplitOperator(grid, system, StepConfig(dt=dtau, mode=StepMode.IMAGINARY_TIME), potential_values)
    psi = psi_init if psi_init is not None else gaussian_wavefunction(grid, sigma=1.0)
    if psi.grid.N != grid.N or psi.grid.L != grid.L:
        raise ConfigurationError("Initial guess lives on a different grid")

    amplitudes = psi.normalized().amplitudes
    check_every = max(1, int(round(CHECK_INTERVAL / dtau)))
    max_steps = int(math.ceil(max_tau / dtau))
    energy = energy_expectation(WaveFunction(grid, amplitudes), system, potential_values)
    delta = math.inf
    change = math.inf
    steps = 0

    while steps < max_steps:
        previous = amplitudes
        for _ in range(check_every):
            amplitudes = op.imaginary_step(amplitudes)
        steps += check_every
        new_energy = energy_expectation(WaveFunction(grid, amplitudes), system, potential_values)
        delta = abs(new_energy - energy)
        energy = new_energy
        change = state_change(previous, amplitudes, grid.dx)
        logger.debug(f"  tau={steps * dtau:.1f}, E={energy:.12f}, dE={delta:.3e}, dpsi={change:.3e}")
        # Energy is second order in the excited admixture; the state change is first order
        if delta < tol and change < state_tol:
            psi0 = WaveFunction(grid, _fix_phase(amplitudes, grid)).normalized()
            E0 = energy_expectation(psi0, system, potential_values)
            logger.info(
                f"Ground state alpha={float(system.alpha)}, Z={potential.Z}, a={potential.a:.6g}: "
                f"E0={E0:.10f} after {steps} steps"
            )
            return GroundStateResult(psi0=psi0, E0=E0, iterations=steps, converged=True)

    raise GroundStateError(
        f"Imaginary-time propagation did not converge within tau={max_tau} "
        f"(last energy change {delta:.3e}, tol {tol:.1e}; last state change {change:.3e}, state_tol {state_tol:.1e})",
        last_delta=delta,
        iterations=steps,
    )


def bound_half_width(result: GroundStateResult) -> float:
    """Distance from x = 0 at which |psi0|^2 falls to 1/e of its central value"""
    psi = result.psi0
    grid = psi.grid
    center = grid.center_index
    x = grid.x_nodes[center:]
    density = psi.density[center:]
    threshold = density[0] / math.e
    below = np.flatnonzero(density < threshold)
    if below.size == 0:
        return float(grid.L)
    i = int(below[0])
    # Linear interpolation between the bracketing nodes
    x0, x1 = x[i - 1], x[i]
    d0, d1 = density[i - 1], density[i]
    return float(x0 + (d0 - threshold) * (x1 - x0) / (d0 - d1))


def bound_region_radius(half_width: float, x_cap: float, factor: float = 4.0) -> float:
    """Default x_c: factor times the 1/e half-width, kept below 0.9 x_cap"""
    radius = factor * half_width
    limit = 0.9 * x_cap
    if radius > limit:
        logger.info(f"Bound-region radius {radius:.3g} clamped to 0.9*x_cap={limit:.3g}")
        return limit
    return radius


class _IpFunction:
    """f(a) = Ip(alpha; a) - Ip_target with warm starts from the last solved state"""

    def __init__(self, alpha, Ip_target, Z, grid, solver_kwargs):
        self.alpha = alpha
        self.Ip_target = Ip_target
        self.Z = Z
        self.grid = grid
        self.solver_kwargs = solver_kwargs
        self.last: GroundStateResult | None = None
        self.results: dict[float, GroundStateResult] = {}

    def __call__(self, a: float) -> float:
        guess = self.last.psi0 if self.last is not None else None
        result = solve_ground_state(
            self.alpha, SoftCoreSpec(Z=self.Z, a=a), self.grid, psi_init=guess, **self.solver_kwargs
        )
        self.last = result
        self.results[a] = result
        return result.Ip - self.Ip_target


def _check_monotone(samples: list[tuple[float, float]]) -> None:
    ordered = sorted(samples)
    for (a0, f0), (a1, f1) in zip(ordered, ordered[1:]):
        if not f1 < f0:
            logger.warning(f"Ip(a) is not decreasing between a={a0:.6g} (f={f0:.6g}) and a={a1:.6g} (f={f1:.6g})")
            raise CalibrationError(
                f"Ip(a) is not monotone decreasing between a={a0:.6g} and a={a1:.6g}; bisection would be unreliable"
            )


def _find_bracket(f: _IpFunction, factor: float) -> tuple[float, float, list[tuple[float, float]]]:
    a_min, a_max = A_SEARCH_RANGE
    a = 1.0
    value = f(a)
    samples = [(a, value)]
    # f decreases with a: positive f means the well binds too strongly, so look at larger a
    direction = factor if value >= 0 else 1.0 / factor
    while True:
        if a >= a_max or a <= a_min:
            raise BracketError(
                f"No sign change of Ip(a) - {f.Ip_target} for a in [{a_min:g}, {a_max:g}] "
                f"(last a={a:.6g}, f={value:.6g})"
            )
        a = min(max(a * direction, a_min), a_max)
        value = f(a)
        samples.append((a, value))
        _check_monotone(samples)
        if (value < 0) == (direction > 1):
            prev_a = samples[-2][0]
            lo, hi = sorted((prev_a, a))
            return lo, hi, samples


def calibrate_softcore(
    alpha: FractionalOrder | float,
    Ip_target: float,
    Z: float,
    grid: SpatialGrid,
    tol_Ip: float = DEFAULT_IP_TOLERANCE,
    expansion_factor: float = 2.0,
    **solver_kwargs,
) -> CalibrationResult:
    """
    Softening parameter a_star with |Ip(alpha; a_star) - Ip_target| <= tol_Ip.

    The bracket grows geometrically from a = 1 inside [1e-3, 1e3]; Ip(a) must decrease
    along it. Bisection follows, each solve starting from the previous ground state.
    Extra keyword arguments go to solve_ground_state.
    """
    if not Ip_target > 0:
        raise ConfigurationError(f"Target ionization potential must be positive, got {Ip_target}")
    if not tol_Ip > 0:
        raise ConfigurationError(f"Calibration tolerance must be positive, got {tol_Ip}")
    if not expansion_factor > 1:
        raise ConfigurationError(f"Bracket expansion factor must exceed 1, got {expansion_factor}")

    alpha = FractionalOrder.coerce(alpha)
    f = _IpFunction(alpha, Ip_target, Z, grid, solver_kwargs)
    lo, hi, samples = _find_bracket(f, expansion_factor)
    f_lo, f_hi = dict(samples)[lo], dict(samples)[hi]
    logger.info(f"Calibration alpha={float(alpha)}: bracket a in [{lo:.6g}, {hi:.6g}]")

    for iteration in range(1, _MAX_BISECTIONS + 1):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if not f_hi <= f_mid <= f_lo:
            _check_monotone([(lo, f_lo), (mid, f_mid), (hi, f_hi)])
        logger.debug(f"  bisection {iteration}: a={mid:.8g}, Ip={f_mid + Ip_target:.8f}")
        if abs(f_mid) <= tol_Ip:
            result = f.results[mid]
            logger.info(
                f"Calibrated alpha={float(alpha)}: a*={mid:.8g}, Ip={result.Ip:.8f} (target {Ip_target}) "
                f"after {iteration} bisections"
            )
            return CalibrationResult(
                a_star=mid,
                achieved_Ip=result.Ip,
                bracket=(lo, hi),
                iterations=iteration,
                ground_state=result,
            )
        if f_mid > 0:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid

    raise CalibrationError(
        f"Bisection did not reach |Ip - {Ip_target}| <= {tol_Ip} within {_MAX_BISECTIONS} steps "
        f"(bracket [{lo:.10g}, {hi:.10g}])"
    )
