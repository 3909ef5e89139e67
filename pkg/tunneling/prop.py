"""
Split-step spectral propagation in real and imaginary time.

Both modes use the symmetric splitting
    psi -> e^{-V h/2} F^-1[ e^{-T(k) h} F[e^{-V h/2} psi] ]
with h = i*dt (real time) or h = dtau (imaginary time). Real-time steps evaluate the
ramped field at the step midpoint and apply the absorbing mask afterwards; imaginary-time
steps ignore the field and the mask and renormalize after every step.
"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.errors import ConfigurationError, NumericOverflowError, NumericUnderflowError
from tunneling.grid import SpatialGrid
from tunneling.model import SystemSpec, mask_value, ramp_envelope, riesz_symbol, soft_core
from tunneling.rates import DecayTrace, survival_probability

logger = logging.getLogger(__name__)

# Advisory threshold for probability sitting inside the absorber region
CONTAMINATION_THRESHOLD = 0.2
NORM_FLOOR = 1e-300


@dataclass
class WaveFunction:
    """Complex amplitudes psi(x_j) on a SpatialGrid"""
    grid: SpatialGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (self.grid.N,):
            raise ConfigurationError(f"Expected {self.grid.N} amplitudes, got shape {self.amplitudes.shape}")

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    @property
    def norm2(self) -> float:
        return float(np.sum(self.density) * self.grid.dx)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.amplitudes)))

    def normalized(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes / np.sqrt(self.norm2))

    def copy(self) -> "WaveFunction":
        return WaveFunction(self.grid, self.amplitudes.copy())


class StepMode(str, Enum):
    REAL_TIME = "real_time"
    IMAGINARY_TIME = "imaginary_time"


@dataclass(frozen=True)
class StepConfig:
    dt: float = 0.01
    mode: StepMode = StepMode.REAL_TIME
    apply_mask: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", StepMode(self.mode))
        if not self.dt > 0:
            raise ConfigurationError(f"Time step must be positive, got dt={self.dt}")
        if self.mode == StepMode.IMAGINARY_TIME and self.apply_mask:
            raise ConfigurationError("The absorbing mask is never applied in imaginary time")


def gaussian_wavefunction(grid: SpatialGrid, sigma: float = 1.0, x0: float = 0.0, k0: float = 0.0) -> WaveFunction:
    """Normalized Gaussian (pi sigma^2)^(-1/4) exp(-(x-x0)^2 / (2 sigma^2) + i k0 x)"""
    x = grid.x_nodes
    amplitudes = (np.pi * sigma ** 2) ** -0.25 * np.exp(-((x - x0) ** 2) / (2.0 * sigma ** 2) + 1j * k0 * x)
    return WaveFunction(grid, amplitudes).normalized()


def probability_outside(psi: WaveFunction, x_cap: float) -> float:
    outside = np.abs(psi.grid.x_nodes) > x_cap
    return float(np.sum(psi.density[outside]) * psi.grid.dx)


class SplitOperator:
    """
    Precomputed exponentials for repeated steps on one grid and system.

    The half-step potential factor is cached once the field envelope reaches 1, so
    after the ramp a step costs two FFTs and three pointwise products.
    """

    def __init__(self, grid: SpatialGrid, system: SystemSpec, cfg: StepConfig, potential: np.ndarray | None = None):
        self.grid = grid
        self.system = system
        self.cfg = cfg
        dt = cfg.dt
        kinetic = riesz_symbol(grid.k_nodes, system.alpha)
        if potential is None:
            potential = soft_core(grid.x_nodes, system.potential)

        if cfg.mode == StepMode.IMAGINARY_TIME:
            self._kinetic = np.exp(-kinetic * dt)
            self._half_static = np.exp(-0.5 * potential * dt)
            self._half_full = self._half_static
            self._field_phase = None
            self._mask = None
            return

        self._kinetic = np.exp(-1j * kinetic * dt)
        self._half_static = np.exp(-0.5j * potential * dt)
        field = system.field
        if field.F0 > 0:
            self._field_phase = -0.5j * dt * field.F0 * grid.x_nodes
            self._half_full = self._half_static * np.exp(self._field_phase)
        else:
            self._field_phase = None
            self._half_full = self._half_static

        self._mask = None
        if cfg.apply_mask:
            if system.mask is None:
                raise ConfigurationError("apply_mask is set but the system has no MaskSpec")
            self._mask = mask_value(grid.x_nodes, system.mask, grid.L)

    def _half_potential(self, t_mid: float) -> np.ndarray:
        if self._field_phase is None:
            return self._half_full
        g = ramp_envelope(t_mid, self.system.field)
        if g == 1.0:
            return self._half_full
        return self._half_static * np.exp(g * self._field_phase)

    def _kick_drift_kick(self, amplitudes: np.ndarray, half: np.ndarray) -> np.ndarray:
        psi = half * amplitudes
        psi = np.fft.ifft(self._kinetic * np.fft.fft(psi, norm="ortho"), norm="ortho")
        return half * psi

    def real_step(self, amplitudes: np.ndarray, t: float) -> np.ndarray:
        psi = self._kick_drift_kick(amplitudes, self._half_potential(t + 0.5 * self.cfg.dt))
        if self._mask is not None:
            psi *= self._mask
        if not np.all(np.isfinite(psi)):
            raise NumericOverflowError(f"Non-finite amplitudes after real-time step at t={t:.6g}", time=t)
        return psi

    def imaginary_step(self, amplitudes: np.ndarray) -> np.ndarray:
        psi = self._kick_drift_kick(amplitudes, self._half_full)
        norm = np.sqrt(np.sum(np.abs(psi) ** 2) * self.grid.dx)
        if not np.isfinite(norm) or norm < NORM_FLOOR:
            raise NumericUnderflowError(
                f"Imaginary-time norm collapsed to {norm:.3g}; reduce dtau (dtau={self.cfg.dt})", norm=float(norm)
            )
        return psi / norm


def step_real(
    psi: WaveFunction, t: float, system: SystemSpec, cfg: StepConfig, potential: np.ndarray | None = None
) -> WaveFunction:
    """One real-time step from t to t + dt; potential replaces the soft-core values when given"""
    if cfg.mode != StepMode.REAL_TIME:
        raise ConfigurationError("step_real needs a real_time StepConfig")
    op = SplitOperator(psi.grid, system, cfg, potential)
    return WaveFunction(psi.grid, op.real_step(psi.amplitudes, t))


def step_imag(
    psi: WaveFunction, system: SystemSpec, cfg: StepConfig, potential: np.ndarray | None = None
) -> WaveFunction:
    """One imaginary-time step of the field-free Hamiltonian, renormalized to unit norm"""
    if cfg.mode != StepMode.IMAGINARY_TIME:
        raise ConfigurationError("step_imag needs an imaginary_time StepConfig")
    op = SplitOperator(psi.grid, system.field_free(), cfg, potential)
    return WaveFunction(psi.grid, op.imaginary_step(psi.amplitudes))


def energy_expectation(psi: WaveFunction, system: SystemSpec, potential: np.ndarray | None = None) -> float:
    """<T> + <V> of the field-free Hamiltonian; <T> is evaluated in the spectral basis"""
    grid = psi.grid
    if potential is None:
        potential = soft_core(grid.x_nodes, system.potential)
    spectral = grid.to_spectral(psi.amplitudes)
    kinetic = float(np.sum(riesz_symbol(grid.k_nodes, system.alpha) * np.abs(spectral) ** 2))
    potential_energy = float(np.sum(potential * psi.density) * grid.dx)
    return (kinetic + potential_energy) / psi.norm2


def propagate(
    psi0: WaveFunction,
    system: SystemSpec,
    cfg: StepConfig,
    T_total: float,
    observer_stride: int,
    x_c: float,
) -> tuple[DecayTrace, WaveFunction]:
    """
    Real-time propagation from t = 0 to T_total, sampling P_b every observer_stride steps.

    Returns the survival trace and the final state. Emits a warning (once) when more than
    CONTAMINATION_THRESHOLD of the probability sits beyond the absorber onset.
    """
    if cfg.mode != StepMode.REAL_TIME:
        raise ConfigurationError("propagate needs a real_time StepConfig")
    ramp_end = system.field.ramp_end
    if not T_total > ramp_end:
        raise ConfigurationError(f"T_total={T_total} must exceed the ramp end {ramp_end}")
    if observer_stride < 1:
        raise ConfigurationError(f"observer_stride must be >= 1, got {observer_stride}")

    grid = psi0.grid
    op = SplitOperator(grid, system, cfg)
    n_steps = int(round(T_total / cfg.dt))
    x_cap = system.mask.x_cap if system.mask is not None else None
    if x_cap is not None and x_c >= x_cap:
        raise ConfigurationError(f"Bound-region half-width x_c={x_c} must lie inside the absorber onset x_cap={x_cap}")

    times = [0.0]
    survival = [survival_probability(psi0, x_c)]
    contaminated = False
    amplitudes = psi0.amplitudes.copy()
    report_every = max(1, n_steps // 10)

    logger.debug(
        f"Propagating alpha={float(system.alpha)}, F0={system.field.F0}, steps={n_steps}, dt={cfg.dt}, "
        f"stride={observer_stride}, x_c={x_c:.4g}"
    )
    for step in range(n_steps):
        t = step * cfg.dt
        amplitudes = op.real_step(amplitudes, t)
        done = step + 1
        if done % observer_stride == 0:
            snapshot = WaveFunction(grid, amplitudes)
            times.append(done * cfg.dt)
            survival.append(survival_probability(snapshot, x_c))
            if x_cap is not None and not contaminated:
                outside = probability_outside(snapshot, x_cap)
                if outside > CONTAMINATION_THRESHOLD:
                    contaminated = True
                    logger.warning(
                        f"Boundary contamination: {outside:.3f} of the probability lies beyond x_cap={x_cap} "
                        f"at t={done * cfg.dt:.1f}; the box may be too small for this field"
                    )
        if done % report_every == 0:
            logger.debug(f"  step {done}/{n_steps}, t={done * cfg.dt:.1f}, P_b={survival[-1]:.6e}")

    trace = DecayTrace(
        times=np.array(times),
        Pb=np.array(survival),
        x_c=x_c,
        ramp_end=ramp_end,
        contaminated=contaminated,
    )
    return trace, WaveFunction(grid, amplitudes)
