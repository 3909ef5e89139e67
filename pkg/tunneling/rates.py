"""
Survival probability, instantaneous decay rate, plateau detection and rate fits.

P_b(t) is used as sampled (not divided by its value at the end of the ramp); the fitted
rate does not depend on that normalization, only the intercept P0 does.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import linregress

from core.errors import DegenerateInputError, NoPlateauError, RateError, SlopeFitError

if TYPE_CHECKING:
    from tunneling.model import FractionalOrder
    from tunneling.prop import WaveFunction

logger = logging.getLogger(__name__)

RATE_FLOOR = 1e-12
DEFAULT_PLATEAU_TOLERANCE = 0.10
DEFAULT_MIN_WINDOW = 50.0
_PB_ROUNDOFF = 1e-9


@dataclass
class DecayTrace:
    """Sampled bound-region survival probability"""
    times: np.ndarray
    Pb: np.ndarray
    x_c: float
    ramp_end: float = 0.0
    contaminated: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.Pb = np.asarray(self.Pb, dtype=float)
        if self.times.shape != self.Pb.shape or self.times.ndim != 1:
            raise RateError("times and Pb must be 1D arrays of equal length")
        if self.times.size > 1 and np.any(np.diff(self.times) <= 0):
            raise RateError("Trace times must be strictly increasing")
        if not np.all(np.isfinite(self.Pb)) or np.any(self.Pb < 0) or np.any(self.Pb > 1 + _PB_ROUNDOFF):
            raise RateError("Survival probabilities must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass
class RateFit:
    gamma: float
    window: tuple[float, float]
    P0: float
    r_squared: float
    gamma_inst: tuple[np.ndarray, np.ndarray] = field(repr=False)
    measurable: bool = True
    n_points: int = 0

    @property
    def t1(self) -> float:
        return self.window[0]

    @property
    def t2(self) -> float:
        return self.window[1]


@dataclass
class SlopeFit:
    """Least-squares line of -ln(Gamma) against 1/F0"""
    alpha: "FractionalOrder | None"
    points: list[tuple[float, float]]
    m_alpha: float
    intercept: float
    r_squared: float


def survival_probability(psi: "WaveFunction", x_c: float) -> float:
    """Probability inside the bound region |x| <= x_c"""
    grid = psi.grid
    if not 0 < x_c < grid.L:
        raise RateError(f"Bound-region half-width must satisfy 0 < x_c < L={grid.L}, got {x_c}")
    inside = np.abs(grid.x_nodes) <= x_c
    return float(np.sum(np.abs(psi.amplitudes[inside]) ** 2) * grid.dx)


def instantaneous_rate(trace: DecayTrace) -> tuple[np.ndarray, np.ndarray]:
    """
    Gamma_inst(t_i) = -[ln Pb(t_{i+1}) - ln Pb(t_{i-1})] / (t_{i+1} - t_{i-1}).

    Central differences inside, one-sided differences at both ends.
    """
    if len(trace) < 3:
        raise RateError(f"Need at least 3 samples for an instantaneous rate, got {len(trace)}")
    if np.any(trace.Pb <= 0):
        raise RateError("Survival probability must be strictly positive to take its logarithm")
    t = trace.times
    log_pb = np.log(trace.Pb)
    rate = np.empty_like(t)
    rate[1:-1] = -(log_pb[2:] - log_pb[:-2]) / (t[2:] - t[:-2])
    rate[0] = -(log_pb[1] - log_pb[0]) / (t[1] - t[0])
    rate[-1] = -(log_pb[-1] - log_pb[-2]) / (t[-1] - t[-2])
    return t.copy(), rate


def _is_flat(values: np.ndarray, tolerance: float, floor: float) -> bool:
    median = float(np.median(values))
    deviation = float(np.max(np.abs(values - median)))
    if abs(median) <= floor:
        return deviation <= floor
    return deviation <= tolerance * abs(median)


def _longest_plateau(t: np.ndarray, rate: np.ndarray, tolerance: float, min_window: float, floor: float) -> tuple[int, int]:
    """
    Longest index window [lo, hi] whose rates stay within tolerance of their median.

    Coarse pass over ~sqrt(S) evenly spaced nodes (longest spans first), then the winning
    window is grown one sample at a time on the full grid. Cost stays O(S^2).
    """
    S = t.size
    stride = max(1, math.ceil(S / max(2, math.isqrt(S))))
    coarse = np.arange(0, S, stride)
    if coarse[-1] != S - 1:
        coarse = np.append(coarse, S - 1)
    n = coarse.size

    best = None
    for span in range(n - 1, 0, -1):
        for start in range(0, n - span):
            lo, hi = coarse[start], coarse[start + span]
            if t[hi] - t[lo] < min_window:
                continue
            if _is_flat(rate[lo:hi + 1], tolerance, floor):
                best = (int(lo), int(hi))
                break
        if best is not None:
            break

    if best is None:
        raise NoPlateauError(
            f"No window of length >= {min_window} with rate variation <= {tolerance:.0%} of its median "
            "(field too weak for the propagation time, or over-the-barrier dynamics)"
        )

    lo, hi = best
    while lo > 0 and _is_flat(rate[lo - 1:hi + 1], tolerance, floor):
        lo -= 1
    while hi < S - 1 and _is_flat(rate[lo:hi + 2], tolerance, floor):
        hi += 1
    return lo, hi


def fit_window(trace: DecayTrace, t1: float, t2: float, rate_floor: float = RATE_FLOOR) -> RateFit:
    """Linear regression of ln Pb on t over [t1, t2]"""
    if not t1 < t2:
        raise RateError(f"Fit window needs t1 < t2, got ({t1}, {t2})")
    inside = (trace.times >= t1) & (trace.times <= t2)
    if np.count_nonzero(inside) < 3:
        raise RateError(f"Fit window [{t1}, {t2}] holds fewer than 3 samples")
    if np.any(trace.Pb[inside] <= 0):
        raise RateError("Survival probability must be strictly positive inside the fit window")

    t = trace.times[inside]
    result = linregress(t, np.log(trace.Pb[inside]))
    gamma = -float(result.slope)
    measurable = True
    if abs(gamma) < rate_floor:
        gamma = 0.0
        measurable = False
    elif gamma < 0:
        raise RateError(f"Survival probability grows over [{t1}, {t2}] (slope {-gamma:.3e})")

    times, rate = instantaneous_rate(trace)
    r_squared = min(1.0, max(0.0, float(result.rvalue) ** 2))
    return RateFit(
        gamma=gamma,
        window=(float(t[0]), float(t[-1])),
        P0=float(np.exp(result.intercept)),
        r_squared=r_squared,
        gamma_inst=(times, rate),
        measurable=measurable,
        n_points=int(t.size),
    )


def fit_rate(
    trace: DecayTrace,
    plateau_tolerance: float = DEFAULT_PLATEAU_TOLERANCE,
    min_window: float = DEFAULT_MIN_WINDOW,
    rate_floor: float = RATE_FLOOR,
) -> RateFit:
    """
    Decay rate from the longest post-ramp window where Gamma_inst stays within
    plateau_tolerance of its median, fitted by regression of ln Pb on t.
    """
    times, rate = instantaneous_rate(trace)
    post_ramp = np.flatnonzero(times >= trace.ramp_end)
    if post_ramp.size < 3 or times[post_ramp[-1]] - times[post_ramp[0]] < min_window:
        raise NoPlateauError(
            f"Trace covers less than min_window={min_window} after the ramp end {trace.ramp_end}"
        )

    offset = int(post_ramp[0])
    lo, hi = _longest_plateau(times[offset:], rate[offset:], plateau_tolerance, min_window, rate_floor)
    fit = fit_window(trace, float(times[offset + lo]), float(times[offset + hi]), rate_floor)
    if not fit.measurable:
        logger.info(f"Fitted decay below the rate floor {rate_floor:g}; reporting no measurable decay")
    logger.debug(
        f"Rate fit: gamma={fit.gamma:.6e}, window=({fit.t1:.1f}, {fit.t2:.1f}), r2={fit.r_squared:.6f}, "
        f"points={fit.n_points}"
    )
    return fit


def shift_window(trace: DecayTrace, fit: RateFit, fraction: float, rate_floor: float = RATE_FLOOR) -> RateFit:
    """Refit on the fitted window shifted by fraction of its length (clipped to the post-ramp trace)"""
    t1, t2 = fit.window
    shift = fraction * (t2 - t1)
    lo = max(t1 + shift, trace.ramp_end, float(trace.times[0]))
    hi = min(t2 + shift, float(trace.times[-1]))
    return fit_window(trace, lo, hi, rate_floor)


def fit_slope(points: list[tuple[float, float]], alpha: "FractionalOrder | None" = None) -> SlopeFit:
    """Fit -ln(Gamma) = m_alpha / F0 + intercept"""
    if len(points) < 3:
        raise SlopeFitError(f"Need at least 3 (F0, gamma) points, got {len(points)}")
    F0 = np.array([p[0] for p in points], dtype=float)
    gamma = np.array([p[1] for p in points], dtype=float)
    if np.unique(F0).size != F0.size:
        raise DegenerateInputError(f"Duplicate field strengths in slope fit: {sorted(F0.tolist())}")
    if np.any(F0 <= 0):
        raise SlopeFitError("Field strengths must be positive")
    if np.any(gamma <= 0):
        raise SlopeFitError("All rates must be positive to take -ln(gamma)")

    result = linregress(1.0 / F0, -np.log(gamma))
    return SlopeFit(
        alpha=alpha,
        points=[(float(f), float(g)) for f, g in sorted(zip(F0, gamma))],
        m_alpha=float(result.slope),
        intercept=float(result.intercept),
        r_squared=min(1.0, max(0.0, float(result.rvalue) ** 2)),
    )


def estimate_total_time(
    C_alpha: float,
    F0: float,
    T_min: float = 2000.0,
    T_max: float = 20000.0,
    prefactor: float = 1.0,
) -> float:
    """
    Propagation budget max(T_min, 20 / Gamma_estimate), Gamma_estimate = prefactor * exp(-C_alpha / F0),
    capped at T_max. With the default prefactor the estimate understates Gamma, so weak fields
    routinely reach the cap; that is logged at debug level and a too-short window shows up
    as a failed rate fit instead.
    """
    if F0 <= 0:
        raise RateError(f"Field strength must be positive, got F0={F0}")
    gamma_estimate = prefactor * math.exp(-C_alpha / F0)
    wanted = T_min if gamma_estimate <= 0 else max(T_min, 20.0 / gamma_estimate)
    if wanted > T_max:
        logger.debug(f"Estimated decay window for F0={F0} needs T_total={wanted:.3g}; capped at T_max={T_max:g}")
        return float(T_max)
    return float(wanted)
