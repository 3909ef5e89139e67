"""
Uniform spatial grids on [-L, L) and their FFT-ordered wavenumber companions.

Transforms are unitary up to the measure: to_spectral() scales numpy's "ortho"
FFT by sqrt(dx) so that sum(|psi|^2) * dx == sum(|psi_k|^2) with no extra factors.
"""
import logging
from dataclasses import dataclass, field

import numpy as np

from core.errors import GridError

logger = logging.getLogger(__name__)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Immutable position grid x_j = -L + j*dx with wavenumbers k_n in FFT order"""
    L: float
    N: int
    dx: float
    x_nodes: np.ndarray = field(repr=False)
    k_nodes: np.ndarray = field(repr=False)

    @property
    def k_max(self) -> float:
        return float(np.pi / self.L * (self.N // 2))

    @property
    def center_index(self) -> int:
        """Index of the node at x = 0"""
        return self.N // 2

    def to_spectral(self, amplitudes: np.ndarray) -> np.ndarray:
        return np.fft.fft(amplitudes, norm="ortho") * np.sqrt(self.dx)

    def to_position(self, spectral: np.ndarray) -> np.ndarray:
        return np.fft.ifft(spectral, norm="ortho") / np.sqrt(self.dx)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values).real * self.dx)


def make_grid(L: float, N: int, power_of_two: bool = True) -> SpatialGrid:
    """
    Build a SpatialGrid.

    k_n = (2*pi/2L) * n for 0 <= n <= N/2 and (2*pi/2L) * (n - N) for N/2 < n < N,
    so the Nyquist mode sits at +N/2 (numpy's fftfreq puts it at -N/2).
    """
    if not L > 0:
        raise GridError(f"Grid half-width must be positive, got L={L}")
    if N < 4 or N % 2 != 0:
        raise GridError(f"Grid size must be an even integer >= 4, got N={N}")
    if power_of_two and not _is_power_of_two(N):
        raise GridError(f"Grid size must be a power of two, got N={N} (set power_of_two=False to allow it)")

    L = float(L)
    dx = 2.0 * L / N
    x_nodes = -L + dx * np.arange(N)
    n = np.arange(N)
    n = np.where(n <= N // 2, n, n - N)
    k_nodes = (np.pi / L) * n

    x_nodes.setflags(write=False)
    k_nodes.setflags(write=False)
    logger.debug(f"Grid built: L={L}, N={N}, dx={dx:.6g}, k_max={np.pi / L * (N // 2):.6g}")
    return SpatialGrid(L=L, N=int(N), dx=dx, x_nodes=x_nodes, k_nodes=k_nodes)
