import logging

import numpy as np
import pytest
from scipy.linalg import eigh, eigh_tridiagonal

from core.errors import BracketError, CalibrationError, ConfigurationError, GroundStateError
from tunneling import groundstate
from tunneling.grid import make_grid
from tunneling.groundstate import (
    GroundStateResult,
    bound_half_width,
    bound_region_radius,
    calibrate_softcore,
    solve_ground_state,
    state_change,
)
from tunneling.model import SoftCoreSpec, SystemSpec, riesz_symbol, soft_core
from tunneling.prop import StepConfig, StepMode, gaussian_wavefunction, step_imag


def _finite_difference_energy(spec: SoftCoreSpec, L: float = 40.0, dx: float = 0.02) -> float:
    x = np.arange(-L + dx, L, dx)
    diagonal = 1.0 / dx ** 2 + soft_core(x, spec)
    off_diagonal = np.full(x.size - 1, -0.5 / dx ** 2)
    values = eigh_tridiagonal(diagonal, off_diagonal, eigvals_only=True, select="i", select_range=(0, 0))
    return float(values[0])


def _spectral_matrix_energy(grid, alpha: float, spec: SoftCoreSpec) -> float:
    dft = np.fft.fft(np.eye(grid.N), norm="ortho", axis=0)
    kinetic = dft.conj().T @ np.diag(riesz_symbol(grid.k_nodes, alpha)) @ dft
    hamiltonian = kinetic + np.diag(soft_core(grid.x_nodes, spec))
    return float(eigh(hamiltonian, eigvals_only=True, subset_by_index=[0, 0])[0])


def test_harmonic_oscillator_ground_state():
    grid = make_grid(20.0, 1024)
    result = solve_ground_state(2.0, SoftCoreSpec(), grid, potential_values=0.5 * grid.x_nodes ** 2)
    assert result.converged
    assert result.E0 == pytest.approx(0.5, abs=1e-8)
    assert bound_half_width(result) == pytest.approx(1.0, abs=1e-3)


def test_soft_core_standard_case_matches_finite_differences(small_grid):
    spec = SoftCoreSpec(Z=1.0, a=1.0)
    result = solve_ground_state(2.0, spec, small_grid)
    assert result.E0 == pytest.approx(_finite_difference_energy(spec), abs=5e-3)
    assert result.Ip == pytest.approx(0.67, abs=0.01)


def test_fractional_ground_state_matches_dense_diagonalization():
    grid = make_grid(30.0, 256)
    spec = SoftCoreSpec(Z=1.0, a=1.0)
    result = solve_ground_state(1.5, spec, grid)
    assert result.E0 == pytest.approx(_spectral_matrix_energy(grid, 1.5, spec), abs=1e-5)


def test_ground_state_is_normalized_real_and_symmetric(small_grid):
    result = solve_ground_state(1.7, SoftCoreSpec(), small_grid)
    psi = result.psi0
    center = small_grid.center_index
    assert psi.norm2 == pytest.approx(1.0, abs=1e-12)
    assert psi.amplitudes[center].real > 0
    assert abs(psi.amplitudes[center].imag) < 1e-14
    # x_j and -x_j pair up as j and N - j around the center node
    np.testing.assert_allclose(psi.density[center + 1:], psi.density[center - 1:0:-1], atol=1e-10)


def test_non_convergence_reports_last_change(small_grid):
    with pytest.raises(GroundStateError) as excinfo:
        solve_ground_state(2.0, SoftCoreSpec(), small_grid, tol=1e-14, max_tau=2.0)
    assert excinfo.value.iterations > 0
    assert excinfo.value.last_delta > 1e-14


@pytest.mark.parametrize("kwargs", [{"tol": 0.0}, {"max_tau": 0.0}, {"state_tol": 0.0}])
def test_solver_rejects_bad_settings(small_grid, kwargs):
    with pytest.raises(ConfigurationError):
        solve_ground_state(2.0, SoftCoreSpec(), small_grid, **kwargs)


def test_initial_guess_must_share_the_grid(small_grid):
    other = gaussian_wavefunction(make_grid(40.0, 256))
    with pytest.raises(ConfigurationError):
        solve_ground_state(2.0, SoftCoreSpec(), small_grid, psi_init=other)


@pytest.mark.parametrize("alpha", [1.5, 2.0])
def test_converged_state_is_a_fixed_point(small_grid, alpha):
    spec = SoftCoreSpec()
    result = solve_ground_state(alpha, spec, small_grid)
    psi = result.psi0
    cfg = StepConfig(dt=groundstate.DEFAULT_DTAU, mode=StepMode.IMAGINARY_TIME)
    system = SystemSpec(alpha=alpha, potential=spec)
    for _ in range(100):
        psi = step_imag(psi, system, cfg)
    overlap = abs(np.vdot(result.psi0.amplitudes, psi.amplitudes)) * small_grid.dx
    assert overlap > 0.999999
    # Excited admixture left at convergence is below the state tolerance, not just the energy one
    assert state_change(result.psi0.amplitudes, psi.amplitudes, small_grid.dx) < 1e-10


def test_state_change_ignores_global_phase(small_grid):
    psi = gaussian_wavefunction(small_grid).amplitudes
    assert state_change(psi, np.exp(0.7j) * psi, small_grid.dx) == pytest.approx(0.0, abs=1e-14)
    other = gaussian_wavefunction(small_grid, x0=1.0).amplitudes
    assert state_change(psi, other, small_grid.dx) > 0.1


def test_tight_state_tolerance_needs_more_imaginary_time(small_grid):
    loose = solve_ground_state(1.5, SoftCoreSpec(), small_grid, state_tol=1e-4)
    tight = solve_ground_state(1.5, SoftCoreSpec(), small_grid, state_tol=1e-12)
    assert tight.iterations > loose.iterations
    assert tight.E0 == pytest.approx(loose.E0, abs=1e-9)


def test_bound_region_radius_is_clamped():
    assert bound_region_radius(2.0, x_cap=100.0) == pytest.approx(8.0)
    assert bound_region_radius(30.0, x_cap=100.0) == pytest.approx(90.0)
    assert bound_region_radius(2.0, x_cap=100.0, factor=3.0) == pytest.approx(6.0)


class _FakeSolver:
    """Stands in for the imaginary-time solver with a closed-form Ip(a)"""

    def __init__(self, ip_of_a):
        self.ip_of_a = ip_of_a
        self.calls = []

    def __call__(self, alpha, potential, grid, psi_init=None, **kwargs):
        self.calls.append((potential.a, psi_init is not None))
        psi = gaussian_wavefunction(grid)
        return GroundStateResult(psi0=psi, E0=-self.ip_of_a(potential.a), iterations=1, converged=True)


def test_calibration_reaches_target(monkeypatch, small_grid):
    fake = _FakeSolver(lambda a: 1.0 / (1.0 + a))
    monkeypatch.setattr(groundstate, "solve_ground_state", fake)
    result = calibrate_softcore(1.5, 0.25, 1.0, small_grid, tol_Ip=1e-6)
    assert abs(result.achieved_Ip - 0.25) <= 1e-6
    assert result.a_star == pytest.approx(3.0, abs=1e-4)
    lo, hi = result.bracket
    assert lo <= result.a_star <= hi
    assert (lo, hi) == (2.0, 4.0)
    assert result.ground_state is not None
    # Every solve after the first starts from the previous state
    assert not fake.calls[0][1]
    assert all(warm for _, warm in fake.calls[1:])


def test_calibration_searches_smaller_a_when_binding_is_too_weak(monkeypatch, small_grid):
    monkeypatch.setattr(groundstate, "solve_ground_state", _FakeSolver(lambda a: 1.0 / (1.0 + a)))
    result = calibrate_softcore(2.0, 0.8, 1.0, small_grid, tol_Ip=1e-6)
    assert result.a_star == pytest.approx(0.25, abs=1e-4)
    lo, hi = result.bracket
    assert lo <= result.a_star <= hi


def test_unreachable_target_raises_bracket_error(monkeypatch, small_grid):
    monkeypatch.setattr(groundstate, "solve_ground_state", _FakeSolver(lambda a: 1.0 / (1.0 + a)))
    with pytest.raises(BracketError):
        calibrate_softcore(2.0, 1.5, 1.0, small_grid)


def test_non_monotone_ip_is_rejected(monkeypatch, small_grid, caplog):
    monkeypatch.setattr(groundstate, "solve_ground_state", _FakeSolver(lambda a: 0.3 + 0.1 * (a - 3.0) ** 2))
    with caplog.at_level(logging.WARNING, logger="tunneling.groundstate"):
        with pytest.raises(CalibrationError):
            calibrate_softcore(2.0, 0.05, 1.0, small_grid)
    assert "not decreasing" in caplog.text


@pytest.mark.parametrize(
    "Ip_target, kwargs",
    [(0.0, {}), (-0.5, {}), (0.5, {"tol_Ip": 0.0}), (0.5, {"expansion_factor": 1.0})],
)
def test_calibration_rejects_bad_settings(small_grid, Ip_target, kwargs):
    with pytest.raises(ConfigurationError):
        calibrate_softcore(2.0, Ip_target, 1.0, small_grid, **kwargs)


def test_real_calibration_standard_case():
    grid = make_grid(30.0, 256)
    result = calibrate_softcore(2.0, 0.67, 1.0, grid, tol_Ip=1e-3, tol=1e-9, dtau=0.01)
    assert abs(result.achieved_Ip - 0.67) <= 1e-3
    assert 0.5 < result.a_star < 2.0


@pytest.mark.slow
def test_standard_case_at_production_resolution():
    grid = make_grid(100.0, 4096)
    spec = SoftCoreSpec(Z=1.0, a=1.0)
    result = solve_ground_state(2.0, spec, grid)
    assert result.E0 == pytest.approx(_finite_difference_energy(spec, L=100.0), abs=5e-3)
    assert result.E0 == pytest.approx(-0.67, abs=0.01)


@pytest.mark.slow
def test_energy_and_tails_across_orders():
    grid = make_grid(100.0, 4096)
    results = {alpha: solve_ground_state(alpha, SoftCoreSpec(), grid) for alpha in (1.1, 1.4, 1.5, 1.7, 2.0)}
    energies = [results[alpha].E0 for alpha in (1.1, 1.4, 1.7, 2.0)]
    assert all(later < earlier for earlier, later in zip(energies, energies[1:]))
    tail = {alpha: float(np.interp(20.0, grid.x_nodes, results[alpha].psi0.density)) for alpha in (2.0, 1.5, 1.1)}
    assert tail[2.0] < tail[1.5] < tail[1.1]


@pytest.mark.slow
def test_doubling_the_grid_leaves_the_energy_unchanged():
    spec = SoftCoreSpec(Z=1.0, a=1.0)
    coarse = solve_ground_state(2.0, spec, make_grid(100.0, 2048))
    fine = solve_ground_state(2.0, spec, make_grid(100.0, 4096))
    assert abs(fine.E0 - coarse.E0) < 1e-8


@pytest.mark.slow
def test_calibrating_the_standard_case_to_its_own_ip_returns_unit_softening():
    grid = make_grid(30.0, 256)
    measured = solve_ground_state(2.0, SoftCoreSpec(Z=1.0, a=1.0), grid, dtau=0.01)
    result = calibrate_softcore(2.0, measured.Ip, 1.0, grid, tol_Ip=1e-5, dtau=0.01)
    assert result.a_star == pytest.approx(1.0, abs=1e-3)
