"""
Simulation scenarios behind the CLI subcommands.

A scenario turns a RunConfig into independent jobs, runs them (in a process pool
when more than one worker is allowed), and writes CSV/JSON results plus ledger rows
into the output directory. Jobs only exchange plain data (floats and numpy arrays),
and results are sorted before anything is written, so the files do not depend on
scheduling order.

Stages:
    1. prepare_alpha: field-free ground state per alpha (Protocol A: fixed a;
       Protocol B: a calibrated to Ip_target)
    2. simulate_point: real-time propagation and rate fit per (alpha, F0)
    3. slopes, model curves and ratios per alpha
"""
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path

import numpy as np

from config import config_hash
from core.errors import ConfigurationError, RateError, TunnelingError
from core.models import RunConfig
from database import (
    LEDGER_FILE_NAME,
    RunStatusEnum,
    finish_run,
    init_db,
    record_calibration,
    record_rate_point,
    start_run,
)
from outputs import read_tables_same_config, write_json, write_provenance, write_table
from tunneling.checkpoint import save_checkpoint
from tunneling.fadk import (
    TunnelingModel,
    complex_action,
    fadk_coefficient,
    im_action_quadrature,
    normalized_rate_curve,
    ratio_to_model,
)
from tunneling.grid import make_grid
from tunneling.groundstate import bound_half_width, bound_region_radius, calibrate_softcore, solve_ground_state
from tunneling.model import (
    FieldSpec,
    MaskSpec,
    SoftCoreSpec,
    SystemSpec,
    barrier_suppression_field,
    soft_core_suppression_field,
)
from tunneling.prop import StepConfig, StepMode, WaveFunction, propagate
from tunneling.rates import (
    DecayTrace,
    RateFit,
    SlopeFit,
    estimate_total_time,
    fit_rate,
    fit_slope,
    instantaneous_rate,
    shift_window,
)

logger = logging.getLogger(__name__)

STATUS_OK = RunStatusEnum.OK.value
STATUS_FAILED = RunStatusEnum.FAILED.value
# Ran under field.allow_over_barrier; the rate is kept but the row carries the warning
STATUS_OVER_BARRIER = RunStatusEnum.OVER_BARRIER.value
USABLE_STATUSES = (STATUS_OK, STATUS_OVER_BARRIER)


def _tag(value: float) -> str:
    return f"{value:g}"


# ---------------------------------------------------------------------------
# Job descriptions (picklable)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JobSettings:
    """Numerical settings shared by every job of a scenario"""
    L: float
    N: int
    power_of_two: bool
    dt: float
    dtau: float
    ground_state_tol: float
    ground_state_state_tol: float
    max_tau: float
    observer_stride: int
    ramp_shape: str
    T_ramp: float
    x_cap: float
    eta: float
    m: float
    plateau_tolerance: float
    min_window: float
    rate_floor: float
    tol_Ip: float
    expansion_factor: float

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "JobSettings":
        return cls(
            L=cfg.grid.L,
            N=cfg.grid.N,
            power_of_two=cfg.grid.power_of_two,
            dt=cfg.propagation.dt,
            dtau=cfg.propagation.dtau,
            ground_state_tol=cfg.propagation.ground_state_tol,
            ground_state_state_tol=cfg.propagation.ground_state_state_tol,
            max_tau=cfg.propagation.max_tau,
            observer_stride=cfg.propagation.observer_stride,
            ramp_shape=cfg.field.ramp_shape.value,
            T_ramp=cfg.field.T_ramp,
            x_cap=cfg.x_cap,
            eta=cfg.mask.eta,
            m=cfg.mask.m,
            plateau_tolerance=cfg.rates.plateau_tolerance,
            min_window=cfg.rates.min_window,
            rate_floor=cfg.rates.rate_floor,
            tol_Ip=cfg.calibration.tol_Ip,
            expansion_factor=cfg.calibration.expansion_factor,
        )

    def grid(self):
        return make_grid(self.L, self.N, power_of_two=self.power_of_two)

    def solver_kwargs(self) -> dict:
        return {
            "tol": self.ground_state_tol,
            "state_tol": self.ground_state_state_tol,
            "dtau": self.dtau,
            "max_tau": self.max_tau,
        }


@dataclass
class AlphaPreparation:
    """Ground state (and calibration, Protocol B) for one fractional order"""
    alpha: float
    Z: float
    a: float | None = None
    E0: float | None = None
    iterations: int | None = None
    half_width: float | None = None
    psi0: np.ndarray | None = field(default=None, repr=False)
    Ip_target: float | None = None
    calibration_iterations: int | None = None
    bracket: tuple[float, float] | None = None
    status: str = STATUS_OK
    message: str = ""

    @property
    def Ip(self) -> float | None:
        return None if self.E0 is None else -self.E0

    @property
    def ok(self) -> bool:
        return self.status == STATUS_OK


@dataclass(frozen=True)
class PointJob:
    alpha: float
    F0: float
    Z: float
    a: float
    Ip: float
    Ip_model: float
    T_total: float
    x_c: float
    psi0: np.ndarray = field(repr=False)
    settings: JobSettings = field(repr=False)
    checkpoint_path: str | None = None


@dataclass
class PointResult:
    alpha: float
    F0: float
    Ip: float | None
    T_total: float | None
    x_c: float | None
    fit: RateFit | None = field(default=None, repr=False)
    times: np.ndarray | None = field(default=None, repr=False)
    Pb: np.ndarray | None = field(default=None, repr=False)
    ramp_end: float = 0.0
    contaminated: bool = False
    status: str = STATUS_OK
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in USABLE_STATUSES


@dataclass
class SweepResult:
    """Everything a sweep produced, keyed by fractional order"""
    config_hash: str
    protocol: str
    preparations: list[AlphaPreparation]
    points: list[PointResult]
    slopes: dict[float, SlopeFit | None]
    predictions: dict[float, float]
    files: list[Path] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for p in self.points if not p.ok) + sum(1 for p in self.preparations if not p.ok)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def gamma(self, alpha: float, F0: float) -> float | None:
        for point in self.points:
            if point.alpha == alpha and point.F0 == F0 and point.ok and point.fit is not None:
                return point.fit.gamma
        return None


# ---------------------------------------------------------------------------
# Worker functions (top level so they pickle)
# ---------------------------------------------------------------------------

def prepare_alpha(
    alpha: float, Z: float, a: float | None, Ip_target: float | None, settings: JobSettings, calibrate: bool
) -> AlphaPreparation:
    """Solve (Protocol A) or calibrate (Protocol B) the field-free ground state for one alpha"""
    prep = AlphaPreparation(alpha=alpha, Z=Z, a=a, Ip_target=Ip_target)
    try:
        grid = settings.grid()
        if calibrate:
            calibration = calibrate_softcore(
                alpha,
                Ip_target,
                Z,
                grid,
                tol_Ip=settings.tol_Ip,
                expansion_factor=settings.expansion_factor,
                **settings.solver_kwargs(),
            )
            result = calibration.ground_state
            prep.a = calibration.a_star
            prep.calibration_iterations = calibration.iterations
            prep.bracket = calibration.bracket
        else:
            result = solve_ground_state(alpha, SoftCoreSpec(Z=Z, a=a), grid, **settings.solver_kwargs())
        prep.E0 = result.E0
        prep.iterations = result.iterations
        prep.half_width = bound_half_width(result)
        prep.psi0 = result.psi0.amplitudes
    except TunnelingError as e:
        logger.error(f"Ground-state preparation failed for alpha={alpha}: {e}")
        prep.status = STATUS_FAILED
        prep.message = str(e)
    return prep


def simulate_point(job: PointJob) -> PointResult:
    """Propagate one (alpha, F0) point and fit its decay rate; failures are recorded, not raised"""
    s = job.settings
    result = PointResult(alpha=job.alpha, F0=job.F0, Ip=job.Ip, T_total=job.T_total, x_c=job.x_c)
    try:
        grid = s.grid()
        system = SystemSpec(
            alpha=job.alpha,
            potential=SoftCoreSpec(Z=job.Z, a=job.a),
            field=FieldSpec(F0=job.F0, ramp_shape=s.ramp_shape, T_ramp=s.T_ramp),
            mask=MaskSpec(x_cap=s.x_cap, eta=s.eta, m=s.m),
        )
        step = StepConfig(dt=s.dt, mode=StepMode.REAL_TIME, apply_mask=True)
        trace, final = propagate(WaveFunction(grid, job.psi0), system, step, job.T_total, s.observer_stride, job.x_c)
        result.times, result.Pb = trace.times, trace.Pb
        result.ramp_end = trace.ramp_end
        result.contaminated = trace.contaminated
        if job.checkpoint_path is not None:
            save_checkpoint(job.checkpoint_path, final, job.alpha, float(trace.times[-1]), StepMode.REAL_TIME, True)
        result.fit = fit_rate(trace, s.plateau_tolerance, s.min_window, s.rate_floor)
        logger.info(
            f"alpha={job.alpha:g}, F0={job.F0:g}: Gamma={result.fit.gamma:.6e} over "
            f"[{result.fit.t1:.1f}, {result.fit.t2:.1f}] (r2={result.fit.r_squared:.6f})"
        )
    except TunnelingError as e:
        logger.error(f"Field point alpha={job.alpha:g}, F0={job.F0:g} failed: {e}")
        result.status = STATUS_FAILED
        result.message = str(e)
    return result


def _run_jobs(fn, jobs: list, workers: int | None) -> list:
    """Apply fn to each job (argument tuple) and return results in job order"""
    if not jobs:
        return []
    if workers is None:
        workers = min(len(jobs), os.cpu_count() or 1)
    workers = max(1, min(workers, len(jobs)))
    if workers == 1:
        return [fn(*job) for job in jobs]
    logger.info(f"Running {len(jobs)} jobs on {workers} worker processes")
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = [executor.submit(fn, *job) for job in jobs]
        return [future.result() for future in futures]


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

class _Ledger:
    """Run row bookkeeping for one command"""

    def __init__(self, cfg: RunConfig, command: str):
        self.out_dir = Path(cfg.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config_hash = config_hash(cfg)
        self.config_json = cfg.model_dump(mode="json")
        self.started = datetime.now()
        self.SessionLocal = init_db(self.out_dir / LEDGER_FILE_NAME)
        self.run_id = start_run(self.SessionLocal, command, self.config_hash, self.config_json)
        self.files: list[Path] = []

    def add_file(self, path: Path) -> Path:
        self.files.append(Path(path))
        return path

    def point(self, point: PointResult):
        fit = point.fit
        record_rate_point(
            self.SessionLocal,
            self.run_id,
            alpha=point.alpha,
            F0=point.F0,
            Ip=point.Ip,
            gamma=fit.gamma if fit else None,
            t1=fit.t1 if fit else None,
            t2=fit.t2 if fit else None,
            r_squared=fit.r_squared if fit else None,
            T_total=point.T_total,
            status=point.status,
            message=point.message or None,
        )

    def calibration(self, prep: AlphaPreparation):
        record_calibration(
            self.SessionLocal,
            self.run_id,
            alpha=prep.alpha,
            Z=prep.Z,
            Ip_target=prep.Ip_target,
            a_star=prep.a if prep.ok else None,
            achieved_Ip=prep.Ip,
            iterations=prep.calibration_iterations,
            status=prep.status,
            message=prep.message or None,
        )

    def finish(self, failures: int, total: int, message: str | None = None):
        if failures == 0:
            status = RunStatusEnum.OK
        elif failures < total:
            status = RunStatusEnum.PARTIAL
        else:
            status = RunStatusEnum.FAILED
        finish_run(self.SessionLocal, self.run_id, status, message)
        self.add_file(write_provenance(self.out_dir, self.command, self.config_hash, self.config_json, self.started, self.files))


def check_sweep_fields(
    F0_list: list[float], Ip: float, Z: float, allow_over_barrier: bool, x_cap: float, context: str
) -> dict[float, str]:
    """
    Over-the-barrier guard and box-size advisory for one ionization potential.

    Returns the warning message for each field at or above Ip^2/(4Z) that runs under
    the override; without the override such fields raise ConfigurationError.
    """
    F_bsi = barrier_suppression_field(Ip, Z)
    over = [F0 for F0 in F0_list if F0 >= F_bsi]
    warnings = {}
    if over:
        if not allow_over_barrier:
            raise ConfigurationError(
                f"{context}: fields {over} reach the barrier-suppression estimate Ip^2/(4Z)={F_bsi:.6g} "
                f"(Ip={Ip:.6g}); set field.allow_over_barrier to run them anyway"
            )
        logger.warning(f"{context}: fields {over} are at or above Ip^2/(4Z)={F_bsi:.6g}; over-the-barrier override set")
        warnings = {
            F0: f"over the barrier: F0={F0:g} >= Ip^2/(4Z)={F_bsi:.6g}; run under field.allow_over_barrier"
            for F0 in over
        }
    for F0 in F0_list:
        if x_cap < 2.0 * Ip / F0:
            logger.warning(
                f"{context}: absorber onset x_cap={x_cap:.4g} is inside twice the exit point 2*Ip/F0={2 * Ip / F0:.4g} "
                f"for F0={F0:g}; consider a larger box"
            )
    return warnings


def _flag_over_barrier(points: list[PointResult], warnings: dict[tuple[float, float], str]) -> None:
    """Mark successful points that ran above the barrier-suppression field"""
    for point in points:
        warning = warnings.get((point.alpha, point.F0))
        if warning is None:
            continue
        if point.status == STATUS_OK:
            point.status = STATUS_OVER_BARRIER
            point.message = warning
        else:
            point.message = f"{point.message} ({warning})" if point.message else warning


def _prepare_all(cfg: RunConfig, calibrate: bool, ledger: _Ledger | None = None) -> list[AlphaPreparation]:
    settings = JobSettings.from_config(cfg)
    if calibrate and cfg.system.Ip_target is None:
        raise ConfigurationError("Calibration needs system.Ip_target")
    if not calibrate and cfg.system.a is None:
        raise ConfigurationError("A fixed-potential ground state needs system.a")
    jobs = [
        (alpha, cfg.system.Z, None if calibrate else cfg.system.a, cfg.system.Ip_target if calibrate else None, settings, calibrate)
        for alpha in sorted(cfg.system.alphas)
    ]
    preparations = _run_jobs(prepare_alpha, jobs, cfg.workers)
    if ledger is not None and calibrate:
        for prep in preparations:
            ledger.calibration(prep)
    return preparations


def _bound_radius(cfg: RunConfig, prep: AlphaPreparation) -> float:
    if cfg.rates.x_c is not None:
        return cfg.rates.x_c
    return bound_region_radius(prep.half_width, cfg.x_cap, cfg.rates.x_c_factor)


def _total_time(cfg: RunConfig, alpha: float, Ip_model: float, F0: float) -> float:
    if cfg.propagation.T_total is not None:
        return cfg.propagation.T_total
    return estimate_total_time(
        fadk_coefficient(alpha, Ip_model),
        F0,
        T_min=cfg.propagation.T_min,
        T_max=cfg.propagation.T_max,
        prefactor=cfg.propagation.rate_prefactor,
    )


def _model_Ip(cfg: RunConfig, prep: AlphaPreparation, protocol: str) -> float:
    """Ip used by the fADK model: measured in Protocol A, the target in Protocol B"""
    if protocol == "B":
        return cfg.system.Ip_target
    return prep.Ip


def _point_jobs(
    cfg: RunConfig, prep: AlphaPreparation, protocol: str, F0_list: list[float], checkpoint_dir: Path | None = None
) -> list[PointJob]:
    settings = JobSettings.from_config(cfg)
    Ip_model = _model_Ip(cfg, prep, protocol)
    x_c = _bound_radius(cfg, prep)
    jobs = []
    for F0 in sorted(F0_list):
        checkpoint = None
        if checkpoint_dir is not None:
            checkpoint = str(checkpoint_dir / f"final_alpha{_tag(prep.alpha)}_F{_tag(F0)}.ftwf")
        jobs.append(
            PointJob(
                alpha=prep.alpha,
                F0=F0,
                Z=prep.Z,
                a=prep.a,
                Ip=prep.Ip,
                Ip_model=Ip_model,
                T_total=_total_time(cfg, prep.alpha, Ip_model, F0),
                x_c=x_c,
                psi0=prep.psi0,
                settings=settings,
                checkpoint_path=checkpoint,
            )
        )
    return jobs


def _failed_points(prep: AlphaPreparation, F0_list: list[float], message: str) -> list[PointResult]:
    return [
        PointResult(alpha=prep.alpha, F0=F0, Ip=prep.Ip, T_total=None, x_c=None, status=STATUS_FAILED, message=message)
        for F0 in sorted(F0_list)
    ]


def _rate_row(point: PointResult) -> dict:
    fit = point.fit
    return {
        "alpha": point.alpha,
        "F0": point.F0,
        "gamma": fit.gamma if fit else math.nan,
        "t1": fit.t1 if fit else math.nan,
        "t2": fit.t2 if fit else math.nan,
        "r2": fit.r_squared if fit else math.nan,
        "Ip": point.Ip if point.Ip is not None else math.nan,
        "P0": fit.P0 if fit else math.nan,
        "measurable": bool(fit.measurable) if fit else False,
        "T_total": point.T_total if point.T_total is not None else math.nan,
        "x_c": point.x_c if point.x_c is not None else math.nan,
        "status": point.status,
        "message": point.message,
    }


def _trace_rows(point: PointResult) -> list[dict]:
    if len(point.times) < 3 or np.any(point.Pb <= 0):
        rate = np.full_like(point.times, np.nan)
    else:
        _, rate = instantaneous_rate(DecayTrace(point.times, point.Pb, point.x_c, point.ramp_end))
    return [{"t": t, "Pb": pb, "Gamma_inst": g} for t, pb, g in zip(point.times, point.Pb, rate)]


def _slope_points(points: list[PointResult], alpha: float) -> list[tuple[float, float]]:
    usable = []
    for point in points:
        if point.alpha != alpha:
            continue
        if not point.ok or point.fit is None or not point.fit.measurable or point.fit.gamma <= 0:
            logger.warning(f"Slope fit alpha={alpha:g}: skipping F0={point.F0:g} ({point.message or 'no measurable decay'})")
            continue
        usable.append((point.F0, point.fit.gamma))
    return usable


def _fit_slopes(points: list[PointResult], alphas: list[float]) -> dict[float, SlopeFit | None]:
    slopes = {}
    for alpha in alphas:
        usable = _slope_points(points, alpha)
        try:
            slopes[alpha] = fit_slope(usable, alpha=alpha)
            logger.info(f"alpha={alpha:g}: m_alpha={slopes[alpha].m_alpha:.6f} (r2={slopes[alpha].r_squared:.6f})")
        except RateError as e:
            logger.warning(f"Slope fit alpha={alpha:g} skipped: {e}")
            slopes[alpha] = None
    return slopes


def _slope_rows(slopes: dict[float, SlopeFit | None], Ip_by_alpha: dict[float, float | None]) -> list[dict]:
    rows = []
    for alpha in sorted(slopes):
        fit = slopes[alpha]
        Ip = Ip_by_alpha.get(alpha)
        rows.append(
            {
                "alpha": alpha,
                "m_alpha": fit.m_alpha if fit else math.nan,
                "intercept": fit.intercept if fit else math.nan,
                "r2": fit.r_squared if fit else math.nan,
                "C_alpha_predicted": fadk_coefficient(alpha, Ip) if Ip else math.nan,
                "Ip": Ip if Ip is not None else math.nan,
                "n_points": len(fit.points) if fit else 0,
            }
        )
    return rows


def _comparison_rows(
    points: list[PointResult], Ip_by_alpha: dict[float, float | None], F_ref: float
) -> tuple[list[dict], list[dict]]:
    """Model curves normalized at F_ref and simulation/model ratios, per alpha"""
    curve_rows, ratio_rows = [], []
    for alpha in sorted({p.alpha for p in points}):
        Ip = Ip_by_alpha.get(alpha)
        usable = [
            (p.F0, p.fit.gamma)
            for p in points
            if p.alpha == alpha and p.ok and p.fit is not None and p.fit.measurable and p.fit.gamma > 0
        ]
        by_field = dict(usable)
        if Ip is None or F_ref not in by_field:
            logger.warning(f"alpha={alpha:g}: no successful rate at F_ref={F_ref:g}; model comparison skipped")
            continue
        model = TunnelingModel(alpha, Ip)
        curve = dict(normalized_rate_curve(model, F_ref, by_field[F_ref], sorted(by_field)))
        for F0, gamma in sorted(by_field.items()):
            curve_rows.append(
                {
                    "alpha": alpha,
                    "F0": F0,
                    "inv_F0": 1.0 / F0,
                    "minus_ln_gamma": -math.log(gamma),
                    "minus_ln_gamma_model": -math.log(curve[F0]),
                }
            )
        for F0, ratio in ratio_to_model(usable, model, F_ref):
            ratio_rows.append({"alpha": alpha, "F0": F0, "gamma": by_field[F0], "gamma_model": curve[F0], "ratio": ratio})
    return curve_rows, ratio_rows


def _calibration_rows(preparations: list[AlphaPreparation]) -> list[dict]:
    return [
        {
            "alpha": p.alpha,
            "Z": p.Z,
            "a_star": p.a if p.ok else math.nan,
            "achieved_Ip": p.Ip if p.Ip is not None else math.nan,
            "iterations": p.calibration_iterations,
            "a_lo": p.bracket[0] if p.bracket else math.nan,
            "a_hi": p.bracket[1] if p.bracket else math.nan,
            "status": p.status,
            "message": p.message,
        }
        for p in sorted(preparations, key=lambda p: p.alpha)
    ]


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def run_ground_state(cfg: RunConfig) -> list[AlphaPreparation]:
    """Field-free ground state per alpha at fixed (Z, a): checkpoints, JSON summaries, tables"""
    ledger = _Ledger(cfg, "ground_state")
    h = ledger.config_hash
    preparations = _prepare_all(cfg, calibrate=False)
    grid = JobSettings.from_config(cfg).grid()
    rows, density_rows = [], []
    for prep in preparations:
        if not prep.ok:
            continue
        Ip = prep.Ip
        F_bsi_1d = soft_core_suppression_field(Ip, SoftCoreSpec(Z=prep.Z, a=prep.a)) if Ip > 0 else math.nan
        summary = {
            "alpha": prep.alpha,
            "Z": prep.Z,
            "a": prep.a,
            "E0": prep.E0,
            "Ip": Ip,
            "iterations": prep.iterations,
            "converged": True,
            "half_width": prep.half_width,
            "F_bsi": barrier_suppression_field(Ip, prep.Z) if Ip > 0 else math.nan,
            "F_bsi_1d": F_bsi_1d,
            "config_hash": h,
        }
        rows.append({k: summary[k] for k in ("alpha", "Z", "a", "E0", "Ip", "iterations", "half_width", "F_bsi", "F_bsi_1d")})
        stem = f"ground_state_alpha{_tag(prep.alpha)}"
        ledger.add_file(write_json(ledger.out_dir / f"{stem}.json", summary))
        ledger.add_file(
            save_checkpoint(
                ledger.out_dir / f"{stem}.ftwf", WaveFunction(grid, prep.psi0), prep.alpha, 0.0, StepMode.IMAGINARY_TIME
            )
        )
        density = np.abs(prep.psi0) ** 2
        density_rows += [{"alpha": prep.alpha, "x": x, "density": d} for x, d in zip(grid.x_nodes, density)]
        logger.info(f"alpha={prep.alpha:g}: E0={prep.E0:.8f}, Ip={Ip:.8f}")

    ledger.add_file(write_table(ledger.out_dir / "ground_states.csv", "ground_states", rows, h))
    ledger.add_file(write_table(ledger.out_dir / "densities.csv", "densities", density_rows, h))
    failures = sum(1 for p in preparations if not p.ok)
    ledger.finish(failures, len(preparations))
    return preparations


def run_calibration(cfg: RunConfig) -> list[AlphaPreparation]:
    """Protocol B calibration table: a_star(alpha) reaching Ip_target"""
    ledger = _Ledger(cfg, "calibrate")
    preparations = _prepare_all(cfg, calibrate=True, ledger=ledger)
    ledger.add_file(
        write_table(ledger.out_dir / "calibration.csv", "calibration", _calibration_rows(preparations), ledger.config_hash)
    )
    failures = sum(1 for p in preparations if not p.ok)
    ledger.finish(failures, len(preparations))
    return preparations


def _run_sweep(cfg: RunConfig, protocol: str, prefix: str, command: str) -> SweepResult:
    ledger = _Ledger(cfg, command)
    h = ledger.config_hash
    F0_list = cfg.field.F0_list
    shared_warnings = {}
    if protocol == "B":
        shared_warnings = check_sweep_fields(
            F0_list, cfg.system.Ip_target, cfg.system.Z, cfg.field.allow_over_barrier, cfg.x_cap, "Protocol B"
        )

    preparations = _prepare_all(cfg, calibrate=protocol == "B", ledger=ledger)
    points: list[PointResult] = []
    jobs = []
    over_barrier: dict[tuple[float, float], str] = {}
    for prep in preparations:
        if not prep.ok:
            points += _failed_points(prep, F0_list, f"ground state failed: {prep.message}")
            continue
        warnings = shared_warnings
        if protocol == "A":
            try:
                warnings = check_sweep_fields(
                    F0_list, prep.Ip, prep.Z, cfg.field.allow_over_barrier, cfg.x_cap, f"Protocol A alpha={prep.alpha:g}"
                )
            except ConfigurationError as e:
                logger.error(str(e))
                points += _failed_points(prep, F0_list, str(e))
                continue
        over_barrier.update({(prep.alpha, F0): message for F0, message in warnings.items()})
        jobs += [(job,) for job in _point_jobs(cfg, prep, protocol, F0_list)]

    points += _run_jobs(simulate_point, jobs, cfg.workers)
    _flag_over_barrier(points, over_barrier)
    points.sort(key=lambda p: (p.alpha, p.F0))
    for point in points:
        ledger.point(point)

    alphas = sorted(cfg.system.alphas)
    Ip_by_alpha = {p.alpha: (_model_Ip(cfg, p, protocol) if p.ok else None) for p in preparations}
    slopes = _fit_slopes(points, alphas)
    predictions = {alpha: fadk_coefficient(alpha, Ip) for alpha, Ip in Ip_by_alpha.items() if Ip}
    curve_rows, ratio_rows = _comparison_rows(points, Ip_by_alpha, cfg.field.F_ref)

    out = ledger.out_dir
    ledger.add_file(write_table(out / f"{prefix}_rates.csv", "rates", [_rate_row(p) for p in points], h))
    ledger.add_file(write_table(out / f"{prefix}_slopes.csv", "slopes", _slope_rows(slopes, Ip_by_alpha), h))
    ledger.add_file(write_table(out / f"{prefix}_model_curves.csv", "model_curves", curve_rows, h))
    ledger.add_file(write_table(out / f"{prefix}_ratios.csv", "ratios", ratio_rows, h))
    if protocol == "B":
        ledger.add_file(write_table(out / f"{prefix}_calibration.csv", "calibration", _calibration_rows(preparations), h))
    for point in points:
        if point.times is not None:
            path = out / "traces" / f"{prefix}_alpha{_tag(point.alpha)}_F{_tag(point.F0)}.csv"
            ledger.add_file(write_table(path, "trace", _trace_rows(point), h))

    result = SweepResult(
        config_hash=h,
        protocol=protocol,
        preparations=preparations,
        points=points,
        slopes=slopes,
        predictions=predictions,
        files=list(ledger.files),
    )
    ledger.finish(result.failures, len(points) + len(preparations))
    logger.info(f"{command}: {len(points) - sum(1 for p in points if not p.ok)}/{len(points)} field points succeeded")
    return result


def run_protocol_sweep(cfg: RunConfig) -> SweepResult:
    """Protocol A (fixed Z, a) or B (a calibrated to Ip_target) sweep over alphas and fields"""
    return _run_sweep(cfg, cfg.protocol, f"sweep_{cfg.protocol}", f"sweep_{cfg.protocol}")


def benchmark_config(cfg: RunConfig) -> RunConfig:
    """The sweep config restricted to the standard case alpha = 2 with fixed (Z, a)"""
    return cfg.model_copy(update={"system": cfg.system.model_copy(update={"alphas": [2.0]}), "protocol": "A"})


def run_benchmark(cfg: RunConfig) -> SweepResult:
    """alpha = 2 sweep compared against conventional ADK, normalized at F_ref"""
    bench = benchmark_config(cfg)
    if bench.system.a is None:
        raise ConfigurationError("The benchmark runs at fixed (Z, a); system.a must be set")
    return _run_sweep(bench, "A", "benchmark", "benchmark")


def run_propagation(cfg: RunConfig, alpha: float | None = None, F0: float | None = None) -> PointResult:
    """Single (alpha, F0) point: trace CSV, rate JSON and final checkpoint"""
    alpha = alpha if alpha is not None else cfg.system.alphas[0]
    F0 = F0 if F0 is not None else cfg.field.F0_list[0]
    cfg = cfg.model_copy(
        update={
            "system": cfg.system.model_copy(update={"alphas": [alpha]}),
            "field": cfg.field.model_copy(update={"F0_list": [F0]}),
        }
    )
    ledger = _Ledger(cfg, "propagate")
    h = ledger.config_hash
    calibrate = cfg.protocol == "B"
    warnings = {}
    if calibrate:
        warnings = check_sweep_fields(
            [F0], cfg.system.Ip_target, cfg.system.Z, cfg.field.allow_over_barrier, cfg.x_cap, "propagate"
        )
    prep = _prepare_all(cfg, calibrate=calibrate, ledger=ledger)[0]
    stem = f"point_alpha{_tag(alpha)}_F{_tag(F0)}"
    if not prep.ok:
        point = _failed_points(prep, [F0], f"ground state failed: {prep.message}")[0]
    else:
        try:
            if not calibrate:
                warnings = check_sweep_fields([F0], prep.Ip, prep.Z, cfg.field.allow_over_barrier, cfg.x_cap, "propagate")
            job = _point_jobs(cfg, prep, cfg.protocol, [F0])[0]
            point = simulate_point(replace(job, checkpoint_path=str(ledger.out_dir / f"{stem}_final.ftwf")))
            _flag_over_barrier([point], {(point.alpha, F): message for F, message in warnings.items()})
        except ConfigurationError as e:
            logger.error(str(e))
            point = _failed_points(prep, [F0], str(e))[0]

    ledger.point(point)
    if point.times is not None:
        ledger.add_file(write_table(ledger.out_dir / f"{stem}_trace.csv", "trace", _trace_rows(point), h))
        checkpoint = ledger.out_dir / f"{stem}_final.ftwf"
        if checkpoint.exists():
            ledger.add_file(checkpoint)
    summary = _rate_row(point)
    summary["config_hash"] = h
    summary["contaminated"] = point.contaminated
    ledger.add_file(write_json(ledger.out_dir / f"{stem}_rate.json", summary))
    ledger.finish(0 if point.ok else 1, 1, point.message or None)
    return point


def run_fadk_curves(cfg: RunConfig, Ip: float | None = None) -> list[dict]:
    """Analytic -ln(Gamma) = C_alpha / F0 lines over the configured field grid"""
    ledger = _Ledger(cfg, "fadk_curves")
    Ip = Ip if Ip is not None else (cfg.system.Ip_target or 0.67)
    rows, summary = [], {"Ip": Ip, "F_ref": cfg.field.F_ref, "config_hash": ledger.config_hash, "alphas": {}}
    for alpha in sorted(cfg.system.alphas):
        C = fadk_coefficient(alpha, Ip)
        rows += [{"alpha": alpha, "Ip": Ip, "inv_F0": 1.0 / F0, "minus_ln_gamma": C / F0} for F0 in sorted(cfg.field.curve_F0_list, reverse=True)]
        action = complex_action(alpha, Ip, cfg.field.F_ref)
        im_quadrature = im_action_quadrature(alpha, Ip, cfg.field.F_ref)
        summary["alphas"][_tag(alpha)] = {
            "C_alpha": C,
            "Re_S_at_F_ref": action.real,
            "Im_S_at_F_ref": action.imag,
            "Im_S_quadrature_at_F_ref": im_quadrature,
            "quadrature_relative_error": abs(2.0 * im_quadrature * cfg.field.F_ref - C) / C,
        }
        logger.info(f"alpha={alpha:g}: C_alpha({Ip:g})={C:.6f}")
    ledger.add_file(write_table(ledger.out_dir / "fadk_curves.csv", "fadk_curves", rows, ledger.config_hash))
    ledger.add_file(write_json(ledger.out_dir / "fadk_curves.json", summary))
    ledger.finish(0, 1)
    return rows


ROBUSTNESS_VARIANTS = ("eta_x2", "m_8", "x_cap_-25%", "x_cap_+25%", "x_c_-25%", "x_c_+25%", "dt_half", "N_double")


def _variant_config(cfg: RunConfig, variant: str) -> RunConfig:
    if variant == "eta_x2":
        return cfg.model_copy(update={"mask": cfg.mask.model_copy(update={"eta": 2.0 * cfg.mask.eta})})
    if variant == "m_8":
        return cfg.model_copy(update={"mask": cfg.mask.model_copy(update={"m": 8.0})})
    if variant.startswith("x_cap_"):
        factor = 0.75 if variant.endswith("-25%") else 1.25
        x_cap = min(factor * cfg.x_cap, 0.99 * cfg.grid.L)
        return cfg.model_copy(update={"mask": cfg.mask.model_copy(update={"x_cap": x_cap})})
    if variant == "dt_half":
        return cfg.model_copy(update={"propagation": cfg.propagation.model_copy(update={"dt": 0.5 * cfg.propagation.dt})})
    if variant == "N_double":
        return cfg.model_copy(update={"grid": cfg.grid.model_copy(update={"N": 2 * cfg.grid.N})})
    return cfg


def run_robustness(cfg: RunConfig) -> list[dict]:
    """
    Relative change of Gamma at (first alpha, F_ref) under absorber, bound-region, time-step
    and grid variations, plus +-10% shifts of the fit window.
    """
    alpha, F0 = sorted(cfg.system.alphas)[0], cfg.field.F_ref
    cfg = cfg.model_copy(
        update={
            "system": cfg.system.model_copy(update={"alphas": [alpha]}),
            "field": cfg.field.model_copy(update={"F0_list": [F0]}),
        }
    )
    ledger = _Ledger(cfg, "robustness")
    calibrate = cfg.protocol == "B"
    prep = _prepare_all(cfg, calibrate=calibrate, ledger=ledger)[0]
    if not prep.ok:
        ledger.finish(1, 1, prep.message)
        raise ConfigurationError(f"Reference ground state failed: {prep.message}")

    reference_job = _point_jobs(cfg, prep, cfg.protocol, [F0])[0]
    # Every variant keeps the reference T_total
    base_x_c = reference_job.x_c
    jobs = [("reference", reference_job)]
    # Variants whose setup failed, recorded without propagating
    failed: dict[str, PointResult] = {}
    for variant in ROBUSTNESS_VARIANTS:
        vcfg = _variant_config(cfg, variant)
        settings = JobSettings.from_config(vcfg)
        x_c = base_x_c
        if variant.startswith("x_c_"):
            x_c = base_x_c * (0.75 if variant.endswith("-25%") else 1.25)
        psi0 = reference_job.psi0
        if variant == "N_double":
            try:
                gs = solve_ground_state(alpha, SoftCoreSpec(Z=prep.Z, a=prep.a), settings.grid(), **settings.solver_kwargs())
            except TunnelingError as e:
                logger.error(f"Robustness variant {variant}: ground state failed: {e}")
                failed[variant] = _failed_points(prep, [F0], f"ground state failed: {e}")[0]
                continue
            psi0 = gs.psi0.amplitudes
        jobs.append((variant, replace(reference_job, settings=settings, x_c=x_c, psi0=psi0)))

    results = _run_jobs(simulate_point, [(job,) for _, job in jobs], cfg.workers)
    simulated = {variant: point for (variant, _), point in zip(jobs, results)}
    reference = simulated["reference"]
    rows = []
    gamma_ref = reference.fit.gamma if reference.ok and reference.fit else math.nan
    for variant in ("reference", *ROBUSTNESS_VARIANTS):
        point = simulated[variant] if variant in simulated else failed[variant]
        gamma = point.fit.gamma if point.ok and point.fit else math.nan
        rows.append(_robustness_row(variant, gamma, gamma_ref, point))
        ledger.point(point)

    if reference.ok and reference.fit is not None:
        trace = DecayTrace(reference.times, reference.Pb, reference.x_c, reference.ramp_end)
        for fraction in (-0.1, 0.1):
            label = f"window_{fraction:+.0%}"
            try:
                shifted = shift_window(trace, reference.fit, fraction, cfg.rates.rate_floor)
                rows.append(_robustness_row(label, shifted.gamma, gamma_ref, None))
            except TunnelingError as e:
                rows.append({**_robustness_row(label, math.nan, gamma_ref, None), "status": STATUS_FAILED, "message": str(e)})

    ledger.add_file(write_table(ledger.out_dir / "robustness.csv", "robustness", rows, ledger.config_hash))
    failures = sum(1 for row in rows if row["status"] not in USABLE_STATUSES)
    ledger.finish(failures, len(rows))
    return rows


def _robustness_row(variant: str, gamma: float, gamma_ref: float, point: PointResult | None) -> dict:
    change = abs(gamma - gamma_ref) / gamma_ref if gamma_ref and not math.isnan(gamma) else math.nan
    status = point.status if point is not None else STATUS_OK
    return {
        "variant": variant,
        "gamma": gamma,
        "gamma_reference": gamma_ref,
        "relative_change": change,
        "status": status,
        "message": point.message if point is not None else "",
    }


def refit_slopes(rate_files: list[Path | str], out_dir: Path | str) -> tuple[dict[float, SlopeFit | None], Path]:
    """Slope fits from saved rate tables; tables from different configs are rejected"""
    frame, h = read_tables_same_config(rate_files, "rates")
    frame = frame.sort_values(["alpha", "F0"]).drop_duplicates(subset=["alpha", "F0"], keep="last")
    slopes, Ip_by_alpha = {}, {}
    for alpha, group in frame.groupby("alpha", sort=True):
        alpha = float(alpha)
        ok = group[group["status"].isin(USABLE_STATUSES) & group["measurable"].astype(bool) & (group["gamma"] > 0)]
        skipped = sorted(set(group["F0"]) - set(ok["F0"]))
        if skipped:
            logger.warning(f"Slope refit alpha={alpha:g}: skipping fields {skipped}")
        Ip = group["Ip"].dropna()
        Ip_by_alpha[alpha] = float(Ip.median()) if not Ip.empty else None
        try:
            slopes[alpha] = fit_slope(list(zip(ok["F0"].astype(float), ok["gamma"].astype(float))), alpha=alpha)
        except RateError as e:
            logger.warning(f"Slope refit alpha={alpha:g} skipped: {e}")
            slopes[alpha] = None
    path = write_table(Path(out_dir) / "slopes_refit.csv", "slopes", _slope_rows(slopes, Ip_by_alpha), h)
    return slopes, path
