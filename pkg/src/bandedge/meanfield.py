"""Mean-field (factorized) evolution of the collective inversion and polarization.

The per-atom equations are

    dj12/dtau = j3 Omega,    dj3/dtau = -4 Re(j12* Omega),
    Omega(tau) = int_0^tau G(tau - t) j12(t) dt,

a nonlinear Volterra system with a weakly singular kernel. All stepping
is delegated to `volterra.integrate_collective`; this module handles
initial states, random Stark-shift dephasing, phase analysis and the
transparent-state search.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from src.core.errors import DomainError, SearchError, StepSizeError
from src.core.parallel import run_tasks, spawn_streams
from .lowexc import steady_value
from .models import (
    BandEdgeModel,
    CollectiveState,
    DephasingSpec,
    Grid,
    InitialStateSpec,
    IsotropicEffMass,
    TimeSeries,
    check_detuning,
)
from .volterra import KernelWeights, integrate_collective, product_weights

logger = logging.getLogger(__name__)

PHASE_THRESHOLD = 1e-12
CONVERGENCE_TOLERANCE = 1e-3
TRANSPARENT_J3_TOLERANCE = 2e-2

InitialState = Union[InitialStateSpec, CollectiveState]


def _initial(init: InitialState) -> CollectiveState:
    return init.state() if isinstance(init, InitialStateSpec) else init


def stark_shifts(dephasing: DephasingSpec, n_runs: int, n_steps: int) -> np.ndarray:
    """Gaussian detuning offsets, one row per run, redrawn every step; row k uses child stream k."""
    rows = np.empty((n_runs, n_steps))
    for k, stream in enumerate(spawn_streams(dephasing.seed, n_runs)):
        rows[k] = np.random.default_rng(stream).normal(0.0, dephasing.sigma, size=n_steps)
    return rows


def evolve_batch(
    model: BandEdgeModel,
    delta_c: float,
    j3_0: np.ndarray,
    p_0: np.ndarray,
    grid: Grid,
    *,
    shifts: Optional[np.ndarray] = None,
    drive: Optional[np.ndarray] = None,
    weights: Optional[KernelWeights] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Evolve many initial states on one grid; arrays are (batch, n_steps + 1)."""
    delta_c = check_detuning(delta_c)
    if weights is None:
        weights = product_weights(model, grid.n_steps, grid.dtau)
    return integrate_collective(weights, delta_c, j3_0, p_0, stark_shifts=shifts, drive=drive)


def evolve_meanfield(
    model: BandEdgeModel,
    delta_c: float,
    init: InitialState,
    grid: Grid,
    dephasing: Optional[DephasingSpec] = None,
) -> TimeSeries:
    """Single mean-field trajectory. With dephasing, the Stark shift is redrawn every dtau."""
    state = _initial(init)
    shifts = None
    if dephasing is not None and dephasing.sigma > 0.0:
        shifts = stark_shifts(dephasing, 1, grid.n_steps)
    j3, p = evolve_batch(model, delta_c, np.array([state.j3]), np.array([state.j12]), grid, shifts=shifts)
    metadata = {
        "model": model.kind,
        "delta_c": float(delta_c),
        "dtau": grid.dtau,
        "tau_max": grid.tau_max,
        "sigma": dephasing.sigma if dephasing is not None else 0.0,
    }
    return TimeSeries(tau=grid.tau, j3=j3[0], j12=p[0], metadata=metadata)


def phase_angle(series: TimeSeries, threshold: float = PHASE_THRESHOLD) -> np.ndarray:
    """Continuously unwrapped arg(j12); NaN where the polarization is below `threshold`."""
    theta = np.full(len(series.tau), np.nan)
    defined = np.abs(series.j12) > threshold
    if np.any(defined):
        theta[defined] = np.unwrap(np.angle(series.j12[defined]))
    return theta


def phase_velocity(series: TimeSeries, window: float) -> float:
    """Least-squares slope of the phase angle over the trailing window."""
    theta = phase_angle(series)
    tail = (series.tau >= series.tau[-1] - window) & np.isfinite(theta)
    if tail.sum() < 2:
        raise SearchError("Polarization vanished; phase velocity undefined over the trailing window")
    slope, _ = np.polyfit(series.tau[tail], theta[tail], 1)
    return float(slope)


@dataclass
class TransparentResult:
    delta_c: float
    steady_j3: float
    phase_velocity: float
    evaluations: int


def find_transparent_detuning(
    model: BandEdgeModel,
    r: float,
    search_interval: Tuple[float, float] = (-1.0, -0.3),
    tau_max: float = 80.0,
    dtau: float = 0.01,
    window: float = 20.0,
    xtol: float = 1e-4,
) -> TransparentResult:
    """Detuning at which the steady polarization stops rotating (Brent search)."""
    if not isinstance(model, IsotropicEffMass):
        raise DomainError("The transparent-state search is defined for the isotropic band edge")
    lo, hi = sorted(search_interval)
    init = InitialStateSpec(r=r)
    grid = Grid(tau_max=tau_max, dtau=dtau)
    evaluations = 0

    def velocity(delta_c: float) -> float:
        nonlocal evaluations
        evaluations += 1
        value = phase_velocity(evolve_meanfield(model, delta_c, init, grid), window)
        logger.info(f"transparent search: delta_c={delta_c:+.5f} -> dtheta/dtau={value:+.6f}")
        return value

    f_lo, f_hi = velocity(lo), velocity(hi)
    if f_lo * f_hi > 0.0:
        raise SearchError(
            f"Steady phase velocity does not change sign on [{lo}, {hi}] "
            f"(values {f_lo:+.4e}, {f_hi:+.4e}); widen the search interval"
        )
    root = brentq(velocity, lo, hi, xtol=xtol)
    series = evolve_meanfield(model, root, init, grid)
    j3_final, _ = steady_value(series.tau, series.j3)
    if abs(j3_final) > TRANSPARENT_J3_TOLERANCE:
        logger.warning(f"Steady inversion {j3_final:+.4f} at delta_c*={root:+.5f} exceeds {TRANSPARENT_J3_TOLERANCE}")
    return TransparentResult(
        delta_c=float(root),
        steady_j3=j3_final,
        phase_velocity=phase_velocity(series, window),
        evaluations=evaluations,
    )


def dephased_ensemble_mean(
    model: BandEdgeModel,
    delta_c: float,
    init: InitialState,
    grid: Grid,
    dephasing: DephasingSpec,
    n_runs: int,
) -> TimeSeries:
    """Average over independent Stark-shift histories, all stepped as one batch.

    Run k draws from child stream k of the dephasing seed, so run 0 is the
    trajectory `evolve_meanfield` produces with the same spec.
    """
    if n_runs < 1:
        raise DomainError(f"n_runs must be at least 1, got {n_runs}")
    state = _initial(init)
    shifts = stark_shifts(dephasing, n_runs, grid.n_steps) if dephasing.sigma > 0.0 else None
    j3, p = evolve_batch(
        model,
        delta_c,
        np.full(n_runs, state.j3),
        np.full(n_runs, state.j12, dtype=complex),
        grid,
        shifts=shifts,
    )
    metadata = {
        "model": model.kind,
        "delta_c": float(delta_c),
        "dtau": grid.dtau,
        "sigma": dephasing.sigma,
        "n_runs": n_runs,
        "mean_polarization_modulus": np.abs(p).mean(axis=0),
    }
    return TimeSeries(tau=grid.tau, j3=j3.mean(axis=0), j12=p.mean(axis=0), metadata=metadata)


def free_space_reference(init: InitialState, grid: Grid, gamma: float = 1.0) -> TimeSeries:
    """Analytic Markovian superradiance: j3 = -tanh(gamma (tau - tau_d)/2)."""
    state = _initial(init)
    radius = math.sqrt(state.j3 ** 2 + 4.0 * abs(state.j12) ** 2)
    if abs(state.j12) == 0.0:
        raise DomainError("Zero polarization never leaves the inverted state in mean field")
    tau_d = (2.0 / (gamma * radius)) * math.atanh(state.j3 / radius)
    arg = 0.5 * gamma * radius * (grid.tau - tau_d)
    phase = state.j12 / abs(state.j12)
    j3 = -radius * np.tanh(arg)
    j12 = 0.5 * radius * phase / np.cosh(arg)
    return TimeSeries(tau=grid.tau, j3=j3, j12=j12, metadata={"model": "free_space", "delay": tau_d})


def emission_rate(series: TimeSeries) -> np.ndarray:
    """Radiated intensity per atom, -(1/2) dj3/dtau."""
    return -0.5 * np.gradient(series.j3, series.tau)


def convergence_check(
    model: BandEdgeModel,
    delta_c: float,
    init: InitialState,
    grid: Grid,
    tolerance: float = CONVERGENCE_TOLERANCE,
) -> float:
    """Compare final inversions at dtau and dtau/2; raise StepSizeError if they differ by more than tolerance."""
    coarse = evolve_meanfield(model, delta_c, init, grid)
    fine = evolve_meanfield(model, delta_c, init, grid.halved())
    change = abs(float(coarse.j3[-1] - fine.j3[-1]))
    logger.info(f"convergence check: |j3(dtau) - j3(dtau/2)| = {change:.3e} at tau={grid.tau_max}")
    if change > tolerance:
        raise StepSizeError(
            f"Halving dtau={grid.dtau} changes final j3 by {change:.3e} (> {tolerance}); reduce dtau"
        )
    return change


def detuning_scan(
    model: BandEdgeModel,
    deltas: Sequence[float],
    init: InitialState,
    grid: Grid,
    workers: int = 1,
    dephasing: Optional[DephasingSpec] = None,
) -> List[TimeSeries]:
    """evolve_meanfield for several detunings, one task per detuning."""
    worker = partial(_scan_task, model, init, grid, dephasing)
    return run_tasks(worker, [float(d) for d in deltas], workers)


def _scan_task(model, init, grid, dephasing, delta_c):
    return evolve_meanfield(model, delta_c, init, grid, dephasing)
