"""Classical colored noise with the band-edge vacuum autocorrelation, and
stochastic superradiance driven by it.

Noise paths are random-phase cosine sums

    xi(tau) = sum_n 2 sqrt(power_n) cos(omega_n tau + Phi_n),

whose ensemble autocorrelation is 2 sum_n power_n cos(omega_n lag). With
power_n the spectral density S integrated over a frequency cell and
S(omega) = 1/sqrt(2 pi omega), the autocorrelation approaches lag^{-1/2}.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from functools import partial
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import kv

from src.core.config import get_settings
from src.core.errors import DomainError
from src.core.parallel import chunk_ranges, run_tasks, seed_record, spawn_streams
from .meanfield import evolve_batch
from .models import BandEdgeModel, CollectiveState, Grid, TimeSeries, check_detuning
from .quantum import delay_times
from .volterra import product_weights

logger = logging.getLogger(__name__)

MIN_ATOMS = 500
DEFAULT_OMEGA_MAX = 2.0 * math.pi * 100.0
WEIGHTINGS = ("cell", "point")
_NOISE_PHASE = complex(math.cos(math.pi / 8.0), -math.sin(math.pi / 8.0))
_SYNTH_BLOCK = 4096


@dataclass(frozen=True)
class NoiseSpec:
    """Cosine-sum generator settings.

    alpha = 1 reproduces lag^{-1/2}; alpha = 3 reproduces the regularized
    (lag^2 + a^2)^{-3/4} and is experimental.
    """

    alpha: int = 1
    n_terms: int = 1000
    omega_max: float = DEFAULT_OMEGA_MAX
    seed: int = 0
    weighting: str = "cell"
    regularization: float = 0.05

    def __post_init__(self) -> None:
        if self.alpha not in (1, 3):
            raise DomainError(f"alpha must be 1 or 3, got {self.alpha}")
        if self.n_terms < 1:
            raise DomainError(f"n_terms must be at least 1, got {self.n_terms}")
        if not (math.isfinite(self.omega_max) and self.omega_max > 0.0):
            raise DomainError(f"omega_max must be positive, got {self.omega_max}")
        if self.weighting not in WEIGHTINGS:
            raise DomainError(f"weighting must be one of {WEIGHTINGS}, got {self.weighting!r}")
        if not (self.regularization > 0.0):
            raise DomainError("regularization must be positive")
        if self.alpha == 3:
            logger.warning("alpha=3 noise uses a regularized short-lag form and is experimental")

    @property
    def d_omega(self) -> float:
        return self.omega_max / self.n_terms


@dataclass
class NoisePath:
    tau: np.ndarray
    xi: np.ndarray

    def __post_init__(self) -> None:
        if len(self.tau) != len(self.xi):
            raise DomainError("NoisePath tau and xi must have equal length")
        if not np.all(np.isfinite(self.xi)):
            raise DomainError("NoisePath contains non-finite values")


def spectrum(omega, alpha: int = 1, regularization: float = 0.05) -> np.ndarray:
    """One-sided spectral density S with lag correlation 2 int_0^inf S(w) cos(w lag) dw."""
    w = np.asarray(omega, dtype=float)
    if alpha == 1:
        with np.errstate(divide="ignore"):
            return 1.0 / np.sqrt(2.0 * math.pi * w)
    nu = 0.25
    a = regularization
    norm = math.sqrt(math.pi) / gamma_fn(nu + 0.5) / math.pi
    zero = norm * 0.5 * gamma_fn(nu) * a ** (-2.0 * nu)
    safe = np.where(w > 0.0, w, 1.0)
    value = norm * (safe / (2.0 * a)) ** nu * kv(nu, a * safe)
    return np.where(w > 0.0, value, zero)


def spectral_components(spec: NoiseSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Frequencies omega_n and powers (integrated spectral density) of the cosine sum."""
    dw = spec.d_omega
    n = np.arange(1, spec.n_terms + 1, dtype=float)
    if spec.weighting == "point":
        omega = n * dw
        return omega, spectrum(omega, spec.alpha, spec.regularization) * dw

    omega = np.concatenate(([0.0], n * dw))
    if spec.alpha == 1:
        edges = np.concatenate(([0.0], (n - 0.5) * dw, [(spec.n_terms + 0.5) * dw]))
        root = np.sqrt(edges)
        power = 2.0 * np.diff(root) / math.sqrt(2.0 * math.pi)
    else:
        power = spectrum(omega, spec.alpha, spec.regularization) * dw
        power[0] *= 0.5
    return omega, power


def analytic_autocorrelation(spec: NoiseSpec, lags) -> np.ndarray:
    """Ensemble autocorrelation of the cosine sum, 2 sum_n power_n cos(omega_n lag)."""
    omega, power = spectral_components(spec)
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    return 2.0 * np.cos(np.outer(lags, omega)) @ power


def target_autocorrelation(lags, alpha: int = 1, regularization: float = 0.05) -> np.ndarray:
    lags = np.asarray(lags, dtype=float)
    if alpha == 1:
        return np.abs(lags) ** -0.5
    return (lags ** 2 + regularization ** 2) ** -0.75


def generate_noise(spec: NoiseSpec, grid: Grid, rng: Optional[np.random.Generator] = None) -> NoisePath:
    """One noise path on the grid; deterministic for a given seed (or generator)."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    omega, power = spectral_components(spec)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=len(omega))
    amplitude = 2.0 * np.sqrt(power)
    tau = grid.tau
    xi = np.empty(len(tau))
    for start in range(0, len(tau), _SYNTH_BLOCK):
        block = tau[start:start + _SYNTH_BLOCK]
        xi[start:start + len(block)] = np.cos(np.outer(block, omega) + phases) @ amplitude
    return NoisePath(tau=tau, xi=xi)


def autocorrelation(paths: Sequence[NoisePath], lags, base_count: Optional[int] = None) -> np.ndarray:
    """Average of xi(tau) xi(tau + lag) over paths and base times.

    Lags must lie on the common grid; base times are the first `base_count`
    grid points (default: every point whose largest lag stays on the grid).
    """
    if len(paths) < 1:
        raise DomainError("autocorrelation needs at least one path")
    tau = paths[0].tau
    for path in paths[1:]:
        if len(path.tau) != len(tau) or not np.allclose(path.tau, tau):
            raise DomainError("All noise paths must share the same time grid")
    dtau = tau[1] - tau[0]
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    shifts = np.rint(lags / dtau).astype(int)
    if np.any(np.abs(shifts * dtau - lags) > 1e-9 * max(1.0, lags.max())) or np.any(shifts < 0):
        raise DomainError("Autocorrelation lags must be non-negative multiples of the grid step")
    available = len(tau) - shifts.max()
    count = available if base_count is None else base_count
    if count < 1 or count > available:
        raise DomainError(f"base_count must lie in [1, {available}] for the requested lags")

    stack = np.vstack([p.xi for p in paths])
    base = stack[:, :count]
    return np.array([np.mean(base * stack[:, k:k + count]) for k in shifts])


def noise_coupling(n_atoms: int) -> float:
    """Drive amplitude 1/sqrt(N sqrt(pi)) of the noise in the polarization equation."""
    if n_atoms < 1:
        raise DomainError("n_atoms must be positive")
    return 1.0 / math.sqrt(n_atoms * math.sqrt(math.pi))


def _check_atoms(n_atoms: int) -> None:
    if n_atoms <= MIN_ATOMS:
        raise DomainError(
            f"Stochastic simulation needs n_atoms > {MIN_ATOMS} (got {n_atoms}); "
            "the classical noise picture is not quantitative for smaller samples, use the quantum ensemble"
        )


def _drive_rows(xi_rows: np.ndarray, n_atoms: int, amplitude_scale: float) -> np.ndarray:
    # the detuning phase exp(i phi) is applied by the stepper
    return amplitude_scale * noise_coupling(n_atoms) * _NOISE_PHASE * xi_rows


def evolve_stochastic(
    model: BandEdgeModel,
    delta_c: float,
    n_atoms: int,
    grid: Grid,
    spec: NoiseSpec,
    init: Optional[CollectiveState] = None,
    amplitude_scale: float = 1.0,
) -> TimeSeries:
    """Mean-field equations plus the colored-noise drive, from the fully inverted state by default."""
    _check_atoms(n_atoms)
    delta_c = check_detuning(delta_c)
    state = init if init is not None else CollectiveState(j3=1.0, j12=0j)
    path = generate_noise(spec, grid)
    drive = _drive_rows(path.xi[None, :], n_atoms, amplitude_scale)
    j3, p = evolve_batch(model, delta_c, np.array([state.j3]), np.array([state.j12]), grid, drive=drive)
    meta = {"model": model.kind, "delta_c": delta_c, "n_atoms": n_atoms, "noise_seed": spec.seed, "dtau": grid.dtau}
    return TimeSeries(tau=grid.tau, j3=j3[0], j12=p[0], metadata=meta)


@dataclass
class StochasticStats:
    mean_inversion: TimeSeries
    delay_times: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)


def _stochastic_chunk(model, delta_c, n_atoms, grid, spec, weights, task) -> Dict[str, Any]:
    start, streams = task
    xi = np.vstack([generate_noise(spec, grid, np.random.default_rng(s)).xi for s in streams])
    n = len(streams)
    j3, p = evolve_batch(
        model, delta_c, np.ones(n), np.zeros(n, dtype=complex), grid,
        drive=_drive_rows(xi, n_atoms, 1.0), weights=weights,
    )
    return {"start": start, "sum_j3": j3.sum(axis=0), "sum_p": p.sum(axis=0), "delays": delay_times(grid.tau, j3)}


def stochastic_ensemble(
    model: BandEdgeModel,
    delta_c: float,
    n_atoms: int,
    grid: Grid,
    spec: NoiseSpec,
    n_paths: int,
    workers: Optional[int] = None,
    chunk_size: Optional[int] = None,
) -> StochasticStats:
    """Ensemble mean of evolve_stochastic over independent noise paths.

    Path k uses child stream k of spec.seed; chunks are reduced in order.
    """
    _check_atoms(n_atoms)
    if n_paths < 1:
        raise DomainError("n_paths must be positive")
    settings = get_settings()
    chunk_size = chunk_size or settings.chunk_size
    workers = settings.workers if workers is None else workers
    started = time.time()

    weights = product_weights(model, grid.n_steps, grid.dtau)
    streams = spawn_streams(spec.seed, n_paths)
    tasks = [(start, streams[start:stop]) for start, stop in chunk_ranges(n_paths, chunk_size)]
    worker = partial(_stochastic_chunk, model, delta_c, n_atoms, grid, spec, weights)
    results = sorted(run_tasks(worker, tasks, workers), key=lambda r: r["start"])

    sum_j3 = np.sum([r["sum_j3"] for r in results], axis=0)
    sum_p = np.sum([r["sum_p"] for r in results], axis=0)
    delays = np.concatenate([r["delays"] for r in results])
    logger.info(f"Stochastic ensemble N={n_atoms}: {n_paths} paths in {time.time() - started:.1f}s")
    meta = {
        "model": model.kind,
        "delta_c": delta_c,
        "n_atoms": n_atoms,
        "n_paths": n_paths,
        "seeds": seed_record(spec.seed, n_paths, chunk_size),
    }
    return StochasticStats(
        mean_inversion=TimeSeries(tau=grid.tau, j3=sum_j3 / n_paths, j12=sum_p / n_paths, metadata=dict(meta)),
        delay_times=delays,
        metadata=meta,
    )
