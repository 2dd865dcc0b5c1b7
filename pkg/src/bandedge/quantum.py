"""Superradiance triggered by vacuum fluctuations.

Starting from the fully inverted state, the polarization first grows
linearly with amplitude D(tau), the inverse Laplace transform of
1/(s - G(s)). Once |D|^2 reaches e the dynamics are handed to mean field,
with an initial polarization drawn from the Gaussian statistics that the
linear stage produces. An ensemble over those draws gives mean inversion,
the ensemble polarization, delay-time histograms and polarization
snapshots.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from src.core.config import get_settings
from src.core.errors import DomainError, SearchError
from src.core.parallel import chunk_ranges, run_tasks, seed_record, spawn_streams
from .lowexc import amplitude_B, solve_roots
from .meanfield import evolve_batch
from .models import (
    AnisotropicEffMass,
    BandEdgeModel,
    FreeSpace,
    Grid,
    IsotropicEffMass,
    TimeSeries,
    check_detuning,
)
from .volterra import product_weights, solve_linear

logger = logging.getLogger(__name__)

CROSSOVER_LEVEL = math.e
T0_POLICIES = ("at_zero", "at_crossover")
AMPLITUDE_LAWS = ("rayleigh", "half_gaussian")
_LINEAR_DTAU = 1e-3


def amplitude_D(model: BandEdgeModel, delta_c: float, tau):
    """Linear growth amplitude of the inverted system, D(0) = 1."""
    delta_c = check_detuning(delta_c)
    scalar = np.ndim(tau) == 0
    t = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t < 0.0):
        raise DomainError("tau must be finite and non-negative")

    if isinstance(model, FreeSpace):
        out = np.exp(0.5 * model.gamma * t).astype(complex)
    elif isinstance(model, IsotropicEffMass):
        out = np.asarray(amplitude_B(solve_roots(delta_c, gain=True), t))
    elif isinstance(model, AnisotropicEffMass):
        t_max = float(np.max(t)) if t.size else 0.0
        grid = Grid(tau_max=max(t_max, _LINEAR_DTAU), dtau=_LINEAR_DTAU)
        values = solve_linear(product_weights(model, grid.n_steps, grid.dtau), delta_c, 1.0)
        out = np.interp(t, grid.tau, values.real) + 1j * np.interp(t, grid.tau, values.imag)
    else:
        raise DomainError(f"amplitude_D is not available for the {model.kind} model")
    return complex(out) if scalar else out


def crossover_time(model: BandEdgeModel, delta_c: float, tau_budget: float = 10.0) -> float:
    """Smallest tau with |D(tau)|^2 = e."""
    samples = np.linspace(0.0, tau_budget, 2001)
    excess = np.abs(amplitude_D(model, delta_c, samples)) ** 2 - CROSSOVER_LEVEL
    above = np.nonzero(excess >= 0.0)[0]
    if len(above) == 0:
        raise SearchError(
            f"|D|^2 stays below e up to tau={tau_budget} for {model.kind}, delta_c={delta_c}"
        )
    i = int(above[0])
    if i == 0:
        return 0.0
    if isinstance(model, AnisotropicEffMass):
        # D is tabulated on a fine grid; interpolate instead of re-solving per bracket step
        a, b = excess[i - 1], excess[i]
        return float(samples[i - 1] + (samples[i] - samples[i - 1]) * a / (a - b))
    return float(
        brentq(
            lambda t: abs(amplitude_D(model, delta_c, t)) ** 2 - CROSSOVER_LEVEL,
            samples[i - 1],
            samples[i],
            xtol=1e-12,
        )
    )


@dataclass
class PolarizationSample:
    """Polarization amplitudes kappa (units of J12) and phases phi in [0, 2 pi)."""

    kappa: np.ndarray
    phi: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.kappa < 0.0):
            raise DomainError("kappa must be non-negative")

    def polarization(self, n_atoms: int) -> np.ndarray:
        return self.kappa * np.exp(1j * self.phi) / n_atoms


def sample_initial_polarization(
    n_atoms: int,
    d_t0_sq: float,
    rng: np.random.Generator,
    size: int = 1,
    amplitude_law: str = "rayleigh",
) -> PolarizationSample:
    """Draw (kappa, phi) for the hand-off to mean field.

    rayleigh: kappa^2 exponential with mean N|D(t0)|^2, so <kappa^{2p}> = p! (N|D|^2)^p.
    half_gaussian: P(kappa) proportional to exp(-kappa^2 / (N|D|^2)) on kappa >= 0.
    Draws with 4|kappa/N|^2 >= 1 are redrawn.
    """
    if n_atoms < 2:
        raise DomainError(f"n_atoms must be at least 2, got {n_atoms}")
    if not (math.isfinite(d_t0_sq) and d_t0_sq > 0.0):
        raise DomainError(f"|D(t0)|^2 must be positive, got {d_t0_sq}")
    if amplitude_law not in AMPLITUDE_LAWS:
        raise DomainError(f"amplitude_law must be one of {AMPLITUDE_LAWS}, got {amplitude_law!r}")
    variance = n_atoms * d_t0_sq

    def draw(count: int) -> np.ndarray:
        if amplitude_law == "rayleigh":
            return np.sqrt(rng.exponential(variance, size=count))
        return np.abs(rng.normal(0.0, math.sqrt(0.5 * variance), size=count))

    kappa = draw(size)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=size)
    limit = 0.5 * n_atoms
    bad = kappa >= limit
    redrawn = int(bad.sum())
    while np.any(bad):
        kappa[bad] = draw(int(bad.sum()))
        bad = kappa >= limit
    if redrawn:
        logger.warning(f"Redrew {redrawn} polarization samples with |j12| >= 1/2 (N={n_atoms})")
    return PolarizationSample(kappa=kappa, phi=phi)


@dataclass(frozen=True)
class EnsembleSpec:
    model: BandEdgeModel
    delta_c: float
    n_atoms: int
    n_realizations: int
    grid: Grid
    t0_policy: str = "at_crossover"
    master_seed: int = 0
    amplitude_law: str = "rayleigh"
    snapshot_times: Tuple[float, ...] = ()
    n_bins: int = 50
    chunk_size: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_atoms < 2:
            raise DomainError(f"n_atoms must be at least 2, got {self.n_atoms}")
        if self.n_realizations < 1:
            raise DomainError(f"n_realizations must be positive, got {self.n_realizations}")
        if self.t0_policy not in T0_POLICIES:
            raise DomainError(f"t0_policy must be one of {T0_POLICIES}, got {self.t0_policy!r}")
        if self.amplitude_law not in AMPLITUDE_LAWS:
            raise DomainError(f"amplitude_law must be one of {AMPLITUDE_LAWS}, got {self.amplitude_law!r}")
        if self.n_bins < 1:
            raise DomainError("n_bins must be positive")
        check_detuning(self.delta_c)


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    overflow: int

    @property
    def mass(self) -> int:
        return int(self.counts.sum()) + self.overflow


@dataclass
class EnsembleStats:
    mean_inversion: TimeSeries
    mean_polarization_modulus: TimeSeries
    delay_histogram: Histogram
    polarization_snapshots: List[Tuple[float, PolarizationSample]]
    delay_times: np.ndarray
    t0: float
    d_t0_sq: float
    metadata: Dict[str, Any] = field(default_factory=dict)


def delay_times(tau: np.ndarray, j3: np.ndarray) -> np.ndarray:
    """First zero crossing of j3 per row, linearly interpolated; NaN if j3 never reaches 0."""
    j3 = np.atleast_2d(j3)
    out = np.full(j3.shape[0], np.nan)
    crossed = j3 <= 0.0
    has = crossed.any(axis=1)
    first = np.argmax(crossed, axis=1)
    for row in np.nonzero(has)[0]:
        i = first[row]
        if i == 0:
            out[row] = tau[0]
            continue
        a, b = j3[row, i - 1], j3[row, i]
        out[row] = tau[i - 1] + (tau[i] - tau[i - 1]) * a / (a - b)
    return out


def delay_histogram(delays: np.ndarray, tau_max: float, n_bins: int) -> Histogram:
    finite = delays[np.isfinite(delays)]
    counts, edges = np.histogram(finite, bins=n_bins, range=(0.0, tau_max))
    return Histogram(edges=edges, counts=counts, overflow=int(len(delays) - len(finite)))


def circular_resultant(phi: np.ndarray) -> float:
    """Mean resultant length |<exp(i phi)>|; about 1/sqrt(n) for uniform phases."""
    return float(np.abs(np.mean(np.exp(1j * np.asarray(phi)))))


def _handoff(spec: EnsembleSpec) -> Tuple[int, float]:
    """Grid index of the hand-off time and |D|^2 there."""
    if spec.t0_policy == "at_zero":
        return 0, 1.0
    t0 = crossover_time(spec.model, spec.delta_c)
    index = int(round(t0 / spec.grid.dtau))
    if index >= spec.grid.n_steps:
        raise DomainError(f"Crossover time {t0:.4f} lies beyond tau_max={spec.grid.tau_max}")
    d_sq = abs(amplitude_D(spec.model, spec.delta_c, index * spec.grid.dtau)) ** 2
    return index, float(d_sq)


def _ensemble_chunk(spec: EnsembleSpec, index0: int, d_t0_sq: float, task) -> Dict[str, Any]:
    start, streams = task
    n = len(streams)
    samples = [
        sample_initial_polarization(spec.n_atoms, d_t0_sq, np.random.default_rng(s), 1, spec.amplitude_law)
        for s in streams
    ]
    kappa = np.concatenate([s.kappa for s in samples])
    phi = np.concatenate([s.phi for s in samples])
    p0 = kappa * np.exp(1j * phi) / spec.n_atoms
    j3_0 = np.sqrt(1.0 - 4.0 * np.abs(p0) ** 2)

    n_steps = spec.grid.n_steps
    sub_grid = Grid(tau_max=(n_steps - index0) * spec.grid.dtau, dtau=spec.grid.dtau)
    j3_tail, p_tail = evolve_batch(spec.model, spec.delta_c, j3_0, p0, sub_grid)

    j3 = np.ones((n, n_steps + 1))
    p = np.zeros((n, n_steps + 1), dtype=complex)
    j3[:, index0:] = j3_tail
    p[:, index0:] = p_tail

    snapshots = []
    for t in spec.snapshot_times:
        i = min(int(round(t / spec.grid.dtau)), n_steps)
        snapshots.append(p[:, i])
    return {
        "start": start,
        "sum_j3": j3.sum(axis=0),
        "sum_p": p.sum(axis=0),
        "sum_abs_p": np.abs(p).sum(axis=0),
        "delays": delay_times(spec.grid.tau, j3),
        "snapshots": snapshots,
    }


def run_ensemble(spec: EnsembleSpec, workers: Optional[int] = None) -> EnsembleStats:
    """Average mean-field trajectories over sampled initial polarizations.

    Realization k uses child stream k of the master seed; chunks are reduced
    in order, so the result does not depend on `workers`.
    """
    settings = get_settings()
    chunk_size = spec.chunk_size or settings.chunk_size
    workers = settings.workers if workers is None else workers
    started = time.time()

    index0, d_t0_sq = _handoff(spec)
    t0 = index0 * spec.grid.dtau
    logger.info(
        f"Ensemble {spec.model.kind} delta_c={spec.delta_c:+.3f} N={spec.n_atoms}: "
        f"{spec.n_realizations} realizations, t0={t0:.4f} ({spec.t0_policy}), |D(t0)|^2={d_t0_sq:.4f}"
    )
    streams = spawn_streams(spec.master_seed, spec.n_realizations)
    tasks = [(start, streams[start:stop]) for start, stop in chunk_ranges(spec.n_realizations, chunk_size)]
    results = run_tasks(partial(_ensemble_chunk, spec, index0, d_t0_sq), tasks, workers)
    results.sort(key=lambda r: r["start"])

    count = spec.n_realizations
    tau = spec.grid.tau
    sum_j3 = np.zeros(len(tau))
    sum_p = np.zeros(len(tau), dtype=complex)
    sum_abs = np.zeros(len(tau))
    for r in results:
        sum_j3 += r["sum_j3"]
        sum_p += r["sum_p"]
        sum_abs += r["sum_abs_p"]
    delays = np.concatenate([r["delays"] for r in results])

    snapshots = []
    for k, t in enumerate(spec.snapshot_times):
        p_snap = np.concatenate([r["snapshots"][k] for r in results])
        snapshots.append(
            (float(t), PolarizationSample(kappa=spec.n_atoms * np.abs(p_snap), phi=np.mod(np.angle(p_snap), 2.0 * math.pi)))
        )

    mean_p = sum_p / count
    meta = {
        "model": spec.model.kind,
        "delta_c": spec.delta_c,
        "n_atoms": spec.n_atoms,
        "t0_policy": spec.t0_policy,
        "dtau": spec.grid.dtau,
    }
    histogram = delay_histogram(delays, spec.grid.tau_max, spec.n_bins)
    logger.info(
        f"Ensemble done in {time.time() - started:.1f}s: {histogram.overflow} realizations never crossed j3=0"
    )
    return EnsembleStats(
        mean_inversion=TimeSeries(tau=tau, j3=sum_j3 / count, j12=mean_p, metadata=dict(meta)),
        mean_polarization_modulus=TimeSeries(
            tau=tau, j3=sum_j3 / count, j12=np.abs(mean_p).astype(complex),
            metadata={**meta, "mean_of_modulus": sum_abs / count},
        ),
        delay_histogram=histogram,
        polarization_snapshots=snapshots,
        delay_times=delays,
        t0=t0,
        d_t0_sq=d_t0_sq,
        metadata={**meta, "seeds": seed_record(spec.master_seed, count, chunk_size)},
    )


def ensemble_scan(base: EnsembleSpec, deltas: Sequence[float], workers: Optional[int] = None) -> List[EnsembleStats]:
    """run_ensemble at several detunings with otherwise identical settings."""
    out = []
    for delta_c in deltas:
        spec = replace(base, delta_c=float(delta_c))
        out.append(run_ensemble(spec, workers))
    return out
