"""Band-edge run service: turns a validated scenario into artifacts.

Each command has a `_run_<command>` handler that computes with the domain
modules and writes CSV tables through `src.core.artifacts`. `execute`
wires the handlers to the output directory, the summary and the manifest,
decoupling CLI/API front ends from the numerics.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from src.core.artifacts import RunManifest, split_complex, write_csv, write_json
from src.core.config import get_settings
from src.core.errors import DomainError, SearchError
from src.core.parallel import chunk_ranges, seed_record, spawn_streams
from src.core.scenario import ScenarioConfig
from . import bath_oracle, lowexc, meanfield, noise, quantum
from .kernel import anisotropic_prefactor, asymptotic_anisotropic_kernel, kernel_laplace, memory_kernel
from .models import (
    AnisotropicEffMass,
    BandEdgeModel,
    DephasingSpec,
    FreeSpace,
    Grid,
    InitialStateSpec,
    IsotropicEffMass,
    build_model,
)

logger = logging.getLogger(__name__)


@dataclass
class RunContext:
    scenario: ScenarioConfig
    out_dir: Path
    model: BandEdgeModel
    grid: Grid
    workers: int
    manifest: RunManifest
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def seed(self) -> int:
        return self.scenario.run.seed

    def csv(self, name: str, columns: Dict[str, np.ndarray], title: str, units: Optional[Dict[str, str]] = None) -> Path:
        heading = f"{self.scenario.run.title} | {title}" if self.scenario.run.title else title
        return self.manifest.add(write_csv(self.out_dir / f"{name}.csv", columns, heading, units))


def _tag(delta_c: float) -> str:
    return f"delta{delta_c:+g}"


def build_scenario_model(scenario: ScenarioConfig) -> BandEdgeModel:
    params = scenario.model.model_dump(exclude={"kind"})
    return build_model(scenario.model.kind, **params)


def _grid(scenario: ScenarioConfig) -> Grid:
    dtau = scenario.grid.dtau or get_settings().default_dtau
    return Grid(tau_max=scenario.grid.tau_max, dtau=dtau)


def _init_spec(scenario: ScenarioConfig) -> InitialStateSpec:
    return InitialStateSpec(r=scenario.init.r, phase0=scenario.init.phase0)


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------

def _run_kernel(ctx: RunContext) -> None:
    lags = np.asarray(ctx.scenario.kernel.lags, dtype=float)
    rows = {}
    for delta_c in ctx.scenario.detuning.values:
        values = np.asarray(memory_kernel(ctx.model, delta_c, lags), dtype=complex)
        columns = {"lag": lags, **split_complex("G", values), "G_abs": np.abs(values)}
        if isinstance(ctx.model, AnisotropicEffMass):
            asym = anisotropic_prefactor(ctx.model.omega_c) * np.asarray(
                asymptotic_anisotropic_kernel(ctx.model.omega_c * lags, delta_c * lags)
            )
            columns.update(split_complex("G_longlag", asym))
        ctx.csv(f"kernel_{_tag(delta_c)}", columns, f"memory kernel {ctx.model.kind} delta_c={delta_c:g}")
        s = complex(1.0, delta_c)
        rows[_tag(delta_c)] = {"laplace_at_1_plus_i_delta": kernel_laplace(ctx.model, delta_c, s)}
    ctx.summary["kernel"] = rows


def _run_osc(ctx: RunContext) -> None:
    tau = ctx.grid.tau
    q0_values = ctx.scenario.osc.q0
    rows = {}
    for delta_c in ctx.scenario.detuning.values:
        amplitude = lowexc.decay_amplitude(ctx.model, delta_c, ctx.grid)
        population = np.clip(np.abs(amplitude) ** 2, 0.0, 1.0)
        columns = {"tau": tau, "population": population, **split_complex("B", amplitude)}
        for q0 in q0_values:
            columns[f"mandel_q_{q0:g}"] = population * (q0 - 1.0) + 1.0
        ctx.csv(f"oscillator_{_tag(delta_c)}", columns, f"low-excitation dynamics {ctx.model.kind} delta_c={delta_c:g}")

        steady, settled = lowexc.steady_value(tau, population)
        row: Dict[str, Any] = {"steady_population": steady, "steady": settled}
        if isinstance(ctx.model, IsotropicEffMass):
            sol = lowexc.solve_roots(delta_c)
            row["localized_fraction"] = lowexc.localized_fraction(sol)
            row["roots"] = [complex(u) for u in sol.roots]
            row["sum_rule_max_residual"] = lowexc.sum_rule_residual(sol, ctx.grid)[0]
        rows[_tag(delta_c)] = row
    ctx.summary["oscillator"] = rows


def _run_spectrum(ctx: RunContext) -> None:
    section = ctx.scenario.spectrum
    omega = np.linspace(section.omega_min, section.omega_max, section.points)
    columns: Dict[str, np.ndarray] = {"omega": omega}
    rows = {}
    for delta_c in ctx.scenario.detuning.values:
        curve = lowexc.emission_spectrum(delta_c, omega)
        columns[f"density_{_tag(delta_c)}"] = curve.density
        rows[_tag(delta_c)] = {"fwhm": curve.fwhm, "weight": curve.weight, "peak_omega": float(omega[np.argmax(curve.density)])}
    ctx.csv("spectrum", columns, "emission spectrum, omega measured from the band edge")
    ctx.summary["spectrum"] = rows


def _series_columns(series) -> Dict[str, np.ndarray]:
    return {
        "tau": series.tau,
        "j3": series.j3,
        **split_complex("j12", series.j12),
        "abs_j12": np.abs(series.j12),
        "phase": meanfield.phase_angle(series),
        "emission_rate": meanfield.emission_rate(series),
    }


def _run_meanfield(ctx: RunContext) -> None:
    init = _init_spec(ctx.scenario)
    deltas = ctx.scenario.detuning.values
    dephasing_cfg = ctx.scenario.dephasing
    dephasing = DephasingSpec(sigma=dephasing_cfg.sigma, seed=ctx.seed)
    if dephasing.sigma > 0.0:
        runs = [
            meanfield.dephased_ensemble_mean(ctx.model, d, init, ctx.grid, dephasing, dephasing_cfg.n_runs)
            for d in deltas
        ]
    else:
        runs = meanfield.detuning_scan(ctx.model, deltas, init, ctx.grid, workers=ctx.workers)

    window = min(20.0, 0.25 * ctx.grid.tau_max)
    rows = {}
    for delta_c, series in zip(deltas, runs):
        columns = _series_columns(series)
        if "mean_polarization_modulus" in series.metadata:
            columns["mean_abs_j12"] = series.metadata["mean_polarization_modulus"]
        ctx.csv(f"meanfield_{_tag(delta_c)}", columns, f"mean-field {ctx.model.kind} delta_c={delta_c:g} r={init.r:g}")

        j3_final, settled = lowexc.steady_value(series.tau, series.j3)
        row: Dict[str, Any] = {"final_j3": j3_final, "steady": settled, "final_abs_j12": float(abs(series.j12[-1]))}
        try:
            row["phase_velocity"] = meanfield.phase_velocity(series, window)
        except SearchError as e:
            logger.warning(f"Phase velocity undefined at delta_c={delta_c}: {e}")
            row["phase_velocity"] = None
        if isinstance(ctx.model, FreeSpace) and dephasing.sigma == 0.0:
            reference = meanfield.free_space_reference(init, ctx.grid, ctx.model.gamma)
            row["max_deviation_from_analytic"] = float(np.max(np.abs(reference.j3 - series.j3)))
        if ctx.scenario.run.convergence_check:
            row["dtau_halving_change"] = meanfield.convergence_check(ctx.model, delta_c, init, ctx.grid)
        rows[_tag(delta_c)] = row
    ctx.summary["meanfield"] = rows
    ctx.summary["dephasing"] = {"sigma": dephasing.sigma, "n_runs": dephasing_cfg.n_runs}


def _run_transparent(ctx: RunContext) -> None:
    section = ctx.scenario.transparent
    result = meanfield.find_transparent_detuning(
        ctx.model,
        ctx.scenario.init.r,
        search_interval=(section.lo, section.hi),
        tau_max=section.tau_max,
        dtau=section.dtau,
        window=section.window,
    )
    grid = Grid(tau_max=section.tau_max, dtau=section.dtau)
    series = meanfield.evolve_meanfield(ctx.model, result.delta_c, InitialStateSpec(r=ctx.scenario.init.r), grid)
    ctx.csv("transparent_state", _series_columns(series), f"mean-field at the transparent detuning {result.delta_c:+.5f}")
    ctx.summary["transparent"] = {
        "delta_c_star": result.delta_c,
        "steady_j3": result.steady_j3,
        "phase_velocity": result.phase_velocity,
        "evaluations": result.evaluations,
    }
    if ctx.scenario.run.convergence_check:
        ctx.summary["transparent"]["dtau_halving_change"] = meanfield.convergence_check(
            ctx.model, result.delta_c, InitialStateSpec(r=ctx.scenario.init.r), grid
        )


def _ensemble_spec(ctx: RunContext, delta_c: float, policy: str, n_atoms: Optional[int] = None) -> quantum.EnsembleSpec:
    section = ctx.scenario.ensemble
    return quantum.EnsembleSpec(
        model=ctx.model,
        delta_c=float(delta_c),
        n_atoms=n_atoms or section.n_atoms,
        n_realizations=section.n_realizations,
        grid=ctx.grid,
        t0_policy=policy,
        master_seed=ctx.seed,
        amplitude_law=section.amplitude_law,
        snapshot_times=tuple(section.snapshots),
        n_bins=section.bins,
        chunk_size=section.chunk_size,
    )


def _run_ensemble(ctx: RunContext) -> None:
    rows = {}
    for policy in ctx.scenario.ensemble.t0_policy:
        for delta_c in ctx.scenario.detuning.values:
            stats = quantum.run_ensemble(_ensemble_spec(ctx, delta_c, policy), workers=ctx.workers)
            stem = f"ensemble_{policy}_{_tag(delta_c)}"
            ctx.csv(
                stem,
                {
                    "tau": stats.mean_inversion.tau,
                    "mean_j3": stats.mean_inversion.j3,
                    "abs_mean_j12": np.abs(stats.mean_inversion.j12),
                    "mean_abs_j12": stats.mean_polarization_modulus.metadata["mean_of_modulus"],
                },
                f"quantum ensemble {ctx.model.kind} delta_c={delta_c:g} t0={policy}",
            )
            hist = stats.delay_histogram
            ctx.csv(
                f"{stem}_delays",
                {"bin_lo": hist.edges[:-1], "bin_hi": hist.edges[1:], "count": hist.counts},
                f"delay-time histogram (overflow {hist.overflow})",
                units={"count": "realizations"},
            )
            snapshots = {}
            for t, sample in stats.polarization_snapshots:
                ctx.csv(
                    f"{stem}_snapshot_t{t:g}",
                    {"kappa": sample.kappa, "phi": sample.phi},
                    f"polarization snapshot at tau={t:g}",
                    units={"kappa": "units of J12", "phi": "rad"},
                )
                snapshots[f"{t:g}"] = {
                    "mean_kappa": float(np.mean(sample.kappa)),
                    "phase_resultant": quantum.circular_resultant(sample.phi),
                }
            finite = stats.delay_times[np.isfinite(stats.delay_times)]
            rows[f"{policy}_{_tag(delta_c)}"] = {
                "t0": stats.t0,
                "d_t0_sq": stats.d_t0_sq,
                "final_mean_j3": float(stats.mean_inversion.j3[-1]),
                "final_abs_mean_j12": float(abs(stats.mean_inversion.j12[-1])),
                "mean_delay": float(finite.mean()) if len(finite) else None,
                "delay_overflow": hist.overflow,
                "snapshots": snapshots,
            }
            ctx.manifest.seeds = stats.metadata["seeds"]
    ctx.summary["ensemble"] = rows


def _noise_spec(ctx: RunContext) -> noise.NoiseSpec:
    section = ctx.scenario.noise
    return noise.NoiseSpec(
        alpha=section.alpha,
        n_terms=section.n_terms,
        omega_max=section.omega_max,
        seed=ctx.seed,
        weighting=section.weighting,
        regularization=section.regularization,
    )


def _run_noise(ctx: RunContext) -> None:
    section = ctx.scenario.noise
    spec = _noise_spec(ctx)
    lags = np.asarray(section.lags, dtype=float)
    shifts = np.rint(lags / ctx.grid.dtau).astype(int)
    base_count = ctx.grid.n_steps + 1 - int(shifts.max())
    streams = spawn_streams(ctx.seed, section.n_paths)
    chunk = ctx.scenario.ensemble.chunk_size or get_settings().chunk_size

    # chunks share base_count, so the path-weighted mean of chunk estimates is exact
    total = np.zeros(len(lags))
    first_path = None
    for start, stop in chunk_ranges(section.n_paths, chunk):
        paths = [noise.generate_noise(spec, ctx.grid, np.random.default_rng(s)) for s in streams[start:stop]]
        if first_path is None:
            first_path = paths[0]
        total += (stop - start) * noise.autocorrelation(paths, lags, base_count)
    measured = total / section.n_paths

    analytic = noise.analytic_autocorrelation(spec, lags)
    target = noise.target_autocorrelation(lags, spec.alpha, spec.regularization)
    ctx.csv(
        "autocorrelation",
        {"lag": lags, "measured": measured, "cosine_sum_exact": analytic, "target": target},
        f"noise autocorrelation alpha={spec.alpha} n_terms={spec.n_terms} paths={section.n_paths}",
    )
    ctx.csv("noise_path_0", {"tau": first_path.tau, "xi": first_path.xi}, "first noise realization")
    ctx.manifest.seeds = seed_record(ctx.seed, section.n_paths, chunk)
    ctx.summary["noise"] = {
        "max_relative_error_vs_target": float(np.max(np.abs(measured / target - 1.0))),
        "max_relative_error_vs_cosine_sum": float(np.max(np.abs(measured / analytic - 1.0))),
        "n_paths": section.n_paths,
    }


def _run_stochastic(ctx: RunContext) -> None:
    section = ctx.scenario.noise
    spec = _noise_spec(ctx)
    rows = {}
    for n_atoms in section.n_atoms:
        for delta_c in ctx.scenario.detuning.values:
            stats = noise.stochastic_ensemble(
                ctx.model, delta_c, n_atoms, ctx.grid, spec, section.n_paths,
                workers=ctx.workers, chunk_size=ctx.scenario.ensemble.chunk_size,
            )
            # the noise seeds the whole linear stage with memory intact, as the t0 = 0 hand-off does
            reference = quantum.run_ensemble(_ensemble_spec(ctx, delta_c, "at_zero", n_atoms), workers=ctx.workers)
            deviation = np.abs(stats.mean_inversion.j3 - reference.mean_inversion.j3)
            ctx.csv(
                f"stochastic_N{n_atoms}_{_tag(delta_c)}",
                {
                    "tau": ctx.grid.tau,
                    "stochastic_mean_j3": stats.mean_inversion.j3,
                    "ensemble_mean_j3": reference.mean_inversion.j3,
                    "abs_difference": deviation,
                },
                f"stochastic vs quantum ensemble N={n_atoms} delta_c={delta_c:g}",
            )
            finite = stats.delay_times[np.isfinite(stats.delay_times)]
            rows[f"N{n_atoms}_{_tag(delta_c)}"] = {
                "max_abs_difference": float(deviation.max()),
                "mean_delay": float(finite.mean()) if len(finite) else None,
            }
            ctx.manifest.seeds = stats.metadata["seeds"]
    ctx.summary["stochastic"] = rows


def _oracle_reference(ctx: RunContext, case: str, delta_c: float) -> np.ndarray:
    if case == "lowexc":
        return np.abs(lowexc.decay_amplitude(ctx.model, delta_c, ctx.grid)) ** 2
    if case == "gain":
        return np.abs(quantum.amplitude_D(ctx.model, delta_c, ctx.grid.tau)) ** 2
    return meanfield.evolve_meanfield(ctx.model, delta_c, _init_spec(ctx.scenario), ctx.grid).j3


def _run_oracle_compare(ctx: RunContext) -> None:
    section = ctx.scenario.oracle
    init = _init_spec(ctx.scenario).state()
    rows = {}
    for delta_c in ctx.scenario.detuning.values:
        bath = bath_oracle.build_bath(ctx.model, delta_c, n_modes=section.n_modes, omega_window=section.window, calibrate=False)
        mismatch = bath_oracle.calibration(bath, ctx.model)
        oracle = bath_oracle.oracle_evolve(bath, ctx.grid, section.case, init)
        reference = _oracle_reference(ctx, section.case, delta_c)
        worst, deviation = bath_oracle.compare_with(reference, oracle, ctx.grid.tau)
        n = len(oracle.tau)
        ctx.csv(
            f"oracle_{section.case}_{_tag(delta_c)}",
            {
                "tau": oracle.tau,
                "reference": reference[:n],
                "oracle": oracle.j3,
                "abs_deviation": deviation,
                "mode_population": oracle.metadata["mode_population"],
            },
            f"discrete-bath check case={section.case} modes={bath.n_modes} window={bath.window:g}",
        )
        rows[_tag(delta_c)] = {
            "max_abs_deviation": worst,
            "calibration_mismatch": mismatch,
            "recurrence_time": bath.recurrence_time,
            "truncated": oracle.metadata["truncated"],
        }
        logger.info(f"oracle {section.case} delta_c={delta_c:+g}: max deviation {worst:.3e}")
    ctx.summary["oracle"] = {"case": section.case, "results": rows}


HANDLERS: Dict[str, Callable[[RunContext], None]] = {
    "kernel": _run_kernel,
    "osc": _run_osc,
    "spectrum": _run_spectrum,
    "meanfield": _run_meanfield,
    "transparent": _run_transparent,
    "ensemble": _run_ensemble,
    "noise": _run_noise,
    "stochastic": _run_stochastic,
    "oracle-compare": _run_oracle_compare,
}


def execute(
    scenario: ScenarioConfig,
    *,
    out_dir: Optional[str] = None,
    workers: Optional[int] = None,
) -> Dict[str, Any]:
    """Run one scenario and write its CSV files, summary.json and manifest.json."""
    cfg = get_settings()
    command = scenario.run.command
    if command not in HANDLERS:
        raise DomainError(f"Unknown command {command!r}")
    if scenario.run.convergence_check and command not in ("meanfield", "transparent"):
        logger.warning(f"--convergence-check applies to meanfield and transparent runs; ignored for {command}")

    target = Path(out_dir or cfg.output_dir) / command
    target.mkdir(parents=True, exist_ok=True)
    n_workers = workers or scenario.run.workers or cfg.workers

    ctx = RunContext(
        scenario=scenario,
        out_dir=target,
        model=build_scenario_model(scenario),
        grid=_grid(scenario),
        workers=n_workers,
        manifest=RunManifest(
            command=command,
            config=scenario.echo(),
            seeds={"master_seed": scenario.run.seed, "scheme": "none"},
        ),
    )
    logger.info(f"Running {command} for the {ctx.model.kind} model into {target} ({n_workers} worker(s))")
    HANDLERS[command](ctx)

    ctx.summary["command"] = command
    ctx.summary["model"] = ctx.model.kind
    summary_path = ctx.manifest.add(write_json(target / "summary.json", ctx.summary))
    manifest_path = ctx.manifest.write(target)

    files: List[str] = [str(p) for p in ctx.manifest.files] + [str(manifest_path)]
    return {
        "command": command,
        "out_dir": str(target),
        "summary_path": str(summary_path),
        "summary": ctx.summary,
        "files": files,
    }
