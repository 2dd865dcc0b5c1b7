import math

import numpy as np
import pytest

from src.bandedge.models import CollectiveState, Grid
from src.bandedge.meanfield import evolve_meanfield
from src.bandedge.quantum import EnsembleSpec, run_ensemble
from src.bandedge.noise import (
    NoiseSpec,
    analytic_autocorrelation,
    autocorrelation,
    evolve_stochastic,
    generate_noise,
    noise_coupling,
    spectral_components,
    stochastic_ensemble,
    target_autocorrelation,
)
from src.core.errors import DomainError


def test_single_path_reproduces_cosine_sum_exactly():
    # integer frequencies and one full period of base times
    spec = NoiseSpec(n_terms=50, omega_max=50.0, weighting="point", seed=5)
    dtau = 2.0 * math.pi / 128
    grid = Grid(tau_max=148 * dtau, dtau=dtau)
    lags = np.array([0, 5, 20]) * dtau
    path = generate_noise(spec, grid)
    measured = autocorrelation([path], lags, base_count=128)
    np.testing.assert_allclose(measured, analytic_autocorrelation(spec, lags), rtol=1e-10)


def test_cell_weighted_sum_approaches_inverse_square_root():
    spec = NoiseSpec(n_terms=100_000, omega_max=1e4)
    lags = np.array([0.1, 0.2, 0.5, 1.0, 2.0, 5.0])
    ratio = analytic_autocorrelation(spec, lags) / target_autocorrelation(lags)
    assert np.max(np.abs(ratio - 1.0)) < 0.05


def test_cell_powers_integrate_the_spectrum():
    spec = NoiseSpec(n_terms=1000, omega_max=100.0)
    omega, power = spectral_components(spec)
    assert omega[0] == 0.0 and len(omega) == spec.n_terms + 1
    top = (spec.n_terms + 0.5) * spec.d_omega
    assert np.sum(power) == pytest.approx(2.0 * math.sqrt(top) / math.sqrt(2.0 * math.pi), rel=1e-12)


def test_noise_is_deterministic_for_a_seed(short_grid):
    spec = NoiseSpec(n_terms=200, seed=42)
    first = generate_noise(spec, short_grid)
    second = generate_noise(spec, short_grid)
    other = generate_noise(NoiseSpec(n_terms=200, seed=43), short_grid)
    np.testing.assert_array_equal(first.xi, second.xi)
    assert not np.array_equal(first.xi, other.xi)


def test_autocorrelation_rejects_off_grid_lags(short_grid):
    path = generate_noise(NoiseSpec(n_terms=50), short_grid)
    with pytest.raises(DomainError, match="multiples"):
        autocorrelation([path], [0.015])
    with pytest.raises(DomainError):
        autocorrelation([], [0.0])


@pytest.mark.parametrize("kwargs", [{"alpha": 2}, {"n_terms": 0}, {"weighting": "log"}, {"omega_max": -1.0}])
def test_noise_spec_validation(kwargs):
    with pytest.raises(DomainError):
        NoiseSpec(**kwargs)


def test_regularized_noise_autocorrelation_is_finite_at_zero_lag():
    spec = NoiseSpec(alpha=3, n_terms=2000, omega_max=400.0)
    values = analytic_autocorrelation(spec, [0.0, 1.0])
    assert np.all(np.isfinite(values))
    assert target_autocorrelation(0.0, alpha=3) == pytest.approx(0.05 ** -1.5)


def test_stochastic_needs_large_samples(isotropic, short_grid):
    with pytest.raises(DomainError, match="n_atoms"):
        evolve_stochastic(isotropic, 0.0, 500, short_grid, NoiseSpec(n_terms=50))


def test_noise_coupling():
    assert noise_coupling(1000) == pytest.approx(1.0 / math.sqrt(1000 * math.sqrt(math.pi)))


def test_stochastic_ensemble_is_chunk_and_worker_invariant(isotropic):
    grid = Grid(tau_max=3.0, dtau=0.01)
    spec = NoiseSpec(n_terms=200, seed=1)
    serial = stochastic_ensemble(isotropic, 0.0, 1000, grid, spec, n_paths=6, workers=1, chunk_size=2)
    pooled = stochastic_ensemble(isotropic, 0.0, 1000, grid, spec, n_paths=6, workers=2, chunk_size=2)
    np.testing.assert_array_equal(serial.mean_inversion.j3, pooled.mean_inversion.j3)
    assert serial.mean_inversion.j3[0] == pytest.approx(1.0)
    assert np.all(np.abs(serial.mean_inversion.j3) <= 1.0 + 1e-9)
    assert serial.metadata["seeds"]["n_streams"] == 6


def test_noise_free_drive_reduces_to_mean_field(isotropic):
    grid = Grid(tau_max=5.0, dtau=0.01)
    start = CollectiveState(j3=math.sqrt(1.0 - 4.0 * 0.01 ** 2), j12=0.01 + 0j)
    silent = evolve_stochastic(isotropic, 0.5, 1000, grid, NoiseSpec(n_terms=50), init=start, amplitude_scale=0.0)
    reference = evolve_meanfield(isotropic, 0.5, start, grid)
    assert np.max(np.abs(silent.j3 - reference.j3)) == 0.0
    assert np.max(np.abs(silent.j12 - reference.j12)) == 0.0


def test_noise_free_inverted_state_stays_put(isotropic, short_grid):
    silent = evolve_stochastic(isotropic, 0.0, 1000, short_grid, NoiseSpec(n_terms=50), amplitude_scale=0.0)
    np.testing.assert_array_equal(silent.j3, 1.0)
    np.testing.assert_array_equal(silent.j12, 0.0)


def test_doubling_atoms_scales_the_drive():
    assert noise_coupling(2000) == pytest.approx(noise_coupling(1000) / math.sqrt(2.0), rel=1e-15)


def test_autocorrelation_at_default_resolution():
    # 1000 cells up to 2 pi 100 resolve lags well below 2 pi / d_omega = 10
    spec = NoiseSpec(n_terms=1000)
    lags = np.array([0.1, 0.2, 0.5, 1.0, 2.0])
    ratio = analytic_autocorrelation(spec, lags) / target_autocorrelation(lags)
    assert np.max(np.abs(ratio - 1.0)) < 1e-2


@pytest.mark.slow
def test_stochastic_mean_inversion_tracks_the_quantum_ensemble(isotropic):
    grid = Grid(tau_max=12.0, dtau=0.01)
    stochastic = stochastic_ensemble(isotropic, 0.0, 1000, grid, NoiseSpec(seed=11), n_paths=2000)
    quantum = run_ensemble(
        EnsembleSpec(
            model=isotropic,
            delta_c=0.0,
            n_atoms=1000,
            n_realizations=2000,
            grid=grid,
            t0_policy="at_zero",
            master_seed=11,
        )
    )
    deviation = np.abs(stochastic.mean_inversion.j3 - quantum.mean_inversion.j3)
    assert deviation.max() < 0.05
