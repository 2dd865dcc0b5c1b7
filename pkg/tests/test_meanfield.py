import math

import numpy as np
import pytest

from src.bandedge.meanfield import (
    convergence_check,
    dephased_ensemble_mean,
    detuning_scan,
    emission_rate,
    evolve_meanfield,
    find_transparent_detuning,
    free_space_reference,
    phase_angle,
    phase_velocity,
    stark_shifts,
)
from src.bandedge.models import DephasingSpec, Grid, InitialStateSpec, TimeSeries
from src.core.errors import DomainError, SearchError


def test_free_space_matches_analytic_pulse(free_space):
    grid = Grid(tau_max=20.0, dtau=0.005)
    init = InitialStateSpec(r=1e-3)
    series = evolve_meanfield(free_space, 0.0, init, grid)
    reference = free_space_reference(init, grid)
    assert np.max(np.abs(series.j3 - reference.j3)) < 1e-3
    assert series.j3[-1] == pytest.approx(-1.0, abs=1e-3)


def test_free_space_reference_delay():
    reference = free_space_reference(InitialStateSpec(r=1e-3), Grid(tau_max=20.0, dtau=0.01))
    assert reference.metadata["delay"] == pytest.approx(2.0 * math.atanh(0.998), rel=1e-3)
    rate = emission_rate(reference)
    assert reference.tau[np.argmax(rate)] == pytest.approx(reference.metadata["delay"], abs=0.02)


def test_inside_gap_keeps_more_inversion(isotropic):
    grid = Grid(tau_max=25.0, dtau=0.01)
    init = InitialStateSpec(r=1e-3)
    above, inside = detuning_scan(isotropic, [1.0, -1.0], init, grid)
    assert above.j3[-1] < inside.j3[-1]


def test_scan_preserves_order(isotropic):
    grid = Grid(tau_max=2.0, dtau=0.01)
    runs = detuning_scan(isotropic, [0.5, -0.5], InitialStateSpec(r=1e-2), grid)
    assert [run.metadata["delta_c"] for run in runs] == [0.5, -0.5]


def test_stark_shift_rows_do_not_depend_on_run_count():
    spec = DephasingSpec(sigma=0.5, seed=9)
    one = stark_shifts(spec, 1, 100)
    five = stark_shifts(spec, 5, 100)
    np.testing.assert_array_equal(one[0], five[0])
    assert five.shape == (5, 100)


def test_single_run_dephased_mean_is_the_trajectory(isotropic):
    grid = Grid(tau_max=5.0, dtau=0.01)
    init = InitialStateSpec(r=1e-2)
    spec = DephasingSpec(sigma=0.5, seed=3)
    single = evolve_meanfield(isotropic, 0.0, init, grid, spec)
    mean = dephased_ensemble_mean(isotropic, 0.0, init, grid, spec, 1)
    np.testing.assert_allclose(mean.j3, single.j3, atol=1e-12)
    np.testing.assert_allclose(mean.j12, single.j12, atol=1e-12)
    with pytest.raises(DomainError):
        dephased_ensemble_mean(isotropic, 0.0, init, grid, spec, 0)


def test_phase_angle_undefined_without_polarization():
    tau = np.linspace(0.0, 1.0, 5)
    j12 = np.array([0.0, 0.0, 0.1, 0.1j, -0.1], dtype=complex)
    series = TimeSeries(tau=tau, j3=np.ones(5), j12=j12)
    theta = phase_angle(series)
    assert np.all(np.isnan(theta[:2]))
    np.testing.assert_allclose(theta[2:], [0.0, math.pi / 2.0, math.pi])


def test_phase_velocity_of_rotating_polarization():
    tau = np.linspace(0.0, 10.0, 1001)
    series = TimeSeries(tau=tau, j3=np.zeros(1001), j12=0.1 * np.exp(-0.3j * tau))
    assert phase_velocity(series, 5.0) == pytest.approx(-0.3, abs=1e-10)
    dead = TimeSeries(tau=tau, j3=np.ones(1001), j12=np.zeros(1001, dtype=complex))
    with pytest.raises(SearchError):
        phase_velocity(dead, 5.0)


def test_transparent_search_needs_isotropic_edge(free_space):
    with pytest.raises(DomainError):
        find_transparent_detuning(free_space, 1e-5)


def test_zero_admixture_is_rejected():
    with pytest.raises(DomainError, match="zero polarization"):
        InitialStateSpec(r=0.0)


def test_convergence_check_passes_for_free_space(free_space):
    change = convergence_check(free_space, 0.0, InitialStateSpec(r=1e-3), Grid(tau_max=10.0, dtau=0.01))
    assert 0.0 <= change < 1e-3


@pytest.mark.slow
def test_transparent_detuning_lies_inside_the_gap(isotropic):
    result = find_transparent_detuning(isotropic, 1e-5)
    # stable under dtau halving and a longer run
    assert result.delta_c == pytest.approx(-0.6566, abs=5e-3)
    assert abs(result.steady_j3) < 0.02
    assert result.evaluations >= 2


@pytest.mark.slow
def test_renormalized_anisotropic_edge_radiates(anisotropic):
    grid = Grid(tau_max=20.0, dtau=0.005)
    init = InitialStateSpec(r=1e-6)
    for run in detuning_scan(anisotropic, [0.1, 0.0, -0.3], init, grid):
        crossing = run.tau[np.argmax(run.j3 < 0.0)]
        assert run.j3.min() < -0.5
        assert 0.0 < crossing < 5.0
        assert run.j3[-1] < -0.5


@pytest.mark.slow
def test_anisotropic_localization_needs_a_gap_detuning(anisotropic):
    # no dressed level survives on the continuum side of the edge
    grid = Grid(tau_max=20.0, dtau=0.005)
    inside, outside = detuning_scan(anisotropic, [-3.0, 3.0], InitialStateSpec(r=1e-6), grid)
    late = grid.tau >= 15.0
    assert np.mean(np.abs(inside.j12[late])) > 0.02
    assert np.mean(np.abs(outside.j12[late])) < 5e-3


@pytest.mark.slow
def test_dephasing_suppresses_the_trapped_polarization(isotropic):
    grid = Grid(tau_max=50.0, dtau=0.01)
    init = InitialStateSpec(r=1e-5)
    clean = evolve_meanfield(isotropic, 0.0, init, grid)
    noisy = evolve_meanfield(isotropic, 0.0, init, grid, DephasingSpec(sigma=0.5, seed=9))
    late = grid.tau >= 45.0
    assert np.mean(np.abs(noisy.j12[late])) < 0.1 * np.mean(np.abs(clean.j12[late]))


@pytest.mark.slow
def test_strong_dephasing_leaves_a_monotone_decay(isotropic):
    grid = Grid(tau_max=25.0, dtau=0.01)
    mean = dephased_ensemble_mean(
        isotropic, 0.0, InitialStateSpec(r=1e-5), grid, DephasingSpec(sigma=5.0, seed=4), 16
    )
    revival = mean.j3 - np.minimum.accumulate(mean.j3)
    assert revival.max() < 2e-2
    assert mean.j3[-1] < mean.j3[0]
