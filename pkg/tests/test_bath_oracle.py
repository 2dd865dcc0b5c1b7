import math

import numpy as np
import pytest

from src.bandedge import bath_oracle
from src.bandedge.kernel import memory_kernel
from src.bandedge.lowexc import excited_population, solve_roots
from src.bandedge.meanfield import evolve_meanfield
from src.bandedge.models import Grid, InitialStateSpec
from src.bandedge.quantum import amplitude_D
from src.core.errors import DomainError


def test_density_of_states(isotropic, free_space):
    assert bath_oracle.density_of_states(isotropic, 1.0) == pytest.approx(1.0 / math.pi)
    assert bath_oracle.density_of_states(free_space, 3.0) == pytest.approx(1.0 / (2.0 * math.pi))


def test_cell_weights_integrate_the_density(isotropic):
    bath = bath_oracle.build_bath(isotropic, 0.0, n_modes=500, omega_window=100.0, calibrate=False)
    assert np.sum(bath.couplings ** 2) == pytest.approx((2.0 / math.pi) * math.sqrt(100.0), rel=1e-12)
    assert bath.n_modes == 500


def test_isotropic_kernel_reconstruction(isotropic):
    bath = bath_oracle.build_bath(isotropic, 0.0, n_modes=2000, omega_window=40.0, calibrate=False)
    lags = np.linspace(0.05, 10.0, 60)
    rebuilt = bath_oracle.kernel_reconstruction(bath, lags, include_tail=True)
    exact = memory_kernel(isotropic, 0.0, lags)
    assert np.max(np.abs(rebuilt - exact) / np.abs(exact)) < 1e-2


@pytest.mark.parametrize("delta_c", [-1.0, 0.0, 1.0])
def test_default_baths_pass_calibration(isotropic, free_space, delta_c):
    for model in (isotropic, free_space):
        bath = bath_oracle.build_bath(model, delta_c)
        assert bath_oracle.calibration(bath, model) < bath_oracle.CALIBRATION_TOLERANCE


def test_free_space_window_sets_recurrence(free_space):
    bath = bath_oracle.build_bath(free_space, 0.0, n_modes=400)
    assert bath.window == pytest.approx(bath_oracle.FREE_SPACE_SPACING * 400)
    assert bath.recurrence_time == pytest.approx(2.0 * math.pi / bath_oracle.FREE_SPACE_SPACING)


def test_bath_argument_checks(isotropic, free_space):
    with pytest.raises(DomainError):
        bath_oracle.build_bath(isotropic, 0.0, n_modes=50)
    with pytest.raises(DomainError):
        bath_oracle.build_bath(isotropic, 0.0, omega_window=-1.0)
    bath = bath_oracle.build_bath(free_space, 0.0, n_modes=200)
    with pytest.raises(DomainError, match="isotropic"):
        bath_oracle.kernel_reconstruction(bath, [1.0], include_tail=True)
    grid = Grid(tau_max=1.0, dtau=0.1)
    with pytest.raises(DomainError):
        bath_oracle.oracle_evolve(bath, grid, case="pump")
    with pytest.raises(DomainError, match="CollectiveState"):
        bath_oracle.oracle_evolve(bath, grid, case="meanfield")


def test_oracle_truncates_at_recurrence(free_space):
    bath = bath_oracle.build_bath(free_space, 0.0, n_modes=100)
    result = bath_oracle.oracle_evolve(bath, Grid(tau_max=30.0, dtau=0.5))
    assert result.metadata["truncated"]
    assert result.tau[-1] <= bath.recurrence_time


def test_free_space_oracle_decay(free_space):
    grid = Grid(tau_max=10.0, dtau=0.05)
    bath = bath_oracle.build_bath(free_space, 0.0, n_modes=400)
    result = bath_oracle.oracle_evolve(bath, grid, "lowexc")
    worst, _ = bath_oracle.compare_with(np.exp(-grid.tau), result, grid.tau)
    assert worst < 1e-2
    total = result.j3 + result.metadata["mode_population"]
    np.testing.assert_allclose(total, 1.0, atol=1e-5)


@pytest.mark.slow
@pytest.mark.parametrize("delta_c", [-1.0, 0.0, 1.0])
def test_oracle_matches_closed_form_population(isotropic, delta_c):
    grid = Grid(tau_max=20.0, dtau=0.05)
    bath = bath_oracle.build_bath(isotropic, delta_c, n_modes=2000)
    result = bath_oracle.oracle_evolve(bath, grid, "lowexc")
    reference = excited_population(solve_roots(delta_c), grid.tau)
    worst, _ = bath_oracle.compare_with(reference, result, grid.tau)
    assert worst < 1e-2
    assert not result.metadata["truncated"]


@pytest.mark.slow
def test_oracle_gain_matches_growth_amplitude(isotropic):
    grid = Grid(tau_max=3.0, dtau=0.05)
    bath = bath_oracle.build_bath(isotropic, 0.0, n_modes=2000)
    result = bath_oracle.oracle_evolve(bath, grid, "gain")
    reference = np.abs(amplitude_D(isotropic, 0.0, grid.tau)) ** 2
    assert np.max(np.abs(result.j3 / reference - 1.0)) < 1e-2


@pytest.mark.slow
def test_renormalized_anisotropic_gain_matches_explicit_modes(anisotropic):
    grid = Grid(tau_max=0.2, dtau=0.01)
    bath = bath_oracle.build_bath(anisotropic, 0.0)
    assert bath.frequency_shift == pytest.approx(anisotropic.lamb_shift)
    result = bath_oracle.oracle_evolve(bath, grid, "gain")
    reference = np.abs(amplitude_D(anisotropic, 0.0, grid.tau)) ** 2
    assert np.max(np.abs(result.j3 / reference - 1.0)) < 5e-2
    assert reference[-1] > reference[0]


@pytest.mark.slow
@pytest.mark.parametrize("delta_c", [-1.0, 0.0, 1.0])
def test_oracle_matches_mean_field(isotropic, delta_c):
    grid = Grid(tau_max=10.0, dtau=0.01)
    init = InitialStateSpec(r=1e-2)
    bath = bath_oracle.build_bath(isotropic, delta_c, n_modes=2000)
    result = bath_oracle.oracle_evolve(bath, grid, "meanfield", init.state())
    reference = evolve_meanfield(isotropic, delta_c, init, grid).j3
    worst, _ = bath_oracle.compare_with(reference, result, grid.tau)
    assert worst < 1e-2
    assert not result.metadata["truncated"]


@pytest.mark.slow
def test_emitted_photons_account_for_the_growth(isotropic):
    # |D|^2 - 1 = N sum |C|^2 in collective units, up to the crossover time
    grid = Grid(tau_max=1.0, dtau=0.05)
    bath = bath_oracle.build_bath(isotropic, 0.0, n_modes=2000)
    result = bath_oracle.oracle_evolve(bath, grid, "gain")
    np.testing.assert_allclose(result.metadata["mode_population"], result.j3 - 1.0, atol=1e-6)
    assert result.j3[-1] > 2.0
