import math

import numpy as np
import pytest

from src.bandedge.kernel import C_ISO
from src.bandedge.lowexc import amplitude_B, solve_roots
from src.bandedge.meanfield import evolve_batch, evolve_meanfield
from src.bandedge.models import FreeSpace, Grid, InitialStateSpec, IsotropicFull
from src.bandedge.volterra import integrate_collective, product_weights, solve_linear
from src.core.errors import DomainError, StepSizeError


def test_isotropic_weights_integrate_the_kernel(isotropic):
    n, h = 400, 0.01
    weights = product_weights(isotropic, n, h)
    total = np.sum(weights.near[1:] + weights.far[1:])
    expected = C_ISO * 2.0 * math.sqrt(n * h) / math.sqrt(math.pi)
    assert total == pytest.approx(expected, rel=1e-12)


def test_weights_need_at_least_one_step(isotropic):
    with pytest.raises(DomainError):
        product_weights(isotropic, 0, 0.01)


def test_full_dispersion_is_not_time_stepped():
    with pytest.raises(DomainError, match="time stepping"):
        product_weights(IsotropicFull(), 10, 0.01)


@pytest.mark.parametrize("delta_c", [-1.0, 0.0, 1.0])
def test_linear_solver_matches_closed_form(isotropic, delta_c):
    grid = Grid(tau_max=5.0, dtau=0.005)
    weights = product_weights(isotropic, grid.n_steps, grid.dtau)
    numeric = solve_linear(weights, delta_c, -1.0)
    exact = amplitude_B(solve_roots(delta_c), grid.tau)
    assert np.max(np.abs(numeric - exact)) < 5e-3


def test_linear_solver_free_space_decay(free_space):
    grid = Grid(tau_max=5.0, dtau=0.01)
    weights = product_weights(free_space, grid.n_steps, grid.dtau)
    numeric = solve_linear(weights, 0.0, -1.0)
    np.testing.assert_allclose(numeric.real, np.exp(-0.5 * grid.tau), atol=1e-4)


def test_rotation_update_preserves_bloch_norm(isotropic):
    series = evolve_meanfield(isotropic, 0.0, InitialStateSpec(r=1e-3), Grid(tau_max=20.0, dtau=0.01))
    norm = series.j3 ** 2 + 4.0 * np.abs(series.j12) ** 2
    np.testing.assert_allclose(norm, 1.0, atol=1e-10)


def test_large_step_is_rejected():
    weights = product_weights(FreeSpace(gamma=1000.0), 10, 0.01)
    with pytest.raises(StepSizeError, match="reduce dtau"):
        integrate_collective(weights, 0.0, np.array([0.0]), np.array([0.5 + 0j]))


def test_batch_rows_match_single_runs(isotropic):
    grid = Grid(tau_max=4.0, dtau=0.01)
    states = [InitialStateSpec(r=1e-3).state(), InitialStateSpec(r=1e-2, phase0=1.0).state()]
    j3_0 = np.array([s.j3 for s in states])
    p_0 = np.array([s.j12 for s in states])
    j3, p = evolve_batch(isotropic, 0.5, j3_0, p_0, grid)
    for k, state in enumerate(states):
        single = evolve_meanfield(isotropic, 0.5, state, grid)
        np.testing.assert_allclose(j3[k], single.j3, atol=1e-12)
        np.testing.assert_allclose(p[k], single.j12, atol=1e-12)
