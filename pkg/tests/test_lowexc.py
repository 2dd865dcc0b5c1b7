import numpy as np
import pytest

from src.bandedge.kernel import C_ISO
from src.bandedge.lowexc import (
    amplitude_B,
    cardano_coefficients,
    decay_amplitude,
    emission_spectrum,
    excited_population,
    localized_fraction,
    mandel_q,
    mittag_leffler_amplitude,
    population_curves,
    solve_roots,
    steady_value,
    sum_rule_residual,
)
from src.bandedge.models import Grid
from src.core.errors import DomainError


def test_cardano_coefficients_at_zero_detuning():
    a_plus, a_minus = cardano_coefficients(0.0)
    assert a_plus == pytest.approx(1.0)
    assert abs(a_minus) < 1e-12


@pytest.mark.parametrize("delta_c", [-5.0, -1.0, -0.3, 0.0, 0.5, 1.0, 3.0])
def test_roots_solve_the_cubic(delta_c):
    sol = solve_roots(delta_c)
    residual = sol.roots ** 3 + 1j * delta_c * sol.roots + C_ISO
    assert np.max(np.abs(residual)) < 1e-10
    assert amplitude_B(sol, 0.0) == pytest.approx(1.0, abs=1e-12)


def test_closed_form_matches_series():
    tau = np.linspace(0.0, 5.0, 51)
    exact = amplitude_B(solve_roots(0.0), tau)
    series = mittag_leffler_amplitude(0.0, tau)
    np.testing.assert_allclose(exact, series, atol=1e-8)


def test_series_domain():
    with pytest.raises(DomainError):
        mittag_leffler_amplitude(0.5, 1.0)
    with pytest.raises(DomainError):
        mittag_leffler_amplitude(0.0, 11.0)


def test_localized_fraction_values():
    assert localized_fraction(solve_roots(0.0)) == pytest.approx(4.0 / 9.0, abs=1e-10)
    assert localized_fraction(solve_roots(-5.0)) == pytest.approx(0.9254, abs=1e-3)


def test_localized_fraction_decreases_with_detuning():
    fractions = [localized_fraction(solve_roots(d)) for d in np.linspace(-1.0, 1.0, 9)]
    assert all(a > b for a, b in zip(fractions, fractions[1:]))


def test_long_time_population_is_the_bound_fraction():
    sol = solve_roots(0.0)
    assert excited_population(sol, 2000.0) == pytest.approx(4.0 / 9.0, abs=1e-3)


def test_mandel_q_identity():
    sol = solve_roots(0.0)
    tau = np.linspace(0.0, 10.0, 101)
    pop = excited_population(sol, tau)
    for q0 in (2.0, 0.0, 1.0):
        np.testing.assert_allclose(mandel_q(sol, tau, q0), pop * (q0 - 1.0) + 1.0, atol=1e-10)
    assert mandel_q(sol, 0.0, 2.0) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        mandel_q(sol, tau, -1.0)


def test_population_stays_in_unit_interval():
    tau = np.linspace(0.0, 50.0, 501)
    for delta_c in (-1.0, 0.0, 1.0):
        pop = excited_population(solve_roots(delta_c), tau)
        assert np.all((pop >= 0.0) & (pop <= 1.0))


def test_negative_time_is_rejected():
    with pytest.raises(DomainError):
        amplitude_B(solve_roots(0.0), -1.0)


def test_spectrum_peak_and_width():
    omega = np.linspace(0.0, 6.0, 3001)
    curve = emission_spectrum(1.0, omega)
    peak = omega[np.argmax(curve.density)]
    assert 0.5 < peak < 1.5
    assert curve.fwhm > 0.0
    assert curve.weight > 0.0
    assert curve.density[0] == 0.0


def test_sum_rule_holds():
    residual, _ = sum_rule_residual(solve_roots(0.0), Grid(tau_max=10.0, dtau=0.01))
    assert residual < 1e-2


def test_free_space_population_decays(free_space, short_grid):
    amp = decay_amplitude(free_space, 0.0, short_grid)
    np.testing.assert_allclose(np.abs(amp) ** 2, np.exp(-short_grid.tau), rtol=1e-12)


def test_steady_value_detection():
    tau = np.linspace(0.0, 20.0, 2001)
    settled, ok = steady_value(tau, 0.5 + np.exp(-tau))
    assert ok
    assert settled == pytest.approx(0.5, abs=1e-8)
    _, ok = steady_value(tau, np.sin(tau))
    assert not ok


def test_population_curves_rows():
    tau = np.linspace(0.0, 5.0, 11)
    rows = population_curves([-0.5, 0.0], tau, q0=2.0)
    assert [row[0] for row in rows] == [-0.5, 0.0]
    np.testing.assert_allclose(rows[1][2], rows[1][1] + 1.0)


def test_sum_rule_at_fine_resolution():
    residual, _ = sum_rule_residual(solve_roots(0.0), Grid(tau_max=10.0, dtau=0.002))
    assert residual < 1e-4


def test_late_population_orders_like_the_bound_fraction():
    deltas = np.linspace(-1.0, 1.0, 11)
    tau = np.linspace(200.0, 400.0, 2001)
    late = [excited_population(solve_roots(d), tau).mean() for d in deltas]
    assert all(a > b for a, b in zip(late, late[1:]))
    for delta_c, value in zip(deltas, late):
        assert value == pytest.approx(localized_fraction(solve_roots(delta_c)), abs=5e-3)
