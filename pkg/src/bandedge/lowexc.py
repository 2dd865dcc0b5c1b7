"""Low-excitation (harmonic-oscillator) dynamics near an isotropic band edge.

With almost all atoms in the ground state the collective amplitude obeys a
linear Volterra equation whose Laplace transform is 1/(s + G(s)). Writing
u = sqrt(s - i delta_c) turns the denominator into the cubic
u^3 + i delta_c u + e^{-i pi/4} = 0, and partial fractions over its three
roots give B(tau) as a sum of scaled complementary error functions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.special import gammaln, wofz

from src.core.errors import DomainError, NumericError
from .kernel import C_ISO
from .models import BandEdgeModel, FreeSpace, Grid, IsotropicEffMass, check_detuning
from .volterra import convolve_history, product_weights, solve_linear

logger = logging.getLogger(__name__)

ROOT_TOLERANCE = 1e-10
STEADY_WINDOW = 5.0
STEADY_TOLERANCE = 1e-4

_EXP_I_PI_4 = C_ISO.conjugate()


@dataclass(frozen=True)
class OscillatorSolution:
    """Roots u_j of u^3 + i delta_c u + sign e^{-i pi/4} and their residue weights.

    sign = +1 describes the decaying amplitude B, sign = -1 the growing
    amplitude D of the inverted system. `cardano` holds (A+, A-) of the
    real cubic v^3 + delta_c v - sign obtained with u = e^{i pi/4} v.
    """

    delta_c: float
    sign: int
    roots: np.ndarray
    weights: np.ndarray
    cardano: Tuple[complex, complex]

    @property
    def branch_roots(self) -> np.ndarray:
        """Principal square roots of u_j^2; equal to u_j only for poles on the physical sheet."""
        return np.sqrt(self.roots ** 2)

    @property
    def poles(self) -> np.ndarray:
        return self.roots ** 2 + 1j * self.delta_c


def cardano_coefficients(delta_c: float, sign: int = 1) -> Tuple[complex, complex]:
    """A+- = (sign/2 +- sqrt(1/4 + delta_c^3/27))^{1/3}, so that v = A+ - delta_c/(3 A+) solves the cubic."""
    disc = np.sqrt(complex(0.25 + delta_c ** 3 / 27.0))
    a_plus = complex(0.5 * sign + disc) ** (1.0 / 3.0)
    a_minus = complex(0.5 * sign - disc) ** (1.0 / 3.0)
    return a_plus, a_minus


def _cubic(u: np.ndarray, delta_c: float, sign: int) -> np.ndarray:
    return u ** 3 + 1j * delta_c * u + sign * C_ISO


def solve_roots(delta_c: float, gain: bool = False) -> OscillatorSolution:
    """Roots and residue weights for the decaying (default) or growing amplitude."""
    delta_c = check_detuning(delta_c)
    sign = -1 if gain else 1
    roots = np.roots([1.0, 0.0, 1j * delta_c, sign * C_ISO]).astype(complex)
    for _ in range(3):
        deriv = 3.0 * roots ** 2 + 1j * delta_c
        roots = roots - _cubic(roots, delta_c, sign) / deriv

    residual = np.abs(_cubic(roots, delta_c, sign)) / np.maximum(1.0, np.abs(roots) ** 3)
    if not np.all(np.isfinite(residual)) or residual.max() > ROOT_TOLERANCE:
        raise NumericError(
            f"Oscillator roots for delta_c={delta_c} not resolved: max residual {residual.max():.2e}"
        )
    deriv = 3.0 * roots ** 2 + 1j * delta_c
    if np.any(np.abs(deriv) < 1e-8):
        raise NumericError(f"Repeated oscillator root at delta_c={delta_c}; residue expansion is singular")

    order = np.argsort(-roots.real)
    roots = roots[order]
    weights = roots / (3.0 * roots ** 2 + 1j * delta_c)
    return OscillatorSolution(
        delta_c=delta_c,
        sign=sign,
        roots=roots,
        weights=weights,
        cardano=cardano_coefficients(delta_c, sign),
    )


def amplitude_B(sol: OscillatorSolution, tau):
    """B(tau) = e^{i delta_c tau} sum_j a_j u_j w(-i u_j sqrt(tau)), with w the Faddeeva function.

    w(z) = exp(-z^2) erfc(-iz), so each term is a_j u_j exp(u_j^2 tau) erfc(-u_j sqrt(tau))
    without forming the overflowing product explicitly.
    """
    scalar = np.ndim(tau) == 0
    t = np.asarray(tau, dtype=float)
    if not np.all(np.isfinite(t)) or np.any(t < 0.0):
        raise DomainError("tau must be finite and non-negative")
    root_t = np.sqrt(t)[..., None]
    terms = sol.weights * sol.roots * wofz(-1j * sol.roots * root_t)
    out = np.exp(1j * sol.delta_c * t) * terms.sum(axis=-1)
    return complex(out) if scalar else out


def excited_population(sol: OscillatorSolution, tau):
    """|B(tau)|^2, clipped to [0, 1] against roundoff."""
    value = np.abs(amplitude_B(sol, tau)) ** 2
    return float(np.clip(value, 0.0, 1.0)) if np.ndim(value) == 0 else np.clip(value, 0.0, 1.0)


def localized_fraction(sol: OscillatorSolution) -> float:
    """Time-averaged long-time |B|^2 carried by undamped (bound-state) poles."""
    bound = (sol.roots.real > 0.0) & (np.abs((sol.roots ** 2).real) < 1e-9)
    return float(np.sum(np.abs(2.0 * sol.weights[bound] * sol.roots[bound]) ** 2))


def mittag_leffler_amplitude(delta_c: float, tau, gain: bool = False, n_terms: int = 400):
    """Series sum_n (-+e^{-i pi/4})^n tau^{3n/2} / Gamma(3n/2 + 1) for delta_c = 0.

    Independent of the root expansion; loses precision once tau^{3/2} is
    large, so it is only offered for tau <= 10.
    """
    if delta_c != 0.0:
        raise DomainError("Mittag-Leffler series is available for delta_c = 0 only")
    scalar = np.ndim(tau) == 0
    t = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(t < 0.0) or np.any(t > 10.0):
        raise DomainError("Mittag-Leffler series requires 0 <= tau <= 10")
    coeff = C_ISO if gain else -C_ISO
    n = np.arange(n_terms)
    log_t = np.where(t > 0.0, np.log(np.where(t > 0.0, t, 1.0)), -np.inf)
    with np.errstate(invalid="ignore"):
        exponent = 1.5 * n[None, :] * log_t[:, None] - gammaln(1.5 * n + 1.0)[None, :]
    exponent[:, 0] = 0.0
    terms = coeff ** n[None, :] * np.exp(exponent)
    out = terms.sum(axis=1)
    return complex(out[0]) if scalar else out


def decay_amplitude(model: BandEdgeModel, delta_c: float, grid: Grid, gain: bool = False) -> np.ndarray:
    """Low-excitation amplitude on a grid for any model.

    Isotropic uses the closed form, free space the exponential, anything
    else the linear Volterra stepper.
    """
    delta_c = check_detuning(delta_c)
    tau = grid.tau
    if isinstance(model, IsotropicEffMass):
        return amplitude_B(solve_roots(delta_c, gain=gain), tau)
    if isinstance(model, FreeSpace):
        rate = 0.5 * model.gamma if gain else -0.5 * model.gamma
        return np.exp(rate * tau).astype(complex)
    weights = product_weights(model, grid.n_steps, grid.dtau)
    return solve_linear(weights, delta_c, 1.0 if gain else -1.0)


@dataclass
class SpectrumCurve:
    omega_grid: np.ndarray
    density: np.ndarray
    delta_c: float
    fwhm: float
    weight: float


def _half_max_width(omega: np.ndarray, density: np.ndarray) -> float:
    peak = int(np.argmax(density))
    half = 0.5 * density[peak]
    if half <= 0.0:
        return float("nan")
    left = np.nonzero(density[:peak] < half)[0]
    right = np.nonzero(density[peak:] < half)[0]
    if len(left) == 0 or len(right) == 0:
        return float("nan")
    i, j = left[-1], peak + right[0]
    w_left = np.interp(half, [density[i], density[i + 1]], [omega[i], omega[i + 1]])
    w_right = np.interp(half, [density[j], density[j - 1]], [omega[j], omega[j - 1]])
    return float(w_right - w_left)


def emission_spectrum(delta_c: float, omega_grid) -> SpectrumCurve:
    """Spectral density sqrt(x) / (1 + (x - delta_c)^2 x) for mode offsets x = omega - omega_c > 0."""
    delta_c = check_detuning(delta_c)
    omega = np.asarray(omega_grid, dtype=float)
    if omega.ndim != 1 or not np.all(np.isfinite(omega)):
        raise DomainError("omega_grid must be a finite one-dimensional array")
    x = np.clip(omega, 0.0, None)
    density = np.where(omega > 0.0, np.sqrt(x) / (1.0 + (x - delta_c) ** 2 * x), 0.0)
    weight = float(trapezoid(density, omega)) if len(omega) > 1 else 0.0
    return SpectrumCurve(
        omega_grid=omega,
        density=density,
        delta_c=delta_c,
        fwhm=_half_max_width(omega, density),
        weight=weight,
    )


def mandel_q(sol: OscillatorSolution, tau, q0: float):
    """Q(tau) = |B(tau)|^2 (Q(0) - 1) + 1."""
    if not (math.isfinite(q0) and q0 >= 0.0):
        raise DomainError(f"Q(0) must be finite and non-negative, got {q0}")
    return excited_population(sol, tau) * (q0 - 1.0) + 1.0


def steady_value(
    tau: np.ndarray,
    values: np.ndarray,
    window: float = STEADY_WINDOW,
    tolerance: float = STEADY_TOLERANCE,
) -> Tuple[float, bool]:
    """Final value and whether it varied by less than `tolerance` over the trailing window."""
    tau = np.asarray(tau, dtype=float)
    values = np.asarray(values, dtype=float)
    tail = values[tau >= tau[-1] - window]
    spread = float(tail.max() - tail.min()) if len(tail) else float("inf")
    return float(values[-1]), spread < tolerance


def sum_rule_residual(sol: OscillatorSolution, grid: Grid) -> Tuple[float, np.ndarray]:
    """Compare 1 - |B|^2 with 2 Re int_0^tau B*(t) int_0^t G(t - t') B(t') dt' dt.

    Returns the maximum absolute discrepancy and the discrepancy on the grid.
    """
    tau = grid.tau
    amp = amplitude_B(sol, tau)
    weights = product_weights(IsotropicEffMass(), grid.n_steps, grid.dtau)
    rotated = np.exp(-1j * sol.delta_c * tau) * amp
    memory = np.exp(1j * sol.delta_c * tau) * convolve_history(weights, rotated)
    loss = cumulative_trapezoid(2.0 * np.real(np.conj(amp) * memory), tau, initial=0.0)
    residual = (1.0 - np.abs(amp) ** 2) - loss
    return float(np.max(np.abs(residual))), residual


def population_curves(delta_values, tau: np.ndarray, q0: Optional[float] = None):
    """Populations (and optionally Mandel Q) for a list of detunings on a common grid."""
    rows = []
    for delta_c in delta_values:
        sol = solve_roots(delta_c)
        pop = excited_population(sol, tau)
        q = pop * (q0 - 1.0) + 1.0 if q0 is not None else None
        rows.append((float(delta_c), pop, q, localized_fraction(sol)))
        logger.info(f"delta_c={delta_c:+.3f}: bound-state fraction {rows[-1][3]:.6f}")
    return rows
