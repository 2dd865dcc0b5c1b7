"""Reservoir memory kernels G(dtau) and their Laplace transforms.

Every kernel is returned in collective dimensionless units with the atomic
detuning folded in as the phase factor exp(i delta_c dtau). The free-space
kernel is a delta function and is only available through its Laplace
transform; sampling it pointwise raises `SingularKernelError`.

The complex error function comes from `scipy.special.wofz`, which
evaluates w(z) = exp(-z^2) erfc(-iz) without overflow.
"""

from __future__ import annotations

import logging
import math
from typing import List, Tuple, Union

import numpy as np
from scipy.special import wofz

from src.core.errors import DomainError, NumericError, SingularKernelError
from .models import (
    AnisotropicEffMass,
    BandEdgeModel,
    FreeSpace,
    IsotropicEffMass,
    IsotropicFull,
    check_detuning,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# e^{-i pi/4}, the phase of the isotropic kernel
C_ISO = complex(math.cos(math.pi / 4.0), -math.sin(math.pi / 4.0))
SQRT_PI = math.sqrt(math.pi)

ANISO_SHORT_LAG = 1e-2
ANISO_LONG_LAG = 1e3

_GL_ORDER = 16
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)
_PANEL_BLOCK = 20000


def _as_lags(dtau: ArrayLike) -> np.ndarray:
    lags = np.asarray(dtau, dtype=float)
    if not np.all(np.isfinite(lags)):
        raise DomainError("Kernel lag must be finite")
    if np.any(lags <= 0.0):
        raise DomainError(f"Kernel lag must be strictly positive, got min {lags.min()}")
    return lags


def _unwrap(value: np.ndarray, scalar_input: bool):
    return complex(value) if scalar_input else value


# ---------------------------------------------------------------------------
# Anisotropic bracket
# ---------------------------------------------------------------------------

def _e_term(y: np.ndarray) -> np.ndarray:
    """(pi/2) exp(iy) erfc(sqrt(iy)), i.e. the integral of exp(-iyx^2)/(1+x^2) over x > 0."""
    return 0.5 * math.pi * wofz(1j * np.sqrt(1j * y))


def _bracket_exact(y: np.ndarray) -> np.ndarray:
    a = 1j * y
    return np.sqrt(math.pi / a) - 2.0 * _e_term(y)


def _bracket_short(y: np.ndarray) -> np.ndarray:
    a = 1j * y
    sa = np.sqrt(a)
    return SQRT_PI / sa - math.pi + 2.0 * SQRT_PI * sa - math.pi * a + (4.0 * SQRT_PI / 3.0) * a * sa


def _bracket_long(y: np.ndarray) -> np.ndarray:
    a = 1j * y
    return np.sqrt(math.pi / a) * (0.5 / a - 0.75 / a ** 2 + 1.875 / a ** 3)


def full_anisotropic_kernel(omega_c_dt: ArrayLike, delta_c_dt: ArrayLike = 0.0):
    """Bracketed anisotropic kernel 2J(y) exp(i delta_c dt), y = omega_c dt.

    J(y) = int_0^inf x^2 exp(-iyx^2)/(1+x^2) dx. Below y = 1e-2 the short-lag
    expansion is used (weak inverse-square-root singularity); above y = 1e3
    the long-lag expansion (y^{-3/2} decay).
    """
    scalar = np.ndim(omega_c_dt) == 0 and np.ndim(delta_c_dt) == 0
    y = np.asarray(omega_c_dt, dtype=float)
    phase = np.asarray(delta_c_dt, dtype=float)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(phase))):
        raise DomainError("full_anisotropic_kernel requires finite arguments")
    if np.any(y <= 0.0):
        raise DomainError("omega_c_dt must be strictly positive")

    y1 = np.atleast_1d(y)
    out = np.empty(y1.shape, dtype=complex)
    short = y1 < ANISO_SHORT_LAG
    long = y1 > ANISO_LONG_LAG
    mid = ~(short | long)
    out[short] = _bracket_short(y1[short])
    out[long] = _bracket_long(y1[long])
    out[mid] = _bracket_exact(y1[mid])
    out = out.reshape(y.shape) * np.exp(1j * phase)
    return _unwrap(out, scalar)


def asymptotic_anisotropic_kernel(omega_c_dt: ArrayLike, delta_c_dt: ArrayLike = 0.0):
    """Leading long-lag form of the bracket: (sqrt(pi)/2) (i y)^{-3/2} exp(i delta_c dt)."""
    scalar = np.ndim(omega_c_dt) == 0 and np.ndim(delta_c_dt) == 0
    y = _as_lags(omega_c_dt)
    out = 0.5 * SQRT_PI * (1j * y) ** -1.5 * np.exp(1j * np.asarray(delta_c_dt, dtype=float))
    return _unwrap(out, scalar)


def anisotropic_prefactor(omega_c: float) -> float:
    """Scale taking the bracket 2J to the collective-unit kernel."""
    return 2.0 / SQRT_PI * omega_c ** 1.5


# ---------------------------------------------------------------------------
# Full two-band dispersion
# ---------------------------------------------------------------------------

def dispersion(model: IsotropicFull, k: np.ndarray) -> np.ndarray:
    q = k - model.k0
    return model.midgap + np.sign(q) * np.sqrt(q * q + model.gamma_k ** 2)


def _segments(model: IsotropicFull) -> Tuple[List[Tuple[float, float]], float]:
    """Integration segments in k, split at k0 where the two bands meet discontinuously."""
    width = (model.cutoff_k - model.k0) / 4.0
    segments = [(model.k0, model.cutoff_k)]
    if model.branches == "both":
        k_lo = max(0.0, model.k0 - 4.0 * width)
        if k_lo < model.k0:
            segments.insert(0, (k_lo, model.k0))
    return segments, width


def _panel_quadrature(func, k_lo: float, k_hi: float, n_panels: int) -> complex:
    edges = np.linspace(k_lo, k_hi, n_panels + 1)
    total = 0j
    for start in range(0, n_panels, _PANEL_BLOCK):
        left = edges[start:min(start + _PANEL_BLOCK, n_panels)]
        right = edges[start + 1:min(start + _PANEL_BLOCK, n_panels) + 1]
        half = 0.5 * (right - left)
        nodes = (0.5 * (right + left))[:, None] + half[:, None] * _GL_NODES[None, :]
        total += np.sum(func(nodes) * _GL_WEIGHTS[None, :] * half[:, None])
    return complex(total)


def _converged_quadrature(func, segments: List[Tuple[float, float]], panel_width: float, label: str) -> complex:
    counts = [max(32, int(math.ceil((hi - lo) / panel_width))) for lo, hi in segments]
    n_panels = sum(counts)
    coarse = sum(_panel_quadrature(func, lo, hi, n) for (lo, hi), n in zip(segments, counts))
    fine = sum(_panel_quadrature(func, lo, hi, 2 * n) for (lo, hi), n in zip(segments, counts))
    scale = max(abs(fine), 1e-300)
    rel = abs(fine - coarse) / scale
    if not np.isfinite(rel) or rel > 1e-7:
        raise NumericError(
            f"{label}: quadrature did not converge (panels={n_panels}, "
            f"coarse={coarse:.6e}, fine={fine:.6e}, relative change={rel:.2e})"
        )
    return fine


def full_dispersion_kernel(model: IsotropicFull, delta_c: float, dtau: float) -> complex:
    """Mode integral C int dk (k^2/w_k) chi(k) exp(-i (w_k - w21) dtau) over the two-band dispersion.

    chi is a Gaussian taper of width (cutoff - k0)/4 centred on k0, so the
    integral is smooth at the cutoff; w21 sits delta_c above the upper edge.

    With branches="upper" the kernel approaches the effective-mass form
    e^{-i pi/4} e^{i delta_c dtau} / sqrt(pi dtau) once gamma_k * dtau >> 1
    and sqrt(gamma_k / dtau) << k0. The corrections are of order
    1 / (gamma_k dtau) from the quartic dispersion term and
    sqrt(gamma_k / dtau) / k0 from the k^2 weight. With branches="both"
    the lower edge adds a term of the same size that beats against the
    upper one at frequency 2 gamma_k, so only its lag average is comparable:
    <|G|^2> pi dtau tends to 1 + (w_upper / w_lower)^2 instead of 1.
    At dtau -> 0 the kernel stays bounded at C int k^2/w chi dk.
    """
    if not isinstance(model, IsotropicFull):
        raise DomainError("full_dispersion_kernel requires an IsotropicFull model")
    delta_c = check_detuning(delta_c)
    lag = float(_as_lags(dtau))
    segments, width = _segments(model)
    omega_21 = model.upper_edge + delta_c

    def integrand(k: np.ndarray) -> np.ndarray:
        w = dispersion(model, k)
        taper = np.exp(-(((k - model.k0) / width) ** 2))
        return (k * k / w) * taper * np.exp(-1j * (w - omega_21) * lag)

    # about one radian of phase per panel, and the edge curvature resolved
    panel_width = min(1.0 / lag, 0.5 * model.gamma_k)
    return model.coupling * _converged_quadrature(integrand, segments, panel_width, "full_dispersion_kernel")


def _full_dispersion_laplace(model: IsotropicFull, delta_c: float, s: complex) -> complex:
    z = s - 1j * delta_c
    if z.real <= 0.0:
        raise DomainError("IsotropicFull Laplace transform is evaluated for Re(s) > 0 only")
    segments, width = _segments(model)

    def integrand(k: np.ndarray) -> np.ndarray:
        w = dispersion(model, k)
        taper = np.exp(-(((k - model.k0) / width) ** 2))
        return (k * k / w) * taper / (z + 1j * (w - model.upper_edge))

    panel_width = 0.25 * min(model.gamma_k, math.sqrt(z.real / model.curvature))
    return model.coupling * _converged_quadrature(integrand, segments, panel_width, "kernel_laplace")


# ---------------------------------------------------------------------------
# Public operations
# ---------------------------------------------------------------------------

def memory_kernel(model: BandEdgeModel, delta_c: float, dtau: ArrayLike):
    """G(dtau) in collective units for the given model (vectorised over dtau)."""
    delta_c = check_detuning(delta_c)
    scalar = np.ndim(dtau) == 0
    lags = _as_lags(dtau)

    if isinstance(model, FreeSpace):
        raise SingularKernelError(
            f"FreeSpace kernel is (gamma/2) delta(dtau) with gamma={model.gamma}; "
            "it cannot be sampled pointwise, use kernel_laplace or the Markovian mean-field path"
        )
    if isinstance(model, IsotropicEffMass):
        out = C_ISO * np.exp(1j * delta_c * lags) / np.sqrt(math.pi * lags)
        return _unwrap(out, scalar)
    if isinstance(model, AnisotropicEffMass):
        bracket = full_anisotropic_kernel(model.omega_c * lags, delta_c * lags)
        out = anisotropic_prefactor(model.omega_c) * np.asarray(bracket)
        return _unwrap(out, scalar)
    if isinstance(model, IsotropicFull):
        out = np.array([full_dispersion_kernel(model, delta_c, lag) for lag in np.atleast_1d(lags)])
        return _unwrap(out.reshape(lags.shape), scalar)
    raise DomainError(f"Unsupported model {model!r}")


def kernel_laplace(model: BandEdgeModel, delta_c: float, s: complex) -> complex:
    """Laplace transform of the kernel, principal branch of sqrt(s - i delta_c).

    The branch cut s - i delta_c in (-inf, 0] raises DomainError.
    """
    delta_c = check_detuning(delta_c)
    s = complex(s)
    if not (math.isfinite(s.real) and math.isfinite(s.imag)):
        raise DomainError("Laplace variable must be finite")
    z = s - 1j * delta_c

    if isinstance(model, FreeSpace):
        return complex(0.5 * model.gamma)
    if isinstance(model, IsotropicFull):
        return _full_dispersion_laplace(model, delta_c, s)

    if z.imag == 0.0 and z.real <= 0.0:
        raise DomainError(f"s={s} lies on the branch cut s - i*delta_c <= 0")

    if isinstance(model, IsotropicEffMass):
        return complex(C_ISO / np.sqrt(z))
    if isinstance(model, AnisotropicEffMass):
        return _anisotropic_laplace(model, z)
    raise DomainError(f"Unsupported model {model!r}")


def _anisotropic_laplace(model: AnisotropicEffMass, z: complex) -> complex:
    v = z / model.omega_c
    if abs(v - 1j) < 1e-8:
        # removable singularity
        eps = 1e-6
        return 0.5 * (_anisotropic_laplace(model, z + eps * model.omega_c)
                      + _anisotropic_laplace(model, z - eps * model.omega_c))
    sv = np.sqrt(v)
    bracket = 1.0 / (1j - v) + C_ISO.conjugate() * sv / (1.0 + 1j * v)
    value = 2.0 * SQRT_PI * math.sqrt(model.omega_c) * bracket
    if model.renormalize:
        # self-energy of a single excitation measured from the dressed transition
        value += 1j * model.lamb_shift
    return complex(value)
