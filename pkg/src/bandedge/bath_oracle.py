"""Brute-force reference: the reservoir as a finite set of explicit field modes.

Modes sit at frequencies nu above the band edge (detuning nu - delta_c from
the atoms) with squared couplings equal to the density of states integrated
over each cell, so sum_l g_l^2 exp(-i (nu_l - delta_c) lag) approximates
the memory kernel. The coupled atom-mode equations are integrated with
scipy's DOP853 and never touch a memory integral.

Modes above the window are eliminated adiabatically: they add a constant
frequency shift -T to the atomic equations, with T = int_W^inf rho/nu.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import wofz

from src.core.errors import CalibrationError, DomainError, NumericError
from .kernel import SQRT_PI, kernel_laplace
from .models import (
    AnisotropicEffMass,
    BandEdgeModel,
    CollectiveState,
    FreeSpace,
    Grid,
    IsotropicEffMass,
    TimeSeries,
    check_detuning,
)

logger = logging.getLogger(__name__)

CASES = ("lowexc", "gain", "meanfield")
CALIBRATION_TOLERANCE = 1e-3
RECURRENCE_REFERENCE = 4.0
RTOL = 1e-8
FREE_SPACE_SPACING = 0.25
ATOL = 1e-10


@dataclass(frozen=True)
class DiscreteBath:
    """Explicit modes with detunings nu_l - delta_c and couplings g_l (collective units).

    `tail` is the adiabatic shift of the modes beyond the window and
    `frequency_shift` the offset between the bare and dressed transition
    frequencies (the bulk Lamb shift of a renormalized model).
    """

    mode_detunings: np.ndarray
    couplings: np.ndarray
    delta_c: float = 0.0
    tail: float = 0.0
    frequency_shift: float = 0.0
    window: float = 0.0
    recurrence_time: float = math.inf
    model_kind: str = ""

    @property
    def n_modes(self) -> int:
        return len(self.couplings)


def _cell_antiderivative(model: BandEdgeModel, nu: np.ndarray) -> np.ndarray:
    if isinstance(model, IsotropicEffMass):
        return (2.0 / math.pi) * np.sqrt(nu)
    w = model.omega_c
    root = np.sqrt(nu)
    return (2.0 / SQRT_PI) * w * (2.0 * root - 2.0 * math.sqrt(w) * np.arctan(root / math.sqrt(w)))


def density_of_states(model: BandEdgeModel, nu) -> np.ndarray:
    """Mode density rho(nu) above the edge whose transform reproduces the kernel."""
    nu = np.asarray(nu, dtype=float)
    if isinstance(model, IsotropicEffMass):
        return 1.0 / (math.pi * np.sqrt(nu))
    if isinstance(model, AnisotropicEffMass):
        return (2.0 / SQRT_PI) * model.omega_c * np.sqrt(nu) / (model.omega_c + nu)
    if isinstance(model, FreeSpace):
        return np.full(nu.shape, model.gamma / (2.0 * math.pi))
    raise DomainError(f"No discrete bath is defined for the {model.kind} model")


def tail_shift(model: BandEdgeModel, window: float) -> float:
    """int_W^inf rho(nu)/nu dnu for the modes left out of the window."""
    if isinstance(model, IsotropicEffMass):
        return (2.0 / math.pi) / math.sqrt(window)
    if isinstance(model, AnisotropicEffMass):
        w = model.omega_c
        return (4.0 / SQRT_PI) * math.sqrt(w) * (0.5 * math.pi - math.atan(math.sqrt(window / w)))
    return 0.0


def default_window(model: BandEdgeModel, n_modes: int = 2000) -> float:
    if isinstance(model, AnisotropicEffMass):
        return max(400.0, 20.0 * model.omega_c)
    if isinstance(model, FreeSpace):
        # spacing fixes the recurrence time 2 pi / spacing
        return FREE_SPACE_SPACING * n_modes
    return 400.0


def build_bath(
    model: BandEdgeModel,
    delta_c: float,
    n_modes: int = 2000,
    omega_window: Optional[float] = None,
    calibrate: bool = True,
) -> DiscreteBath:
    """Discretize the reservoir into n_modes cells.

    Band-edge models use a grid uniform in x = sqrt(nu / W), which places
    the cells densely at the edge singularity; each coupling is the exact
    integral of rho over its cell. Free space uses a flat band of width W
    centred on the atom with spacing W / n_modes; its calibration compares
    against the band-limited transform, not the full gamma / 2.
    """
    delta_c = check_detuning(delta_c)
    if n_modes < 100:
        raise DomainError(f"n_modes must be at least 100, got {n_modes}")
    window = default_window(model, n_modes) if omega_window is None else float(omega_window)
    if not (math.isfinite(window) and window > 0.0):
        raise DomainError(f"omega_window must be positive, got {window}")

    if isinstance(model, FreeSpace):
        spacing = window / n_modes
        detunings = -0.5 * window + (np.arange(n_modes) + 0.5) * spacing
        couplings = np.full(n_modes, math.sqrt(model.gamma * spacing / (2.0 * math.pi)))
        bath = DiscreteBath(
            mode_detunings=detunings,
            couplings=couplings,
            delta_c=delta_c,
            window=window,
            recurrence_time=2.0 * math.pi / spacing,
            model_kind=model.kind,
        )
    elif isinstance(model, (IsotropicEffMass, AnisotropicEffMass)):
        edges = window * (np.arange(n_modes + 1) / n_modes) ** 2
        centers = window * ((np.arange(n_modes) + 0.5) / n_modes) ** 2
        weight = np.diff(_cell_antiderivative(model, edges))
        shift = 0.0
        if isinstance(model, AnisotropicEffMass) and model.renormalize:
            shift = model.lamb_shift
        bath = DiscreteBath(
            mode_detunings=centers - delta_c,
            couplings=np.sqrt(weight),
            delta_c=delta_c,
            tail=tail_shift(model, window),
            frequency_shift=shift,
            window=window,
            recurrence_time=math.pi * n_modes / (2.0 * math.sqrt(window * RECURRENCE_REFERENCE)),
            model_kind=model.kind,
        )
    else:
        raise DomainError(f"No discrete bath is defined for the {model.kind} model")

    if calibrate:
        calibration(bath, model)
    return bath


def bath_laplace(bath: DiscreteBath, s: complex) -> complex:
    """Laplace transform of the discrete kernel with the tail, seen from the dressed transition."""
    g2 = bath.couplings ** 2
    return complex(np.sum(g2 / (s + 1j * bath.mode_detunings)) - 1j * bath.tail + 1j * bath.frequency_shift)


def reference_laplace(bath: DiscreteBath, model: BandEdgeModel, s: complex) -> complex:
    """Continuum transform the bath should reproduce.

    Free space is compared with the flat band cut at the window edges; the
    band-edge models carry their omitted modes in the tail shift and are
    compared with the full kernel transform.
    """
    if isinstance(model, FreeSpace):
        half = 0.5 * bath.window
        return complex(
            model.gamma / (2.0 * math.pi) * -1j * (np.log(s + 1j * half) - np.log(s - 1j * half))
        )
    return kernel_laplace(model, bath.delta_c, s)


def calibration(bath: DiscreteBath, model: BandEdgeModel, s_offset: float = 1.0) -> float:
    """Relative mismatch of the Laplace transforms at s = s_offset + i delta_c."""
    s = complex(s_offset, bath.delta_c)
    exact = reference_laplace(bath, model, s)
    approx = bath_laplace(bath, s)
    mismatch = abs(approx - exact) / abs(exact)
    if mismatch > CALIBRATION_TOLERANCE:
        raise CalibrationError(
            f"Discrete bath ({bath.n_modes} modes, window {bath.window}) misses the kernel transform "
            f"at s={s}: relative error {mismatch:.2e} > {CALIBRATION_TOLERANCE}; enlarge the window or add modes"
        )
    logger.debug(f"bath calibration: relative Laplace mismatch {mismatch:.2e}")
    return mismatch


def isotropic_tail_kernel(window: float, lags) -> np.ndarray:
    """(1/pi) int_W^inf nu^{-1/2} exp(-i nu lag) dnu = erfc(sqrt(i W lag)) / sqrt(i pi lag)."""
    lags = np.asarray(lags, dtype=float)
    z = np.sqrt(1j * window * lags)
    return np.exp(-1j * window * lags) * wofz(1j * z) / np.sqrt(1j * math.pi * lags)


def kernel_reconstruction(bath: DiscreteBath, lags, include_tail: bool = False) -> np.ndarray:
    """sum_l g_l^2 exp(-i Delta_l lag), optionally plus the analytic isotropic tail beyond the window."""
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    values = np.exp(-1j * np.outer(lags, bath.mode_detunings)) @ (bath.couplings ** 2)
    if include_tail:
        if bath.model_kind != "isotropic":
            raise DomainError("The analytic tail is available for the isotropic bath only")
        values = values + np.exp(1j * bath.delta_c * lags) * isotropic_tail_kernel(bath.window, lags)
    return values


def _rhs_factory(bath: DiscreteBath, case: str):
    g = bath.couplings
    detune = bath.mode_detunings
    shift = -1j * bath.tail
    rotation = -1j * bath.frequency_shift

    if case == "lowexc":
        def rhs(_t, y):
            b, a = y[0], y[1:]
            out = np.empty_like(y)
            out[0] = -1j * np.dot(g, a) - shift * b + rotation * b
            out[1:] = -1j * detune * a - 1j * g * b
            return out
    elif case == "gain":
        def rhs(_t, y):
            d, c = y[0], y[1:]
            out = np.empty_like(y)
            out[0] = 1j * np.dot(g, c) + shift * d + rotation * d
            out[1:] = -1j * detune * c - 1j * g * d
            return out
    else:
        def rhs(_t, y):
            j3, p, a = y[0].real, y[1], y[2:]
            field = 1j * np.dot(g, a) + shift * p
            out = np.empty_like(y)
            out[0] = -4.0 * (np.conj(p) * field).real
            out[1] = j3 * field + rotation * p
            out[2:] = -1j * detune * a - 1j * g * p
            return out
    return rhs


def oracle_evolve(
    bath: DiscreteBath,
    grid: Grid,
    case: str = "lowexc",
    init: Optional[CollectiveState] = None,
) -> TimeSeries:
    """Integrate the atom-mode equations on the grid, stopping at the recurrence time.

    meanfield: j3 and j12 of the factorized equations from `init`.
    lowexc / gain: j12 holds the atomic amplitude (b or D, starting at 1)
    and j3 its squared modulus; metadata["mode_population"] is sum |a_l|^2.
    """
    if case not in CASES:
        raise DomainError(f"case must be one of {CASES}, got {case!r}")
    if case == "meanfield" and init is None:
        raise DomainError("The meanfield case needs an initial CollectiveState")

    tau = grid.tau
    keep = tau <= bath.recurrence_time
    truncated = not bool(keep.all())
    if truncated:
        logger.warning(
            f"Oracle run truncated at the bath recurrence time {bath.recurrence_time:.2f} "
            f"(requested tau_max {grid.tau_max}); add modes to extend it"
        )
    tau = tau[keep]

    y0 = np.zeros(bath.n_modes + (2 if case == "meanfield" else 1), dtype=complex)
    if case == "meanfield":
        y0[0], y0[1] = init.j3, init.j12
    else:
        y0[0] = 1.0

    solution = solve_ivp(
        _rhs_factory(bath, case),
        (0.0, float(tau[-1])),
        y0,
        method="DOP853",
        t_eval=tau,
        rtol=RTOL,
        atol=ATOL,
    )
    if not solution.success:
        raise NumericError(f"Oracle integration failed: {solution.message}")

    y = solution.y
    meta = {
        "case": case,
        "model": bath.model_kind,
        "n_modes": bath.n_modes,
        "window": bath.window,
        "recurrence_time": bath.recurrence_time,
        "truncated": truncated,
    }
    if case == "meanfield":
        meta["mode_population"] = np.sum(np.abs(y[2:]) ** 2, axis=0)
        return TimeSeries(tau=solution.t, j3=y[0].real, j12=y[1], metadata=meta)
    meta["mode_population"] = np.sum(np.abs(y[1:]) ** 2, axis=0)
    return TimeSeries(tau=solution.t, j3=np.abs(y[0]) ** 2, j12=y[0], metadata=meta)


def compare_with(reference: np.ndarray, oracle: TimeSeries, tau: np.ndarray) -> Tuple[float, np.ndarray]:
    """Max absolute deviation between a reference sampled on `tau` and the oracle's j3 (truncated grids allowed)."""
    n = len(oracle.tau)
    if not np.allclose(tau[:n], oracle.tau):
        raise DomainError("Reference and oracle grids differ")
    deviation = np.abs(np.asarray(reference)[:n] - oracle.j3)
    return float(deviation.max()), deviation
