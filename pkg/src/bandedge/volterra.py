"""Product-integration weights and time steppers for the memory-kernel equations.

The kernel is written G(u) = exp(i delta_c u) g(u). The smooth factor
exp(-i phi(tau)) p(tau) is interpolated linearly between grid points and
integrated exactly against the singular part g(u), so the inverse
square-root singularity at u = 0 costs no order of accuracy.

For a lag cell u in [(m-1)h, mh] with moments M0 = int g and M1 = int u g,
the node nearer to the current time receives (mh M0 - M1)/h and the
farther node (M1 - (m-1)h M0)/h.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.core.errors import DomainError, IntegratorInstabilityError, StepSizeError
from .kernel import C_ISO, SQRT_PI, _e_term
from .models import AnisotropicEffMass, BandEdgeModel, FreeSpace, IsotropicEffMass

logger = logging.getLogger(__name__)

BLOCH_TOLERANCE = 1e-6
MAX_ROTATION = math.pi / 4.0

_EXP_I_PI_4 = C_ISO.conjugate()


@dataclass
class KernelWeights:
    """near[m], far[m] for lag cell m = 1..n (index 0 unused) and a contact term.

    The contact coefficient multiplies the current amplitude directly
    (delta-function part of the kernel). `frequency_shift` is a constant
    offset of the transition frequency: the steppers run the bare kernel at
    delta_c + frequency_shift and rotate the result back to the dressed frame.
    """

    near: np.ndarray
    far: np.ndarray
    contact: complex
    dtau: float
    frequency_shift: float = 0.0

    @property
    def n_steps(self) -> int:
        return len(self.near) - 1

    @property
    def history(self) -> np.ndarray:
        """Combined coefficient of the node at lag m (1 <= m < n) away from the current node."""
        out = np.zeros_like(self.near)
        out[1:-1] = self.far[1:-1] + self.near[2:]
        return out


def _isotropic_moments(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    sa, sb = np.sqrt(a), np.sqrt(b)
    h = b - a
    m0 = 2.0 * h / (sa + sb)
    m1 = (2.0 / 3.0) * h * (a + sa * sb + b) / (sa + sb)
    pref = C_ISO / SQRT_PI
    return pref * m0, pref * m1


def _aniso_q(y: np.ndarray) -> np.ndarray:
    return -1j * (0.5 * math.pi - _e_term(y))


def _aniso_s(y: np.ndarray) -> np.ndarray:
    # y Q(y) - int_0^y Q, with the linear terms cancelled analytically
    return (1j * y - 1.0) * _e_term(y) + 0.5 * math.pi - SQRT_PI * _EXP_I_PI_4 * np.sqrt(y)


def _anisotropic_moments(model: AnisotropicEffMass, a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    w = model.omega_c
    pref = 4.0 / SQRT_PI
    qa, qb = _aniso_q(w * a), _aniso_q(w * b)
    sa, sb = _aniso_s(w * a), _aniso_s(w * b)
    m0 = pref * math.sqrt(w) * (qb - qa)
    m1 = pref / math.sqrt(w) * (sb - sa)
    return m0, m1


def product_weights(model: BandEdgeModel, n_steps: int, dtau: float) -> KernelWeights:
    """Weights for the memory integral on a uniform grid of n_steps cells."""
    if n_steps < 1:
        raise DomainError(f"n_steps must be at least 1, got {n_steps}")
    near = np.zeros(n_steps + 1, dtype=complex)
    far = np.zeros(n_steps + 1, dtype=complex)

    if isinstance(model, FreeSpace):
        return KernelWeights(near=near, far=far, contact=complex(0.5 * model.gamma), dtau=dtau)

    m = np.arange(1, n_steps + 1, dtype=float)
    a, b = (m - 1.0) * dtau, m * dtau
    shift = 0.0
    if isinstance(model, IsotropicEffMass):
        m0, m1 = _isotropic_moments(a, b)
    elif isinstance(model, AnisotropicEffMass):
        m0, m1 = _anisotropic_moments(model, a, b)
        if model.renormalize:
            # bare transition sits the Lamb shift above the dressed one
            shift = model.lamb_shift
    else:
        raise DomainError(
            f"Memory-kernel time stepping supports free_space, isotropic and anisotropic models, not {model.kind}"
        )
    near[1:] = (b * m0 - m1) / dtau
    far[1:] = (m1 - a * m0) / dtau
    return KernelWeights(near=near, far=far, contact=0j, dtau=dtau, frequency_shift=shift)


def history_sum(weights: KernelWeights, frame: np.ndarray, n: int) -> np.ndarray:
    """Memory integral at step n excluding the current node, for every row of `frame`."""
    if n == 0:
        return np.zeros(frame.shape[:-1], dtype=complex)
    hist = weights.far[n] * frame[..., 0]
    if n > 1:
        hist = hist + frame[..., 1:n] @ weights.history[n - 1:0:-1]
    return hist


def convolve_history(weights: KernelWeights, frame: np.ndarray) -> np.ndarray:
    """Memory integral sum_k w_{n-k} y_k at every node n of a known trajectory y."""
    n = len(frame) - 1
    lagged = weights.history.copy()
    lagged[0] = weights.near[1] if n >= 1 else 0.0
    if n >= 1:
        lagged[n] = weights.far[n]
    full = np.convolve(frame, lagged)[: n + 1]
    # the oldest node carries far[n], not far[n] + near[n + 1]
    correction = np.zeros(n + 1, dtype=complex)
    correction[1:n] = (weights.history[1:n] - weights.far[1:n]) * frame[0]
    correction[0] = lagged[0] * frame[0]
    return full - correction + weights.contact * frame


def solve_linear(weights: KernelWeights, delta_c: float, sign: float) -> np.ndarray:
    """Solve dA/dtau = sign * int_0^tau G(tau - t) A(t) dt with A(0) = 1.

    sign = -1 gives the decaying amplitude B, sign = +1 the growing amplitude D.
    A frequency shift on the weights adds -i shift A to the right-hand side
    whatever the sign. Trapezoidal in time, product integration in the
    memory; the current node enters implicitly and is solved for exactly.
    """
    h = weights.dtau
    n_steps = weights.n_steps
    bare = delta_c + weights.frequency_shift
    y = np.zeros(n_steps + 1, dtype=complex)
    y[0] = 1.0
    drift_prev = sign * weights.contact * y[0] - 1j * bare * y[0]
    diag = weights.near[1] + weights.contact
    for n in range(1, n_steps + 1):
        hist = history_sum(weights, y, n)
        rhs = y[n - 1] + 0.5 * h * (drift_prev + sign * hist)
        y[n] = rhs / (1.0 - 0.5 * h * (-1j * bare + sign * diag))
        drift_prev = -1j * bare * y[n] + sign * (hist + diag * y[n])
    tau = np.arange(n_steps + 1) * h
    return np.exp(1j * delta_c * tau) * y


def _rotate(j3: np.ndarray, p: np.ndarray, omega: np.ndarray, h: float) -> Tuple[np.ndarray, np.ndarray]:
    """Exact flow of dp = j3 Omega, dj3 = -4 Re(p* Omega) for Omega frozen over one step.

    The motion is a rotation of (j3, component of 2p along Omega) by 2|Omega|h,
    so j3^2 + 4|p|^2 is preserved to roundoff.
    """
    mag = np.abs(omega)
    theta = 2.0 * mag * h
    if not np.all(np.isfinite(theta)):
        raise IntegratorInstabilityError("Non-finite field encountered during mean-field step")
    if np.any(theta > MAX_ROTATION):
        raise StepSizeError(
            f"Step rotates the Bloch vector by {theta.max():.3f} rad (> pi/4); reduce dtau below {h}"
        )
    unit = np.where(mag > 0.0, omega / np.where(mag > 0.0, mag, 1.0), 1.0)
    rotated = 2.0 * p * np.conj(unit)
    along, across = rotated.real, rotated.imag
    c, s = np.cos(theta), np.sin(theta)
    j3_new = j3 * c - along * s
    along_new = along * c + j3 * s
    return j3_new, 0.5 * (along_new + 1j * across) * unit


def _check_bloch(j3: np.ndarray, p: np.ndarray, n: int, h: float) -> None:
    if not (np.all(np.isfinite(j3)) and np.all(np.isfinite(p))):
        raise IntegratorInstabilityError(f"Non-finite state at tau={n * h:.4f}")
    if np.any(np.abs(j3) > 1.0 + BLOCH_TOLERANCE) or np.any(np.abs(p) > 0.5 + BLOCH_TOLERANCE):
        raise IntegratorInstabilityError(
            f"Bloch bounds violated at tau={n * h:.4f}: max|j3|={np.abs(j3).max():.8f}, "
            f"max|j12|={np.abs(p).max():.8f}"
        )
    norm = j3 ** 2 + 4.0 * np.abs(p) ** 2
    if np.any(norm > 1.0 + BLOCH_TOLERANCE):
        raise IntegratorInstabilityError(f"Bloch norm {norm.max():.8f} exceeds 1 at tau={n * h:.4f}")


def integrate_collective(
    weights: KernelWeights,
    delta_c: float,
    j3_0: np.ndarray,
    p_0: np.ndarray,
    *,
    stark_shifts: Optional[np.ndarray] = None,
    drive: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Evolve a batch of mean-field trajectories.

    dp/dtau = j3 Omega, dj3/dtau = -4 Re(p* Omega), Omega = K + exp(i phi) drive,
    with K the memory integral and phi the accumulated detuning phase
    (delta_c plus the per-step Stark shift). A frequency shift on the weights
    is carried in phi as well and removed from p on return. Two-pass predictor-corrector:
    predict with Omega from the previous node, correct with the average of
    the previous and predicted Omega.

    Shapes: j3_0, p_0 (batch,); stark_shifts (batch, n_steps); drive
    (batch, n_steps + 1). Returns j3 and p arrays of shape (batch, n_steps + 1).
    """
    h = weights.dtau
    n_steps = weights.n_steps
    j3_0 = np.atleast_1d(np.asarray(j3_0, dtype=float))
    p_0 = np.atleast_1d(np.asarray(p_0, dtype=complex))
    batch = len(j3_0)

    j3 = np.empty((batch, n_steps + 1))
    p = np.empty((batch, n_steps + 1), dtype=complex)
    frame = np.zeros((batch, n_steps + 1), dtype=complex)
    j3[:, 0], p[:, 0], frame[:, 0] = j3_0, p_0, p_0
    _check_bloch(j3_0, p_0, 0, h)

    bare = delta_c + weights.frequency_shift
    phi = np.zeros(batch)
    near1 = weights.near[1]
    contact = weights.contact

    def field(n: int, k_value: np.ndarray, phase: np.ndarray) -> np.ndarray:
        if drive is None:
            return k_value
        return k_value + np.exp(1j * phase) * drive[:, n]

    omega_prev = field(0, contact * p_0, phi)
    for n in range(1, n_steps + 1):
        step_shift = bare if stark_shifts is None else bare + stark_shifts[:, n - 1]
        phi_new = phi + h * step_shift
        rot = np.exp(1j * phi_new)
        hist = history_sum(weights, frame, n)

        j3_pred, p_pred = _rotate(j3[:, n - 1], p[:, n - 1], omega_prev, h)
        k_pred = rot * hist + near1 * p_pred + contact * p_pred
        omega_mid = 0.5 * (omega_prev + field(n, k_pred, phi_new))

        j3[:, n], p[:, n] = _rotate(j3[:, n - 1], p[:, n - 1], omega_mid, h)
        frame[:, n] = np.conj(rot) * p[:, n]
        k_now = rot * hist + (near1 + contact) * p[:, n]
        omega_prev = field(n, k_now, phi_new)
        phi = phi_new
        _check_bloch(j3[:, n], p[:, n], n, h)

    if weights.frequency_shift:
        p = p * np.exp(-1j * weights.frequency_shift * h * np.arange(n_steps + 1))[None, :]
    return j3, p
