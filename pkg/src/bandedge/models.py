"""Band-edge reservoir models and the containers shared across modules.

All quantities are in collective dimensionless units: time is measured in
1/(N^{2/3} beta1) for the isotropic edge, 1/(N^2 beta3) for the anisotropic
edge and 1/(N gamma) in free space. The scale parameters kept on each model
only convert results back to physical time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Union

import numpy as np

from src.core.errors import DomainError


def _require_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be a finite positive number, got {value!r}")


@dataclass(frozen=True)
class FreeSpace:
    """Markovian reservoir: G(t - t') = (gamma/2) delta(t - t')."""

    gamma: float = 1.0
    kind = "free_space"

    def __post_init__(self) -> None:
        _require_positive("gamma", self.gamma)

    def time_unit(self, n_atoms: int) -> float:
        return 1.0 / (n_atoms * self.gamma)


@dataclass(frozen=True)
class IsotropicEffMass:
    """Isotropic band edge in the effective-mass approximation."""

    beta1: float = 1.0
    kind = "isotropic"

    def __post_init__(self) -> None:
        _require_positive("beta1", self.beta1)

    def time_unit(self, n_atoms: int) -> float:
        return 1.0 / (n_atoms ** (2.0 / 3.0) * self.beta1)


@dataclass(frozen=True)
class AnisotropicEffMass:
    """Anisotropic (three-dimensional) band edge.

    `omega_c` is the band-edge frequency expressed in collective units; it
    controls the short-time crossover of the kernel. With `renormalize` set,
    the bulk Lamb shift 2*sqrt(pi*omega_c) is absorbed into the transition
    frequency so that detunings are measured from the resonance dressed by
    a single excitation. The shift is a constant frequency offset, so an
    inverted sample sees its collective level pushed 2*lamb_shift into the
    continuum.
    """

    beta3: float = 1.0
    omega_c: float = 50.0
    renormalize: bool = True
    kind = "anisotropic"

    def __post_init__(self) -> None:
        _require_positive("beta3", self.beta3)
        _require_positive("omega_c", self.omega_c)

    def time_unit(self, n_atoms: int) -> float:
        return 1.0 / (n_atoms ** 2 * self.beta3)

    @property
    def lamb_shift(self) -> float:
        return 2.0 * math.sqrt(math.pi * self.omega_c)


@dataclass(frozen=True)
class IsotropicFull:
    """Two-band isotropic dispersion
    w_k = sqrt(k0^2 + g^2) + sgn(k - k0) sqrt((k - k0)^2 + g^2), with c = 1.

    The coupling prefactor is fixed so that the upper-edge effective-mass
    limit reproduces the isotropic kernel in collective units.
    """

    k0: float = 100.0
    gamma_k: float = 10.0
    cutoff: Optional[float] = None
    branches: str = "both"
    kind = "isotropic_full"

    def __post_init__(self) -> None:
        _require_positive("k0", self.k0)
        _require_positive("gamma_k", self.gamma_k)
        if self.cutoff is not None:
            _require_positive("cutoff", self.cutoff)
            if self.cutoff <= self.k0:
                raise DomainError(f"cutoff must exceed k0 ({self.k0}), got {self.cutoff}")
        if self.branches not in ("both", "upper"):
            raise DomainError(f"branches must be 'both' or 'upper', got {self.branches!r}")

    @property
    def cutoff_k(self) -> float:
        return self.cutoff if self.cutoff is not None else 20.0 * self.k0

    @property
    def midgap(self) -> float:
        return math.sqrt(self.k0 ** 2 + self.gamma_k ** 2)

    @property
    def gap_width(self) -> float:
        return 2.0 * self.gamma_k

    @property
    def upper_edge(self) -> float:
        return self.midgap + self.gamma_k

    @property
    def curvature(self) -> float:
        # w - w_c ~ A (k - k0)^2 near the upper edge
        return 1.0 / (2.0 * self.gamma_k)

    @property
    def coupling(self) -> float:
        return 2.0 * math.sqrt(self.curvature) * self.upper_edge / (math.pi * self.k0 ** 2)

    def time_unit(self, n_atoms: int) -> float:
        return 1.0 / n_atoms ** (2.0 / 3.0)


BandEdgeModel = Union[FreeSpace, IsotropicEffMass, AnisotropicEffMass, IsotropicFull]

MODEL_KINDS = ("free_space", "isotropic", "anisotropic", "isotropic_full")


def build_model(kind: str, **params: Any) -> BandEdgeModel:
    """Instantiate a model from its scenario name, ignoring unset parameters."""
    params = {k: v for k, v in params.items() if v is not None}
    if kind == "free_space":
        return FreeSpace(**{k: v for k, v in params.items() if k in ("gamma",)})
    if kind == "isotropic":
        return IsotropicEffMass(**{k: v for k, v in params.items() if k in ("beta1",)})
    if kind == "anisotropic":
        keys = ("beta3", "omega_c", "renormalize")
        return AnisotropicEffMass(**{k: v for k, v in params.items() if k in keys})
    if kind == "isotropic_full":
        keys = ("k0", "gamma_k", "cutoff", "branches")
        return IsotropicFull(**{k: v for k, v in params.items() if k in keys})
    raise DomainError(f"Unknown model kind {kind!r}; expected one of {', '.join(MODEL_KINDS)}")


def check_detuning(delta_c: float) -> float:
    if not math.isfinite(delta_c):
        raise DomainError(f"delta_c must be finite, got {delta_c!r}")
    return float(delta_c)


@dataclass(frozen=True)
class Grid:
    tau_max: float
    dtau: float

    def __post_init__(self) -> None:
        _require_positive("tau_max", self.tau_max)
        _require_positive("dtau", self.dtau)
        if self.dtau > self.tau_max:
            raise DomainError(f"dtau ({self.dtau}) exceeds tau_max ({self.tau_max})")

    @property
    def n_steps(self) -> int:
        return int(round(self.tau_max / self.dtau))

    @property
    def tau(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dtau

    def halved(self) -> "Grid":
        return Grid(tau_max=self.tau_max, dtau=self.dtau / 2.0)


@dataclass(frozen=True)
class CollectiveState:
    """Per-atom inversion j3 = <J3>/N and polarization j12 = <J12>/N."""

    j3: float
    j12: complex

    def __post_init__(self) -> None:
        if not (-1.0 - 1e-12 <= self.j3 <= 1.0 + 1e-12):
            raise DomainError(f"j3 must lie in [-1, 1], got {self.j3}")
        if abs(self.j12) > 0.5 + 1e-12:
            raise DomainError(f"|j12| must not exceed 1/2, got {abs(self.j12)}")


@dataclass(frozen=True)
class InitialStateSpec:
    """Product state with ground-state admixture r and polarization phase phase0."""

    r: float
    phase0: float = 0.0

    def __post_init__(self) -> None:
        if not (0.0 < self.r < 1.0):
            raise DomainError(
                f"r must lie strictly inside (0, 1), got {self.r}; "
                "zero polarization never evolves in mean field, use the quantum ensemble instead"
            )
        if not (0.0 <= self.phase0 < 2.0 * math.pi):
            raise DomainError(f"phase0 must lie in [0, 2pi), got {self.phase0}")

    def state(self) -> CollectiveState:
        amp = math.sqrt(self.r * (1.0 - self.r))
        return CollectiveState(j3=1.0 - 2.0 * self.r, j12=amp * complex(math.cos(self.phase0), math.sin(self.phase0)))


@dataclass(frozen=True)
class DephasingSpec:
    """Gaussian Stark shift redrawn once per time step."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma >= 0.0):
            raise DomainError(f"sigma must be finite and non-negative, got {self.sigma}")


@dataclass
class TimeSeries:
    tau: np.ndarray
    j3: np.ndarray
    j12: np.ndarray
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.tau.ndim != 1 or len(self.tau) != len(self.j3) or len(self.tau) != len(self.j12):
            raise DomainError("TimeSeries arrays must be one-dimensional and of equal length")

    @property
    def polarization_modulus(self) -> np.ndarray:
        return np.abs(self.j12)

    def state_at(self, index: int) -> CollectiveState:
        return CollectiveState(j3=float(self.j3[index]), j12=complex(self.j12[index]))
