"""Scenario files: INI sections validated by pydantic models.

A scenario is read with `configparser`, overlaid with `section.key=value`
overrides from the command line, and validated section by section.
Unknown sections and keys are rejected; every error names the file line
it came from.
"""

from __future__ import annotations

import configparser
import re
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

COMMANDS = (
    "kernel",
    "osc",
    "spectrum",
    "meanfield",
    "transparent",
    "ensemble",
    "noise",
    "stochastic",
    "oracle-compare",
)


def _split_list(value: Any) -> Any:
    """Comma-separated INI values become lists."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    if isinstance(value, (int, float)):
        return [value]
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RunSection(_Section):
    command: Literal[COMMANDS]
    seed: int = 0
    workers: Optional[int] = Field(default=None, ge=1)
    convergence_check: bool = False
    title: str = ""


class ModelSection(_Section):
    kind: Literal["free_space", "isotropic", "anisotropic", "isotropic_full"] = "isotropic"
    gamma: Optional[float] = Field(default=None, gt=0)
    beta1: Optional[float] = Field(default=None, gt=0)
    beta3: Optional[float] = Field(default=None, gt=0)
    omega_c: Optional[float] = Field(default=None, gt=0)
    renormalize: Optional[bool] = None
    k0: Optional[float] = Field(default=None, gt=0)
    gamma_k: Optional[float] = Field(default=None, gt=0)
    cutoff: Optional[float] = Field(default=None, gt=0)
    branches: Optional[Literal["both", "upper"]] = None


class GridSection(_Section):
    tau_max: float = Field(default=20.0, gt=0)
    dtau: Optional[float] = Field(default=None, gt=0)


class DetuningSection(_Section):
    values: List[float] = Field(default_factory=lambda: [0.0])

    @field_validator("values", mode="before")
    @classmethod
    def split_values(cls, value: Any) -> Any:
        return _split_list(value)


class InitSection(_Section):
    r: float = Field(default=1e-5, gt=0, lt=1)
    phase0: float = Field(default=0.0, ge=0)


class DephasingSection(_Section):
    sigma: float = Field(default=0.0, ge=0)
    n_runs: int = Field(default=1, ge=1)


class OscSection(_Section):
    q0: List[float] = Field(default_factory=lambda: [2.0, 0.0, 1.0])

    @field_validator("q0", mode="before")
    @classmethod
    def split_q0(cls, value: Any) -> Any:
        return _split_list(value)


class SpectrumSection(_Section):
    omega_min: float = 0.0
    omega_max: float = 10.0
    points: int = Field(default=2001, ge=2)


class KernelSection(_Section):
    lags: List[float] = Field(default_factory=lambda: [0.1, 0.5, 1.0, 2.0, 5.0])

    @field_validator("lags", mode="before")
    @classmethod
    def split_lags(cls, value: Any) -> Any:
        return _split_list(value)


class TransparentSection(_Section):
    lo: float = -1.0
    hi: float = -0.3
    tau_max: float = Field(default=80.0, gt=0)
    window: float = Field(default=20.0, gt=0)
    dtau: float = Field(default=0.01, gt=0)


class EnsembleSection(_Section):
    n_atoms: int = Field(default=100, ge=2)
    n_realizations: int = Field(default=2000, ge=1)
    t0_policy: List[Literal["at_zero", "at_crossover"]] = Field(default_factory=lambda: ["at_crossover"])
    amplitude_law: Literal["rayleigh", "half_gaussian"] = "rayleigh"
    snapshots: List[float] = Field(default_factory=list)
    bins: int = Field(default=50, ge=1)
    chunk_size: Optional[int] = Field(default=None, ge=1)

    @field_validator("t0_policy", "snapshots", mode="before")
    @classmethod
    def split_lists(cls, value: Any) -> Any:
        return _split_list(value)


class NoiseSection(_Section):
    alpha: int = 1
    n_terms: int = Field(default=1000, ge=1)
    omega_max: float = Field(default=628.3185307179586, gt=0)
    n_paths: int = Field(default=2000, ge=1)
    weighting: Literal["cell", "point"] = "cell"
    lags: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.5, 1.0, 2.0, 5.0])
    regularization: float = Field(default=0.05, gt=0)
    n_atoms: List[int] = Field(default_factory=lambda: [1000])

    @field_validator("lags", "n_atoms", mode="before")
    @classmethod
    def split_lists(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("alpha")
    @classmethod
    def known_alpha(cls, value: int) -> int:
        if value not in (1, 3):
            raise ValueError("alpha must be 1 or 3")
        return value


class OracleSection(_Section):
    case: Literal["lowexc", "meanfield", "gain"] = "lowexc"
    n_modes: int = Field(default=2000, ge=100)
    window: Optional[float] = Field(default=None, gt=0)


class ScenarioConfig(_Section):
    run: RunSection
    model: ModelSection = ModelSection()
    grid: GridSection = GridSection()
    detuning: DetuningSection = DetuningSection()
    init: InitSection = InitSection()
    dephasing: DephasingSection = DephasingSection()
    osc: OscSection = OscSection()
    spectrum: SpectrumSection = SpectrumSection()
    kernel: KernelSection = KernelSection()
    transparent: TransparentSection = TransparentSection()
    ensemble: EnsembleSection = EnsembleSection()
    noise: NoiseSection = NoiseSection()
    oracle: OracleSection = OracleSection()

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]\s*$")
_KEY_RE = re.compile(r"^\s*([A-Za-z0-9_]+)\s*[=:]")


def _line_map(text: str) -> Dict[Tuple[str, str], int]:
    lines: Dict[Tuple[str, str], int] = {}
    section = ""
    for number, line in enumerate(text.splitlines(), start=1):
        match = _SECTION_RE.match(line)
        if match:
            section = match.group(1).strip()
            lines[(section, "")] = number
            continue
        match = _KEY_RE.match(line)
        if match and section:
            lines[(section, match.group(1))] = number
    return lines


def parse_override(item: str) -> Tuple[str, str, str]:
    """Split 'section.key=value'."""
    if "=" not in item or "." not in item.split("=", 1)[0]:
        raise ConfigError(f"Override {item!r} must look like section.key=value")
    target, value = item.split("=", 1)
    section, key = target.strip().split(".", 1)
    return section.strip(), key.strip(), value.strip()


def _format_errors(error: ValidationError, source: str, lines: Dict[Tuple[str, str], int]) -> str:
    parts = []
    for item in error.errors():
        loc = [str(x) for x in item["loc"]]
        section = loc[0] if loc else ""
        key = loc[1] if len(loc) > 1 else ""
        line = lines.get((section, key)) or lines.get((section, ""))
        where = f"{source}:{line}" if line else source
        field = ".".join(loc) if loc else "<root>"
        parts.append(f"{where}: {field}: {item['msg']}")
    return "; ".join(parts)


def parse_scenario(
    text: str,
    source: str = "<scenario>",
    overrides: Sequence[str] = (),
) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: malformed scenario file: {e}") from e

    raw: Dict[str, Dict[str, str]] = {name: dict(parser.items(name)) for name in parser.sections()}
    for item in overrides:
        section, key, value = parse_override(item)
        raw.setdefault(section, {})[key] = value

    lines = _line_map(text)
    known = set(ScenarioConfig.model_fields)
    unknown = [name for name in raw if name not in known]
    if unknown:
        where = ", ".join(f"{source}:{lines.get((name, ''), '?')} [{name}]" for name in unknown)
        raise ConfigError(f"Unknown scenario section(s): {where}")
    if "run" not in raw:
        raise ConfigError(f"{source}: scenario needs a [run] section with a command")

    try:
        return ScenarioConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(_format_errors(e, source, lines)) from e


def load_scenario(path: str, overrides: Sequence[str] = ()) -> ScenarioConfig:
    file = Path(path)
    if not file.exists():
        raise ConfigError(f"Scenario file '{path}' not found")
    return parse_scenario(file.read_text(encoding="utf-8"), source=str(file), overrides=overrides)


def scenario_for(command: str, overrides: Sequence[str] = ()) -> ScenarioConfig:
    """Defaults-only scenario for a command, used when no file is given."""
    return parse_scenario(f"[run]\ncommand = {command}\n", source="<flags>", overrides=overrides)
