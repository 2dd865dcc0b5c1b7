"""Run artifacts: self-describing CSV tables, JSON summaries and the run manifest.

CSV files carry `#` header rows (title, columns, units, time-unit note)
followed by `%.12e` data, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src import __version__

logger = logging.getLogger(__name__)

TIME_UNIT_NOTE = (
    "tau is dimensionless collective time: 1/(N^(2/3) beta1) isotropic, "
    "1/(N^2 beta3) anisotropic, 1/(N gamma) free space"
)
FLOAT_FORMAT = "%.12e"


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    return value


def write_csv(
    path: Path,
    columns: Dict[str, np.ndarray],
    title: str,
    units: Optional[Dict[str, str]] = None,
) -> Path:
    """Write equal-length real columns; complex columns must be split by the caller."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[name], dtype=float) for name in names])
    units = units or {}
    header = "\n".join(
        [
            title,
            "columns: " + ",".join(names),
            "units: " + ",".join(units.get(name, "dimensionless") for name in names),
            TIME_UNIT_NOTE,
        ]
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=header, comments="# ")
    logger.debug(f"Wrote {path} ({data.shape[0]} rows)")
    return path


def write_json(path: Path, payload: Dict[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Provenance for one run; written last so it can checksum everything else."""

    command: str
    config: Dict[str, Any]
    seeds: Dict[str, Any]
    started: float = field(default_factory=time.time)
    files: List[Path] = field(default_factory=list)

    def add(self, path: Path) -> Path:
        self.files.append(path)
        return path

    def write(self, out_dir: Path) -> Path:
        payload = {
            "command": self.command,
            "version": __version__,
            "config": self.config,
            "seeds": self.seeds,
            "wall_clock_seconds": round(time.time() - self.started, 3),
            "checksums": {p.name: sha256_of(p) for p in sorted(self.files)},
        }
        return write_json(out_dir / "manifest.json", payload)


def split_complex(name: str, values: Sequence[complex]) -> Dict[str, np.ndarray]:
    values = np.asarray(values, dtype=complex)
    return {f"{name}_re": values.real, f"{name}_im": values.imag}
