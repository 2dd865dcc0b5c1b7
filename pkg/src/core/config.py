"""Centralized environment configuration for simulation runs.

This module consolidates environment-driven settings such as the output
directory, worker count, batch (chunk) size, logging level and the API
bind address.

Other modules should import Settings via `get_settings()` and avoid
reading environment variables directly.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional

from dotenv import load_dotenv


# Load env once at import (idempotent if already loaded elsewhere)
load_dotenv()


@dataclass(frozen=True)
class Settings:
    # Output
    output_dir: str = "runs"

    # Parallelism; chunk size is part of the run definition, workers are not
    workers: int = 1
    chunk_size: int = 128

    # Numerics
    default_dtau: float = 0.01

    # Logging
    log_level: str = "INFO"

    # API
    api_host: str = "0.0.0.0"
    api_port: int = 8000


_cached_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Return cached settings (loaded from environment) to be used across modules."""
    global _cached_settings
    if _cached_settings is not None:
        return _cached_settings

    _cached_settings = Settings(
        output_dir=os.getenv("BANDEDGE_OUTPUT_DIR", "runs"),
        workers=int(os.getenv("BANDEDGE_WORKERS", "1")),
        chunk_size=int(os.getenv("BANDEDGE_CHUNK_SIZE", "128")),
        default_dtau=float(os.getenv("BANDEDGE_DEFAULT_DTAU", "0.01")),
        log_level=os.getenv("BANDEDGE_LOG_LEVEL", "INFO").upper(),
        api_host=os.getenv("API_HOST", "0.0.0.0"),
        api_port=int(os.getenv("API_PORT", "8000")),
    )
    return _cached_settings


def reset_settings() -> None:
    """Drop the cached settings so the next call re-reads the environment."""
    global _cached_settings
    _cached_settings = None


def configure_logging(level: Optional[str] = None) -> None:
    """Configure root logging once for CLI/API entry points."""
    name = (level or get_settings().log_level).upper()
    logging.basicConfig(
        level=getattr(logging, name, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
