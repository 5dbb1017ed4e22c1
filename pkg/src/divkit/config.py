"""Numeric constants, environment getters and the optional YAML defaults file."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import structlog
import yaml

from . import ParseError

# same logger as core.logger; core imports this module
logger = structlog.get_logger("divkit")

# Distribution validation
INPUT_SUM_TOLERANCE = 1e-9
OUTPUT_SUM_TOLERANCE = 1e-12

# Removable singularities of the generator families at s = 0 and s = 1
BRANCH_THRESHOLD = 1e-8

# Verification tolerances
DEFAULT_CHAIN_TOLERANCE = 1e-12
DEFAULT_SCAN_TOLERANCE = 1e-9
MONOTONE_SLACK = 1e-9
LIMIT_TOLERANCE = 1e-6
ROUNDING_FACTOR = 64.0

# Grids
DEFAULT_GRID_MIN = 1e-6
DEFAULT_GRID_MAX = 1e6
DEFAULT_GRID_POINTS = 100_000
MONOTONE_GRID_MIN = 1e-5
MONOTONE_GRID_MAX = 1e5
ONE_EXCLUSION = 1e-6
RICHARDSON_OFFSETS: Tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)

# Verification runs
DEFAULT_SAMPLES = 1000
DEFAULT_DIMS = (2, 10)
DEFAULT_SEED = 1
MAX_DIMENSION = 1_000_000
MAX_RECORDED_FAILURES = 25
DEFAULT_SEARCH_BUDGET = 100_000

# Reports
REPORT_SCHEMA_VERSION = 1
DEFAULT_CONFIG_PATH = "divkit.yml"


def get_thread_count() -> int:
    """Worker cap for scans and chain runs.

    Reads DIVKIT_THREADS; falls back to the CPU count when unset or invalid.
    """
    fallback = os.cpu_count() or 1
    raw = os.getenv("DIVKIT_THREADS")
    if not raw:
        return fallback
    try:
        value = int(raw)
    except ValueError:
        logger.warning(f"Invalid DIVKIT_THREADS value: {raw}")
        return fallback
    if value < 1:
        logger.warning(f"DIVKIT_THREADS must be >= 1, got {value}")
        return 1
    return value


def get_log_level() -> str:
    """Get logging level from environment."""
    return os.getenv("LOG_LEVEL", "INFO").upper()


def get_config_path() -> str:
    """Get the YAML defaults file path."""
    return os.getenv("DIVKIT_CONFIG", DEFAULT_CONFIG_PATH)


@dataclass
class ScanDefaults:
    x_min: float = DEFAULT_GRID_MIN
    x_max: float = DEFAULT_GRID_MAX
    points: int = DEFAULT_GRID_POINTS
    spacing: str = "log"

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScanDefaults":
        return cls(
            x_min=float(data.get("x_min", DEFAULT_GRID_MIN)),
            x_max=float(data.get("x_max", DEFAULT_GRID_MAX)),
            points=int(data.get("points", DEFAULT_GRID_POINTS)),
            spacing=str(data.get("spacing", "log")),
        )


@dataclass
class VerifyDefaults:
    samples: int = DEFAULT_SAMPLES
    dims: Tuple[int, int] = DEFAULT_DIMS
    seed: int = DEFAULT_SEED
    tolerance: float = DEFAULT_CHAIN_TOLERANCE
    scan: ScanDefaults = field(default_factory=ScanDefaults)

    @classmethod
    def load(cls, path: Optional[str] = None) -> "VerifyDefaults":
        path_obj = Path(path or get_config_path())
        if not path_obj.exists():
            return cls()
        try:
            with path_obj.open("r", encoding="utf-8") as handle:
                raw = yaml.safe_load(handle) or {}
        except (yaml.YAMLError, UnicodeDecodeError) as exc:
            raise ParseError(f"unreadable defaults file: {exc}", locus=str(path_obj)) from exc
        if not isinstance(raw, dict):
            raise ParseError("expected a mapping at the top level", locus=str(path_obj))
        try:
            verify = raw.get("verify", {}) or {}
            dims = verify.get("dims", list(DEFAULT_DIMS))
            if isinstance(dims, int):
                dims = [dims, dims]
            defaults = cls(
                samples=int(verify.get("samples", DEFAULT_SAMPLES)),
                dims=(int(dims[0]), int(dims[-1])),
                seed=int(verify.get("seed", DEFAULT_SEED)),
                tolerance=float(verify.get("tolerance", DEFAULT_CHAIN_TOLERANCE)),
                scan=ScanDefaults.from_dict(raw.get("scan", {}) or {}),
            )
        except (AttributeError, IndexError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid value: {exc}", locus=str(path_obj)) from exc
        logger.debug("Loaded defaults", path=str(path_obj))
        return defaults
