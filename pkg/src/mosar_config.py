"""
Runtime settings and command-line value parsing for the annealing harness.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

from pydantic import BaseModel, Field

from src.mosar_models import Algorithm, Schedule

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def configure_logging(level: str | None = None) -> None:
    """Root logging setup shared by the CLI and the HTTP service."""
    logging.basicConfig(
        level=logging.getLevelName((level or os.getenv("LOG_LEVEL", "INFO")).upper()),
        format=LOG_FORMAT,
    )


def _env_flag(name: str, default: str = "false") -> bool:
    return os.getenv(name, default).lower() == "true"


class HarnessSettings(BaseModel):
    """Environment-driven settings."""

    log_level: str = Field("INFO", description="Root log level")
    cache_dir: Path = Field(
        Path(".cache/reference_fronts"), description="Where reference fronts are stored"
    )
    output_dir: Path = Field(Path("results"), description="Default result directory")
    workers: int = Field(1, ge=1, description="Worker processes for batches of runs")
    verify_invariants: bool = Field(False, description="Check archive invariants every step")
    allowed_origins: list[str] = Field(
        default_factory=lambda: ["http://localhost:3000"], description="CORS origins of the API"
    )
    max_api_evaluations: int = Field(
        60000, gt=0, description="Largest main-loop budget the API will run"
    )
    max_upload_bytes: int = Field(
        10 * 1024 * 1024, gt=0, description="Largest result file the API accepts"
    )
    cache_enabled: bool = Field(False, description="Cache API solve responses")
    cache_ttl_seconds: int = Field(300, gt=0)
    cache_max_items: int = Field(128, gt=0)

    @classmethod
    def from_env(cls) -> HarnessSettings:
        return cls(
            log_level=os.getenv("LOG_LEVEL", "INFO"),
            cache_dir=Path(os.getenv("MOSAR_CACHE_DIR", ".cache/reference_fronts")),
            output_dir=Path(os.getenv("MOSAR_OUTPUT_DIR", "results")),
            workers=int(os.getenv("MOSAR_WORKERS", "1")),
            verify_invariants=_env_flag("MOSAR_VERIFY_INVARIANTS"),
            allowed_origins=[
                origin.strip()
                for origin in os.getenv("ALLOWED_ORIGINS", "http://localhost:3000").split(",")
                if origin.strip()
            ],
            max_api_evaluations=int(os.getenv("MAX_API_EVALUATIONS", "60000")),
            max_upload_bytes=int(os.getenv("MAX_UPLOAD_BYTES", str(10 * 1024 * 1024))),
            cache_enabled=_env_flag("CACHE_ENABLED"),
            cache_ttl_seconds=int(os.getenv("CACHE_TTL_SECONDS", "300")),
            cache_max_items=int(os.getenv("CACHE_MAX_ITEMS", "128")),
        )


# ============================================================================
# Value Parsing
# ============================================================================


def parse_seeds(text: str) -> list[int]:
    """
    Seeds as "N..M" (inclusive), a comma list, or a mix: "1..3,7" -> [1, 2, 3, 7].

    Raises ValueError on malformed input.
    """
    seeds: list[int] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            raise ValueError(f"Empty entry in seed list '{text}'")
        if ".." in part:
            start_text, end_text = part.split("..", 1)
            start, end = int(start_text), int(end_text)
            if end < start:
                raise ValueError(f"Seed range '{part}' runs backwards")
            seeds.extend(range(start, end + 1))
        else:
            seeds.append(int(part))
    if len(set(seeds)) != len(seeds):
        raise ValueError(f"Duplicate seeds in '{text}'")
    return seeds


def parse_sl_grid(text: str) -> list[float]:
    """Comma-separated positive side lengths."""
    grid = [float(part) for part in text.split(",") if part.strip()]
    if not grid or any(sl <= 0 for sl in grid):
        raise ValueError(f"Side lengths must be a non-empty list of positive numbers: '{text}'")
    return grid


def parse_algorithms(text: str) -> list[Algorithm]:
    """Comma-separated algorithm names; raises ValueError on an unknown name."""
    names = [part.strip().lower() for part in text.split(",") if part.strip()]
    if not names:
        raise ValueError("At least one algorithm is required")
    return [Algorithm(name) for name in names]


def validate_budget(schedule: Schedule, max_evaluations: int) -> tuple[bool, list[str]]:
    """Check that a schedule fits an evaluation budget."""
    errors: list[str] = []
    if schedule.evaluation_budget > max_evaluations:
        errors.append(
            f"Schedule needs {schedule.evaluation_budget} evaluations, limit is {max_evaluations}"
        )
    if schedule.level_count == 0:
        errors.append("Schedule has no temperature levels")
    return len(errors) == 0, errors
