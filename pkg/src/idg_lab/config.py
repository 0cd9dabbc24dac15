"""Configuration management for idg-lab."""

import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from idg_lab.constants import (
    DEFAULT_ENUMERATION_BUDGET,
    DEFAULT_LOG_LEVEL,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_SEED,
    MANIFEST_NAME,
)
from idg_lab.utils.error_handler import MissingArtifactError
from idg_lab.utils.output import write_json


def _available_parallelism() -> int:
    return os.cpu_count() or 1


class Settings(BaseSettings):
    """Application settings loaded from ``IDGLAB_*`` environment variables."""

    # Reproducibility
    seed: int | None = Field(default=None, description="Master seed used when --seed is not given")

    # Resources
    jobs: int = Field(
        default_factory=_available_parallelism, ge=1, description="Default parallel workers"
    )
    enumeration_budget: int = Field(
        default=DEFAULT_ENUMERATION_BUDGET, ge=1, description="Maximum encoders to enumerate"
    )

    # Logging Configuration
    log_level: str = Field(default=DEFAULT_LOG_LEVEL, description="Logging level")

    # Artifacts
    output_dir: Path = Field(default=Path(DEFAULT_OUTPUT_DIR), description="Root of run outputs")

    model_config = SettingsConfigDict(
        env_prefix="IDGLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# Global settings instance
_settings: Settings | None = None


def get_settings() -> Settings:
    """Get or create settings instance.

    Returns:
        Settings instance loaded from environment variables.
    """
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Reset settings instance (useful for testing)."""
    global _settings
    _settings = None


def resolve_seed(seed: int | None) -> int:
    """Explicit (or config-file) seed, else ``IDGLAB_SEED``, else the default."""
    if seed is not None:
        return seed
    env_seed = get_settings().seed
    return env_seed if env_seed is not None else DEFAULT_SEED


def resolve_jobs(jobs: int | None) -> int:
    return jobs if jobs is not None else get_settings().jobs


def load_config_file(path: Path) -> dict[str, Any]:
    """Parse a TOML file whose tables mirror the command tree (``[train]``, ``[data.gen]``).

    Keys are option parameter names; the result is used as the click default map.

    Raises:
        MissingArtifactError: If the file does not exist
    """
    if not path.exists():
        raise MissingArtifactError(f"Config file not found: {path}")
    with path.open("rb") as f:
        return tomllib.load(f)


class RunManifest(BaseModel):
    """Fully resolved configuration of a run that wrote artifacts."""

    command: str
    params: dict[str, Any]
    seed: int | None
    version: str
    timestamp: str


def write_manifest(out_dir: Path, command: str, params: dict[str, Any], seed: int | None) -> Path:
    from idg_lab import __version__

    manifest = RunManifest(
        command=command,
        params={k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()},
        seed=seed,
        version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
    )
    return write_json(out_dir / MANIFEST_NAME, manifest)
