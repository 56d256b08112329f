"""
GA configuration from a flat key=value file, environment defaults and CLI overrides.
"""
import logging
import os
from pathlib import Path
from typing import Any, Optional

from dotenv import dotenv_values, load_dotenv

from pulsegen.utils.objects import GAConfig

load_dotenv()

logger = logging.getLogger(__name__)

ENV_LOG_LEVEL = "PULSEGEN_LOG_LEVEL"
ENV_SEED = "PULSEGEN_SEED"
ENV_WORKERS = "PULSEGEN_WORKERS"

_NONE_VALUES = {"", "none", "null"}


def log_level() -> str:
    return os.getenv(ENV_LOG_LEVEL, "INFO").upper()


def _env_int(name: str) -> Optional[int]:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{name}: expected an integer, got '{raw}'")


def read_config_file(path: Path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ValueError(f"config: file not found: {path}")
    values: dict[str, Any] = {}
    for key, raw in dotenv_values(path).items():
        if raw is None:
            raise ValueError(f"{key}: missing value in {path}")
        values[key] = None if raw.strip().lower() in _NONE_VALUES else raw.strip()
    logger.info(f"Loaded {len(values)} settings from {path}")
    return values


def load_ga_config(path: Optional[Path] = None, overrides: Optional[dict[str, Any]] = None) -> GAConfig:
    """
    Build a GAConfig. Precedence: overrides > config file > environment > defaults.

    Raises:
        ValueError: unreadable file or malformed environment value
        pydantic.ValidationError: a setting is unknown or out of range
    """
    values: dict[str, Any] = {}
    seed = _env_int(ENV_SEED)
    if seed is not None:
        values["rng_seed"] = seed
    workers = _env_int(ENV_WORKERS)
    if workers is not None:
        values["workers"] = workers

    if path is not None:
        values.update(read_config_file(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return GAConfig.model_validate(values)
