"""
Runtime settings for the robust min-max toolkit

Values come from the environment, optionally seeded from a .env file in the
project root.
"""
import os
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict

logger = logging.getLogger(__name__)

# Load environment variables from .env file if it exists
try:
    from dotenv import load_dotenv
    env_path = Path(__file__).parent.parent / '.env'
    load_dotenv(env_path)
except ImportError:
    # dotenv not installed, environment variables must be set manually
    pass

ENV_PREFIX = "ROBUST_MINMAX_"


def _env_number(name: str, default, cast):
    raw = os.environ.get(ENV_PREFIX + name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(float(raw)) if cast is int else cast(raw)
    except ValueError:
        logger.error(f"Ignoring malformed {ENV_PREFIX + name}={raw!r}, using {default}")
        return default


@dataclass(frozen=True)
class Settings:
    """Solver budgets, defaults and logging level"""
    grid_budget: int = 10_000_000
    max_cells: int = 200_000
    workers: int = 1
    chunk_size: int = 65_536
    tau_scale: float = 1e-6
    log_level: str = "INFO"
    resolution_1d: int = 4001
    resolution_2d: int = 201
    resolution_nd: int = 31

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings from ROBUST_MINMAX_* environment variables"""
        defaults = cls()
        return cls(
            grid_budget=_env_number("GRID_BUDGET", defaults.grid_budget, int),
            max_cells=_env_number("MAX_CELLS", defaults.max_cells, int),
            workers=max(1, _env_number("WORKERS", defaults.workers, int)),
            chunk_size=max(1, _env_number("CHUNK_SIZE", defaults.chunk_size, int)),
            tau_scale=_env_number("TAU_SCALE", defaults.tau_scale, float),
            log_level=os.environ.get(ENV_PREFIX + "LOG_LEVEL", defaults.log_level).upper(),
            resolution_1d=_env_number("RESOLUTION_1D", defaults.resolution_1d, int),
            resolution_2d=_env_number("RESOLUTION_2D", defaults.resolution_2d, int),
            resolution_nd=_env_number("RESOLUTION_ND", defaults.resolution_nd, int),
        )

    def default_resolution(self, dimension: int) -> int:
        """Per-axis grid point count for a domain of the given dimension"""
        by_dimension: Dict[int, int] = {1: self.resolution_1d, 2: self.resolution_2d}
        return by_dimension.get(dimension, self.resolution_nd)


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Process-wide settings, read once"""
    return Settings.from_env()
