"""
Configuration module for hexloop
Loads settings from environment variables (and an optional .env file) with fallbacks
"""
import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


class Config:
    """Centralized configuration management"""

    @staticmethod
    def get_setting(key: str, default: Optional[str] = None) -> Optional[str]:
        """Get a setting value with optional default"""
        value = os.environ.get(key)
        if value is None or value.strip() == "":
            return default
        return value.strip()

    # Run Configuration
    @property
    def default_seed(self) -> Optional[int]:
        value = self.get_setting("HEXLOOP_SEED")
        return int(value) if value is not None else None

    @property
    def log_level(self) -> str:
        return self.get_setting("HEXLOOP_LOG_LEVEL", "WARNING")

    @property
    def workers(self) -> int:
        return int(self.get_setting("HEXLOOP_WORKERS", "1"))

    # Enumeration limits
    @property
    def chunk_bits(self) -> int:
        return int(self.get_setting("HEXLOOP_CHUNK_BITS", "14"))

    @property
    def max_free_edges(self) -> int:
        return int(self.get_setting("HEXLOOP_MAX_FREE_EDGES", "24"))

    @property
    def max_loop_faces(self) -> int:
        return int(self.get_setting("HEXLOOP_MAX_LOOP_FACES", "30"))

    @property
    def max_table_edges(self) -> int:
        return int(self.get_setting("HEXLOOP_MAX_TABLE_EDGES", "62"))

    @property
    def max_holley_faces(self) -> int:
        return int(self.get_setting("HEXLOOP_MAX_HOLLEY_FACES", "12"))

    @property
    def max_exhaustive_edges(self) -> int:
        return int(self.get_setting("HEXLOOP_MAX_EXHAUSTIVE_EDGES", "12"))

    # Tolerances
    @property
    def tv_tolerance(self) -> float:
        return float(self.get_setting("HEXLOOP_TV_TOLERANCE", "1e-10"))

    @property
    def identity_tolerance(self) -> float:
        return float(self.get_setting("HEXLOOP_IDENTITY_TOLERANCE", "1e-12"))

    # Monte Carlo Configuration
    @property
    def burn_in_sweeps(self) -> int:
        return int(self.get_setting("HEXLOOP_BURN_IN_SWEEPS", "1000"))

    @property
    def batches(self) -> int:
        return int(self.get_setting("HEXLOOP_BATCHES", "20"))

    @property
    def significance(self) -> float:
        return float(self.get_setting("HEXLOOP_SIGNIFICANCE", "3.0"))

    @property
    def cache_check_interval(self) -> int:
        return int(self.get_setting("HEXLOOP_CACHE_CHECK_INTERVAL", "65536"))

    def validate(self) -> tuple[bool, list[str]]:
        """Validate that all settings parse and lie in range"""
        errors = []

        try:
            self.default_seed
        except ValueError:
            errors.append("HEXLOOP_SEED must be an integer")

        checks = [
            ("HEXLOOP_WORKERS", lambda: self.workers >= 1, "must be a positive integer"),
            ("HEXLOOP_CHUNK_BITS", lambda: 4 <= self.chunk_bits <= 22, "must be between 4 and 22"),
            ("HEXLOOP_MAX_FREE_EDGES", lambda: 1 <= self.max_free_edges <= 30, "must be between 1 and 30"),
            ("HEXLOOP_MAX_LOOP_FACES", lambda: 1 <= self.max_loop_faces <= 30, "must be between 1 and 30"),
            ("HEXLOOP_MAX_TABLE_EDGES", lambda: 1 <= self.max_table_edges <= 62, "must be between 1 and 62"),
            ("HEXLOOP_MAX_HOLLEY_FACES", lambda: 1 <= self.max_holley_faces <= 16, "must be between 1 and 16"),
            ("HEXLOOP_MAX_EXHAUSTIVE_EDGES", lambda: 1 <= self.max_exhaustive_edges <= 16, "must be between 1 and 16"),
            ("HEXLOOP_TV_TOLERANCE", lambda: 0.0 < self.tv_tolerance < 1.0, "must lie in (0, 1)"),
            ("HEXLOOP_IDENTITY_TOLERANCE", lambda: 0.0 < self.identity_tolerance < 1.0, "must lie in (0, 1)"),
            ("HEXLOOP_BURN_IN_SWEEPS", lambda: self.burn_in_sweeps >= 0, "must be non-negative"),
            ("HEXLOOP_BATCHES", lambda: self.batches >= 2, "must be at least 2"),
            ("HEXLOOP_SIGNIFICANCE", lambda: self.significance > 0.0, "must be positive"),
            ("HEXLOOP_CACHE_CHECK_INTERVAL", lambda: self.cache_check_interval >= 1, "must be positive"),
        ]
        for key, check, message in checks:
            try:
                if not check():
                    errors.append(f"{key} {message}")
            except ValueError:
                errors.append(f"{key} is not a number")

        return len(errors) == 0, errors


# Global config instance
config = Config()
