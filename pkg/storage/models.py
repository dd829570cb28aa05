"""
File-schema records using Pydantic for validation
"""
from datetime import datetime
from typing import Any, Optional

from pydantic import BaseModel, field_validator

TAIL_COLUMNS = ("k", "estimate", "stderr", "n_samples")
SCAN_COLUMNS = (
    "n", "x", "num_vertices", "num_edges", "c", "C", "ci_low", "ci_high",
    "k_min", "k_max", "n_points", "residual", "xc", "inv_sqrt3", "eps_line",
)


class TailRow(BaseModel):
    """One row of a tail CSV"""
    k: int
    estimate: float
    stderr: float
    n_samples: int

    @field_validator("k")
    @classmethod
    def validate_k(cls, v: int) -> int:
        if v < 0:
            raise ValueError("k must be non-negative")
        return v

    @field_validator("estimate")
    @classmethod
    def validate_estimate(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("estimate must lie in [0, 1]")
        return v

    @field_validator("stderr")
    @classmethod
    def validate_stderr(cls, v: float) -> float:
        if v < 0.0:
            raise ValueError("stderr must be non-negative")
        return v

    @field_validator("n_samples")
    @classmethod
    def validate_samples(cls, v: int) -> int:
        if v < 1:
            raise ValueError("n_samples must be positive")
        return v


class ScanRow(BaseModel):
    """One grid point of a scan CSV"""
    n: float
    x: float
    num_vertices: int
    num_edges: int
    c: float
    C: float
    ci_low: float
    ci_high: float
    k_min: int
    k_max: int
    n_points: int
    residual: float
    xc: Optional[float] = None
    inv_sqrt3: float
    eps_line: float

    @field_validator("xc", mode="before")
    @classmethod
    def empty_to_none(cls, v: Any) -> Any:
        return None if v == "" else v

    @field_validator("n")
    @classmethod
    def validate_n(cls, v: float) -> float:
        if not v > 1.0:
            raise ValueError("n must exceed 1")
        return v

    @field_validator("x")
    @classmethod
    def validate_x(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("x must lie in (0, 1)")
        return v


class RunManifest(BaseModel):
    """Provenance of one CLI invocation"""
    subcommand: str
    parameters: dict[str, Any]
    seed: Optional[int] = None
    version: str
    started_at: datetime
    wall_clock_seconds: float
    outputs: dict[str, str]

    @field_validator("outputs")
    @classmethod
    def validate_digests(cls, v: dict[str, str]) -> dict[str, str]:
        for name, digest in v.items():
            if len(digest) != 64 or any(ch not in "0123456789abcdef" for ch in digest):
                raise ValueError(f"Output {name} has no sha256 digest")
        return v
