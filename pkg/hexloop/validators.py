"""
Input validators for the command line
Every validator returns (is_valid, cleaned value or None, error message)
"""
import math
import re
from pathlib import Path
from typing import Optional, Tuple

from hexloop.errors import HexLoopError
from hexloop.hexlattice import Domain, load_domain_file, parse_preset_token

EDGE_LIST_REGEX = re.compile(r"^\d+(\s*,\s*\d+)*$")


def _parse_float(text: str, name: str) -> Tuple[bool, Optional[float], str]:
    try:
        value = float(str(text).strip())
    except ValueError:
        return False, None, f"{name} must be a number, got {text!r}"
    if not math.isfinite(value):
        return False, None, f"{name} must be finite"
    return True, value, ""


def validate_n(text: str, strict: bool = False) -> Tuple[bool, Optional[float], str]:
    """
    Loop weight n: positive, or > 1 when strict
    Returns: (is_valid, n or None, error_message)
    """
    ok, value, message = _parse_float(text, "--n")
    if not ok:
        return ok, value, message
    if strict and value <= 1.0:
        return False, None, f"--n must exceed 1, got {value}"
    if value <= 0.0:
        return False, None, f"--n must be positive, got {value}"
    return True, value, ""


def validate_x(text: str, open_interval: bool = False) -> Tuple[bool, Optional[float], str]:
    """
    Edge weight x in [0, 1], or (0, 1) when open_interval
    """
    ok, value, message = _parse_float(text, "--x")
    if not ok:
        return ok, value, message
    if open_interval and not 0.0 < value < 1.0:
        return False, None, f"--x must lie in (0, 1), got {value}"
    if not 0.0 <= value <= 1.0:
        return False, None, f"--x must lie in [0, 1], got {value}"
    return True, value, ""


def validate_positive_int(text: str, name: str, allow_zero: bool = False) -> Tuple[bool, Optional[int], str]:
    try:
        value = int(str(text).strip())
    except ValueError:
        return False, None, f"{name} must be an integer, got {text!r}"
    if value < 0 or (value == 0 and not allow_zero):
        return False, None, f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}"
    return True, value, ""


def validate_seed(text: Optional[str], fallback: Optional[int] = None) -> Tuple[bool, Optional[int], str]:
    """Seed flag, falling back to HEXLOOP_SEED; None means fresh entropy"""
    if text is None:
        return True, fallback, ""
    return validate_positive_int(text, "--seed", allow_zero=True)


def validate_domain(text: str) -> Tuple[bool, Optional[Domain], str]:
    """
    Preset token (single_hex, two_hex, hex_ball:R) or domain file path
    """
    if not text:
        return False, None, "--domain is required"
    text = text.strip()
    try:
        if Path(text).is_file():
            return True, load_domain_file(text), ""
        return True, parse_preset_token(text), ""
    except (HexLoopError, ValueError) as e:
        return False, None, f"--domain {text!r}: {e}"


def validate_mask(text: Optional[str], domain: Domain) -> Tuple[bool, Optional[list[int]], str]:
    """
    Comma-separated indices of the edges that keep weight x; None keeps all
    """
    if text is None:
        return True, None, ""
    text = text.strip()
    if text == "":
        return True, [], ""
    if not EDGE_LIST_REGEX.match(text):
        return False, None, f"--mask must be comma-separated edge indices, got {text!r}"
    edges = sorted({int(t) for t in text.split(",")})
    if edges and edges[-1] >= domain.num_edges:
        return False, None, f"--mask edge {edges[-1]} is outside 0..{domain.num_edges - 1}"
    return True, edges, ""


def validate_grid_file(path: str) -> Tuple[bool, Optional[list[tuple[float, float]]], str]:
    """
    Grid file with one 'n x' pair per line; blank lines and # comments skipped
    """
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        return False, None, f"--grid: cannot read {path}: {e}"
    grid = []
    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            return False, None, f"--grid line {number}: expected 'n x', got {line!r}"
        ok_n, n, message = validate_n(parts[0], strict=True)
        if not ok_n:
            return False, None, f"--grid line {number}: {message}"
        ok_x, x, message = validate_x(parts[1], open_interval=True)
        if not ok_x:
            return False, None, f"--grid line {number}: {message}"
        grid.append((n, x))
    return True, grid, ""
