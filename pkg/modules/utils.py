"""
Utility functions for the robust min-max toolkit
"""
import math
import re
from typing import List, Optional, Sequence, Tuple

from modules.errors import ContractViolation

STAGES = ("exact", "approx", "verify")
SWEEP_KEYS = {'epsilon': float, 'resolution': int}


def sanitize_filename(filename: str) -> str:
    """Sanitize filename for safe file system usage"""
    # Remove or replace invalid characters
    invalid_chars = '<>:"/\\|?* '
    for char in invalid_chars:
        filename = filename.replace(char, '_')

    # Remove multiple underscores
    filename = re.sub(r'_+', '_', filename)

    # Limit length
    if len(filename) > 100:
        filename = filename[:100]

    return filename.strip('_') or "scenario"


def parse_stages(text: str) -> Tuple[str, ...]:
    """'exact,approx' -> ('exact', 'approx'), in pipeline order"""
    requested = {part.strip() for part in text.split(',') if part.strip()}
    unknown = sorted(requested - set(STAGES))
    if unknown:
        raise ContractViolation(f"unknown stage(s) {unknown}; expected a subset of {list(STAGES)}")
    if not requested:
        raise ContractViolation("at least one stage is required")
    return tuple(stage for stage in STAGES if stage in requested)


def parse_sweep(text: str) -> Tuple[str, List[float]]:
    """'epsilon=0.05:0.5:0.05' -> ('epsilon', [0.05, 0.1, ..., 0.5]); the end point is inclusive"""
    match = re.fullmatch(r'\s*(\w+)\s*=\s*([^:]+):([^:]+):([^:]+)\s*', text)
    if not match:
        raise ContractViolation(f"sweep must look like KEY=start:stop:step, got {text!r}")
    key = match.group(1)
    if key not in SWEEP_KEYS:
        raise ContractViolation(f"cannot sweep {key!r}; expected one of {sorted(SWEEP_KEYS)}")
    try:
        start, stop, step = (float(match.group(i)) for i in (2, 3, 4))
    except ValueError:
        raise ContractViolation(f"sweep bounds must be numbers, got {text!r}")
    if not step > 0 or stop < start:
        raise ContractViolation(f"sweep needs step > 0 and stop >= start, got {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    cast = SWEEP_KEYS[key]
    values = [cast(round(start + i * step, 12)) for i in range(count)]
    return key, values


def format_value(value: Optional[float], digits: int = 6) -> str:
    if value is None:
        return "-"
    if isinstance(value, str):
        return value
    return f"{value:.{digits}g}"


def format_point(point: Optional[Sequence[float]], digits: int = 6) -> str:
    if point is None:
        return "-"
    return "(" + ", ".join(format_value(v, digits) for v in point) + ")"
