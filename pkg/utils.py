import math
import os
import re
from datetime import datetime
from typing import List, Mapping, Optional, Sequence, Union

import numpy as np

TRUE_STRINGS = {"1", "true", "yes", "on"}


def env_flag(name: str, default: bool = False) -> bool:
    """Read a boolean flag from the environment"""
    value = os.getenv(name)
    if value is None:
        return default
    return value.strip().lower() in TRUE_STRINGS


def parse_number_list(text: Union[str, Sequence[float]]) -> List[float]:
    """Parse a comma or whitespace separated list of numbers"""
    if not isinstance(text, str):
        return [float(value) for value in text]

    tokens = [token for token in re.split(r'[,\s;]+', text.strip()) if token]
    if not tokens:
        raise ValueError("expected at least one number")

    values = []
    for token in tokens:
        try:
            # Accept Fortran-style exponents as found in thermo data
            values.append(float(token.replace('D', 'E').replace('d', 'e')))
        except ValueError:
            raise ValueError(f"not a number: {token!r}") from None
    return values


def parse_species_list(text: Union[str, Sequence[str]]) -> List[str]:
    """Parse a comma separated species list, keeping order"""
    names = text.split(',') if isinstance(text, str) else list(text)
    names = [name.strip() for name in names if name and name.strip()]
    if not names:
        raise ValueError("expected at least one species name")

    duplicates = sorted({name for name in names if names.count(name) > 1})
    if duplicates:
        raise ValueError(f"duplicate species: {', '.join(duplicates)}")
    return names


def normalize_composition(values: Sequence[float], count: int = None) -> np.ndarray:
    """Scale non-negative fractions so they sum to one"""
    arr = np.asarray(values, dtype=float)
    if count is not None and arr.size != count:
        raise ValueError(f"composition has {arr.size} entries, expected {count}")
    if arr.size == 0:
        raise ValueError("composition is empty")
    if np.any(arr < 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError("composition entries must be finite and non-negative")

    total = float(np.sum(arr))
    if total <= 0.0:
        raise ValueError("composition must have a positive sum")
    return arr / total


def format_sig(value: float, digits: int = 6) -> str:
    """Format a number with a fixed count of significant digits"""
    if value is None:
        return ""
    if value == 0.0 or not math.isfinite(value):
        return str(value)

    # Switch to exponent form for very small or very large magnitudes
    magnitude = abs(value)
    if magnitude < 1e-3 or magnitude >= 1e7:
        return f"{value:.{digits - 1}e}"
    return f"{value:.{digits}g}"


def report_filename(mode: str, conditions: Optional[Mapping[str, float]] = None,
                    extension: str = "", timestamp: bool = False) -> str:
    """File name built from the solve mode and its defining conditions.

    report_filename("pt", {"T": 2500, "p": 10135}, "kv") -> "pt_T2500_p10135.kv"
    """
    parts = [mode] + [f"{key}{value:g}".replace("+", "") for key, value in (conditions or {}).items()]
    stem = re.sub(r'[^\w\-.]', '_', "_".join(parts))

    if timestamp:
        stem = f"{stem}_{datetime.now().strftime('%Y%m%d_%H%M%S')}"

    if extension and not extension.startswith('.'):
        extension = f".{extension}"

    return f"{stem}{extension}"
