"""Input validation utilities for dataset rows and configuration values."""
from typing import Optional, Union

from exceptions import ConfigurationError, RecordFormatError, RecordRangeError


def parse_int_field(value: Union[str, int, None], row: int, field: str,
                    min_val: Optional[int] = None, max_val: Optional[int] = None) -> int:
    """
    Convert a raw dataset field to an integer and enforce bounds.

    Args:
        value: Raw field (string or int)
        row: Row index used in error messages
        field: Field name used in error messages
        min_val: Minimum allowed value (inclusive)
        max_val: Maximum allowed value (exclusive)

    Returns:
        Integer value within bounds

    Raises:
        RecordFormatError: value is not an integer
        RecordRangeError: value is outside [min_val, max_val)
    """
    try:
        text = str(value).strip()
        result = int(text)
    except (ValueError, TypeError, OverflowError):
        raise RecordFormatError(row, f"Row {row}: field '{field}' is not an integer ({value!r})")

    if min_val is not None and result < min_val:
        raise RecordRangeError(row, field, result)
    if max_val is not None and result >= max_val:
        raise RecordRangeError(row, field, result)
    return result


def require_positive(value: Union[int, float], key: str, allow_zero: bool = False) -> Union[int, float]:
    """Validate that a configuration number is positive (or non-negative)."""
    try:
        number = float(value)
    except (ValueError, TypeError):
        raise ConfigurationError(key, f"'{key}' must be numeric, got {value!r}")
    if number < 0 or (number == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ConfigurationError(key, f"'{key}' must be {bound}, got {value!r}")
    return value


def require_probability(value: float, key: str) -> float:
    """Validate that a value lies in [0, 1]."""
    try:
        number = float(value)
    except (ValueError, TypeError):
        raise ConfigurationError(key, f"'{key}' must be numeric, got {value!r}")
    if not 0.0 <= number <= 1.0:
        raise ConfigurationError(key, f"'{key}' must be within [0, 1], got {value!r}")
    return number
