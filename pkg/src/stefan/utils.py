# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

from math import inf, isfinite, log2
from typing import Any, List, Sequence

# **************************************************************************************


def parse_float_safely(value: Any, default: float = inf) -> float:
    try:
        return float(value)
    except (ValueError, TypeError):
        return default


# **************************************************************************************


def is_finite_number(value: Any) -> bool:
    # Booleans are integers in Python, but never a meaningful numeric parameter:
    if isinstance(value, bool):
        return False

    return isfinite(parse_float_safely(value))


# **************************************************************************************


def dyadic_sequence(start: float, count: int, factor: float = 0.5) -> List[float]:
    """
    Build the geometric sequence start, start * factor, start * factor^2, ...

    Args:
        start (float): The first member of the sequence.
        count (int): The number of members.
        factor (float): The ratio between successive members.

    Returns:
        List[float]: The sequence.

    Raises:
        ValueError: If count is negative.
    """
    if count < 0:
        raise ValueError("count must be non-negative")

    return [start * factor**k for k in range(count)]


# **************************************************************************************


def measured_orders(errors: Sequence[float], ratio: float = 2.0) -> List[float]:
    """
    Observed convergence orders between successive refinements.

    Args:
        errors (Sequence[float]): Errors at successively refined resolutions.
        ratio (float): The refinement ratio between successive resolutions.

    Returns:
        List[float]: One order per successive pair; inf when the finer error is zero.
    """
    orders: List[float] = []

    for coarse, fine in zip(errors[:-1], errors[1:]):
        if fine == 0.0:
            orders.append(inf)
            continue

        orders.append(log2(abs(coarse) / abs(fine)) / log2(ratio))

    return orders


# **************************************************************************************
