# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

from enum import Enum
from typing import Tuple, TypedDict, Union

# **************************************************************************************


class NumericRange(TypedDict):
    """
    A class to store the parameters for a range.
    """

    minimum: Union[int, float]
    maximum: Union[int, float]


# **************************************************************************************


class BoundaryCondition(Enum):
    """
    The condition imposed on the outer layer of cells of a truncation box.
    """

    ZERO_FLUX = "zero_flux"
    DIRICHLET_ZERO = "dirichlet_zero"


# **************************************************************************************

# A spatial point in one or two dimensions:
Point = Tuple[float, ...]

# **************************************************************************************
