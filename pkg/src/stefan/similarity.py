# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import logging
from math import pi, sqrt
from typing import List

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, Field as PydanticField
from scipy.optimize import bisect
from scipy.special import erfc, erfcx

from .common import BoundaryCondition
from .grid import Field, Grid
from .nonlinearity import make_two_phase
from .solver import SolveConfig, evolve, interface_position
from .utils import dyadic_sequence, measured_orders

# **************************************************************************************


def _neumann_condition(lam: float, theta_liquid: float, theta_solid: float) -> float:
    # Latent jump 2 times the front speed balances the jump in the temperature flux:
    return 2.0 * lam - (
        theta_liquid / erfcx(-lam) - theta_solid / erfcx(lam)
    ) / sqrt(pi)


# **************************************************************************************


def neumann_lambda(theta_liquid: float, theta_solid: float) -> float:
    """
    The similarity constant lambda of the two-phase Neumann solution with latent jump 2
    and unit diffusivities, where the front sits at 2 * lambda * sqrt(t).

    The liquid is held at temperature theta_liquid far to the left and the solid at
    -theta_solid far to the right. The defining condition is strictly increasing in
    lambda, so bisection on an expanding bracket finds the unique root to 1e-12.

    Args:
        theta_liquid (float): The far-field liquid temperature, A - 1 for u = A.
        theta_solid (float): The far-field solid undercooling, A' - 1 for u = -A'.

    Returns:
        float: The similarity constant.

    Raises:
        ValueError: If either temperature is negative.
    """
    if theta_liquid < 0 or theta_solid < 0:
        raise ValueError("far-field temperatures must be nonnegative")

    lower, upper = -1.0, 1.0

    while _neumann_condition(lower, theta_liquid, theta_solid) > 0:
        lower *= 2.0

    while _neumann_condition(upper, theta_liquid, theta_solid) < 0:
        upper *= 2.0

    return float(
        bisect(
            _neumann_condition,
            lower,
            upper,
            args=(theta_liquid, theta_solid),
            xtol=1e-12,
        )
    )


# **************************************************************************************


def neumann_interface(t: float, lam: float) -> float:
    return 2.0 * lam * sqrt(t)


# **************************************************************************************


def neumann_temperature(
    x: ArrayLike, t: float, lam: float, theta_liquid: float, theta_solid: float
) -> NDArray[np.float64]:
    """
    The temperature alpha(u) of the Neumann solution at positions x and time t > 0.
    """
    if not t > 0:
        raise ValueError("the similarity solution is defined for t > 0")

    eta = np.asarray(x, dtype=float) / (2.0 * sqrt(t))

    liquid = theta_liquid * (1.0 - erfc(-eta) / erfc(-lam))
    solid = -theta_solid * (1.0 - erfc(eta) / erfc(lam))

    return np.where(eta < lam, liquid, solid)


# **************************************************************************************


def neumann_enthalpy(
    x: ArrayLike, t: float, lam: float, theta_liquid: float, theta_solid: float
) -> NDArray[np.float64]:
    """
    The enthalpy u of the Neumann solution: alpha + 1 in the liquid, alpha - 1 in the solid.
    """
    eta = np.asarray(x, dtype=float) / (2.0 * sqrt(t))

    alpha = neumann_temperature(x, t, lam, theta_liquid, theta_solid)

    return np.where(eta < lam, alpha + 1.0, alpha - 1.0)


# **************************************************************************************


def step_data(grid: Grid, liquid: float, solid: float) -> Field:
    """
    Enthalpy +liquid left of x = 0 and -solid right of it, as exact cell averages.
    """
    if grid.dim != 1:
        raise ValueError("step data is one-dimensional")

    x = grid.axes()[0]

    h = grid.spacing

    # Fraction of each cell lying left of the origin:
    fraction = np.clip((0.0 - (x - 0.5 * h)) / h, 0.0, 1.0)

    return Field(
        grid=grid, values=fraction * liquid - (1.0 - fraction) * solid, time_tag=0.0
    )


# **************************************************************************************


class ConvergenceStudy(BaseModel):
    """
    Interface errors of the enthalpy scheme against the Neumann solution over a
    sequence of halved spacings.
    """

    lam: float

    spacings: List[float]

    dts: List[float]

    errors: List[float]

    orders: List[float]

    @property
    def overall_order(self) -> float:
        """
        The order measured between the coarsest and the finest level.
        """
        levels = len(self.errors) - 1

        if levels < 1 or self.errors[-1] == 0.0:
            return float("inf")

        return float(np.log2(self.errors[0] / self.errors[-1]) / levels)


# **************************************************************************************


class InterfaceStudyParameters(BaseModel):
    liquid: float = PydanticField(default=3.0, gt=1.0)

    solid: float = PydanticField(default=1.5, gt=1.0)

    half_width: float = PydanticField(default=3.0, gt=0.0)

    spacing: float = PydanticField(default=0.04, gt=0.0)

    # The time step is dt_per_h * h at every level:
    dt_per_h: float = PydanticField(default=0.125, gt=0.0)

    horizon: float = PydanticField(default=0.25, gt=0.0)

    levels: int = PydanticField(default=3, ge=2)


# **************************************************************************************


def interface_convergence_study(
    params: InterfaceStudyParameters = InterfaceStudyParameters(),
) -> ConvergenceStudy:
    """
    Run the two-phase scheme from step data at spacings h, h/2, h/4, ... and measure
    the mean interface error over the stored slices with t >= T/2.

    The grid has an even cell count on [-W, W], so x = 0 is a cell face and the step
    data are represented exactly.
    """
    nl = make_two_phase()

    lam = neumann_lambda(params.liquid - 1.0, params.solid - 1.0)

    spacings: List[float] = []
    dts: List[float] = []
    errors: List[float] = []

    for h in dyadic_sequence(params.spacing, params.levels):
        dt = params.dt_per_h * h

        n = 2 * int(round(params.half_width / h))

        grid = Grid(dim=1, origin=(-0.5 * n * h,), spacing=h, cells=(n,))

        cfg = SolveConfig(
            grid=grid,
            horizon=params.horizon,
            dt=dt,
            boundary=BoundaryCondition.ZERO_FLUX,
        )

        history = evolve(step_data(grid, params.liquid, params.solid), cfg, nl)

        late = [k for k, t in enumerate(history.times) if t >= 0.5 * params.horizon - 1e-12]

        error = float(
            np.mean(
                [
                    abs(
                        interface_position(history.slice(k))
                        - neumann_interface(float(history.times[k]), lam)
                    )
                    for k in late
                ]
            )
        )

        logging.info(f"interface study: h={h}, dt={dt}, mean interface error={error:.3e}")

        spacings.append(h)
        dts.append(dt)
        errors.append(error)

    return ConvergenceStudy(
        lam=lam,
        spacings=spacings,
        dts=dts,
        errors=errors,
        orders=measured_orders(errors),
    )


# **************************************************************************************
