# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Optional, Sequence, TypedDict, Union

import numpy as np
from numpy.typing import NDArray
from scipy import sparse
from scipy.sparse.linalg import spsolve
from typing_extensions import NotRequired

from .common import BoundaryCondition
from .grid import Grid, SpaceTimeField, laplacian_matrix

# **************************************************************************************


class BaseParabolicSolverParameters(TypedDict):
    grid: Grid
    # Cells that evolve; all other cells hold their fixed value:
    free: NDArray[np.bool_]
    fixed_values: NotRequired[Optional[NDArray[np.float64]]]
    boundary: NotRequired[BoundaryCondition]


# **************************************************************************************


class BaseParabolicSolverState(Enum):
    IDLE = "idle"
    SOLVING = "solving"
    COMPLETE = "complete"


# **************************************************************************************

# A diffusion coefficient on the free cells, given per step index and new-level time:
Coefficient = Union[float, NDArray[np.float64]]

# **************************************************************************************


class BaseParabolicSolver(ABC):
    """
    Implicit Euler for phi_s = D(x, s) * laplacian(phi) on the free cells of a grid,
    with every other cell pinned to its fixed value.

    Each step solves (I - ds * diag(D) * L_ff) x_f = x_f_old + ds * D * L_fb x_b, an
    M-matrix system, so the discrete maximum principle holds at every step.
    """

    state: BaseParabolicSolverState = BaseParabolicSolverState.IDLE

    def __init__(self, params: BaseParabolicSolverParameters) -> None:
        self.grid = params["grid"]

        self.free = np.asarray(params["free"], dtype=bool).ravel()

        if self.free.size != self.grid.size:
            raise ValueError("free mask does not match the grid")

        fixed = params.get("fixed_values", None)

        self.fixed_values = (
            np.zeros(self.grid.size)
            if fixed is None
            else np.asarray(fixed, dtype=float).ravel()
        )

        operator = laplacian_matrix(
            self.grid, params.get("boundary", BoundaryCondition.DIRICHLET_ZERO)
        )

        rows = operator[self.free]

        self.L_ff = rows[:, self.free].tocsr()
        self.L_fb = rows[:, ~self.free].tocsr()

        self.boundary_source = self.L_fb @ self.fixed_values[~self.free]

    @abstractmethod
    def get_coefficient(self, step: int, time: float) -> Coefficient:
        """
        The diffusion coefficient on the free cells at the new level of a step.

        Args:
            step (int): The 1-based index of the step being taken.
            time (float): The solver time at the new level.

        Returns:
            Coefficient: A scalar, or one value per free cell.
        """
        raise NotImplementedError("get_coefficient() must be implemented by subclass")

    def advance(
        self, values: NDArray[np.float64], ds: float, step: int, time: float
    ) -> NDArray[np.float64]:
        """
        Take one implicit Euler step.

        Args:
            values (NDArray[np.float64]): The current values on the full grid.
            ds (float): The step length.
            step (int): The 1-based step index.
            time (float): The solver time at the new level.

        Returns:
            NDArray[np.float64]: The new values on the full grid.
        """
        d = np.broadcast_to(
            np.asarray(self.get_coefficient(step, time), dtype=float),
            (int(np.count_nonzero(self.free)),),
        )

        system = sparse.identity(self.L_ff.shape[0], format="csr") - ds * (
            sparse.diags(d) @ self.L_ff
        )

        rhs = values.ravel()[self.free] + ds * d * self.boundary_source

        result = self.fixed_values.copy()
        result[self.free] = spsolve(system.tocsc(), rhs)

        return result.reshape(self.grid.shape)

    def solve(
        self,
        initial: NDArray[np.float64],
        ds: float,
        steps: int,
        s_start: float = 0.0,
    ) -> SpaceTimeField:
        """
        Run the scheme from initial for a number of steps, storing every level.

        Returns:
            SpaceTimeField: The levels in solver time, starting at s_start.
        """
        self.state = BaseParabolicSolverState.SOLVING

        current = np.where(
            self.free.reshape(self.grid.shape),
            np.asarray(initial, dtype=float).reshape(self.grid.shape),
            self.fixed_values.reshape(self.grid.shape),
        )

        levels = [current]

        for k in range(1, steps + 1):
            current = self.advance(current, ds, k, s_start + k * ds)
            levels.append(current)

        self.state = BaseParabolicSolverState.COMPLETE

        return SpaceTimeField(
            grid=self.grid, t_start=s_start, dt=ds, slices=np.stack(levels)
        )


# **************************************************************************************


class HeatSolver(BaseParabolicSolver):
    """
    The constant-coefficient heat equation phi_s = diffusivity * laplacian(phi).
    """

    def __init__(
        self, params: BaseParabolicSolverParameters, diffusivity: float = 1.0
    ) -> None:
        if not diffusivity > 0:
            raise ValueError("diffusivity must be positive")

        super().__init__(params)

        self.diffusivity = diffusivity

    def get_coefficient(self, step: int, time: float) -> Coefficient:
        return self.diffusivity


# **************************************************************************************


class VariableCoefficientSolver(BaseParabolicSolver):
    """
    phi_s = d(x, s) * laplacian(phi) with d supplied per step, either as a sequence of
    full-grid arrays (entry k used by step k) or as a function of the solver time
    returning a scalar or full-grid values.
    """

    def __init__(
        self,
        params: BaseParabolicSolverParameters,
        coefficients: Union[
            Sequence[NDArray[np.float64]],
            Callable[[float], Union[float, NDArray[np.float64]]],
        ],
    ) -> None:
        super().__init__(params)

        self.coefficients = coefficients

    def get_coefficient(self, step: int, time: float) -> Coefficient:
        value = (
            self.coefficients(time)
            if callable(self.coefficients)
            else self.coefficients[step]
        )

        array = np.asarray(value, dtype=float)

        if array.ndim == 0:
            return float(array)

        return array.ravel()[self.free]


# **************************************************************************************
