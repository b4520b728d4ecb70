# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import logging
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field as PydanticField, model_validator
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .common import BoundaryCondition
from .grid import Field, Grid, SpaceTimeField, laplacian_matrix
from .measures import SignedMeasure, cell_average
from .nonlinearity import Nonlinearity

# **************************************************************************************


class NewtonConvergenceError(RuntimeError):
    """
    Raised when neither damped Newton nor the Gauss-Seidel fallback reaches tolerance.
    """

    def __init__(self, message: str, residual: float) -> None:
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


# **************************************************************************************


class SpaceTimeTestFunction(Protocol):
    """
    A smooth compactly supported space-time function with exact derivatives.
    """

    def value(self, x: NDArray[np.float64], t: float) -> NDArray[np.float64]: ...

    def time_derivative(
        self, x: NDArray[np.float64], t: float
    ) -> NDArray[np.float64]: ...

    def laplacian(self, x: NDArray[np.float64], t: float) -> NDArray[np.float64]: ...

    def supported_inside(
        self, grid: Grid, t_start: float, t_end: float
    ) -> bool: ...


# **************************************************************************************


class SpatialTestFunction(Protocol):
    def __call__(self, x: NDArray[np.float64]) -> NDArray[np.float64]: ...


# **************************************************************************************


class SolveConfig(BaseModel):
    """
    A forward run: grid, horizon, time step, truncation boundary and Newton controls.

    The Newton tolerance is relative to the data: a step stops once the residual
    satisfies |F|_inf <= tolerance * max(1, |u_old|_inf), which is the absolute
    tolerance for data bounded by one.
    """

    grid: Grid

    horizon: float = PydanticField(..., gt=0.0)

    dt: float = PydanticField(..., gt=0.0)

    boundary: BoundaryCondition = BoundaryCondition.ZERO_FLUX

    tolerance: float = PydanticField(default=1e-12, gt=0.0)

    max_iterations: int = PydanticField(default=50, ge=1)

    store_every: int = PydanticField(default=1, ge=1)

    gauss_c: Optional[float] = PydanticField(default=None, gt=0.0)

    @model_validator(mode="after")
    def validate_time_mesh(self) -> "SolveConfig":
        if self.gauss_c is not None and self.horizon > 1.0 / (4.0 * self.gauss_c):
            raise ValueError(
                f"horizon T={self.horizon} exceeds the existence horizon 1/(4c)="
                f"{1.0 / (4.0 * self.gauss_c)} for gauss_c={self.gauss_c}"
            )

        steps = self.horizon / self.dt

        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps) or round(steps) < 1:
            raise ValueError("horizon must be a positive integer multiple of dt")

        if round(steps) % self.store_every:
            raise ValueError("the step count must be a multiple of store_every")

        return self

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))


# **************************************************************************************


class RunLedger(BaseModel):
    """
    The total discrete enthalpy after every step of a forward run.
    """

    totals: List[float]

    @property
    def drift(self) -> float:
        """
        The largest relative departure of the total enthalpy from its initial value.
        """
        initial = self.totals[0]
        scale = max(abs(initial), 1e-300)
        return float(max(abs(t - initial) for t in self.totals) / scale)


# **************************************************************************************


def _residual(
    u: NDArray[np.float64],
    u_old: NDArray[np.float64],
    operator: sparse.csr_matrix,
    nl: Nonlinearity,
    dt: float,
) -> NDArray[np.float64]:
    return u - dt * (operator @ nl.evaluate(u)) - u_old


# **************************************************************************************


def _gauss_seidel(
    u: NDArray[np.float64],
    u_old: NDArray[np.float64],
    operator: sparse.csr_matrix,
    nl: Nonlinearity,
    dt: float,
    grid: Grid,
    tolerance: float,
    sweeps: int,
) -> Tuple[NDArray[np.float64], float]:
    """
    Red-black nonlinear Gauss-Seidel: each cell solves its scalar monotone equation
    u_i + k_i alpha(u_i) = rhs_i exactly with the neighbours frozen.
    """
    diagonal = operator.diagonal()

    shift = -dt * diagonal

    parity = np.sum(np.indices(grid.shape), axis=0).ravel() % 2

    residual = np.inf

    for _ in range(sweeps):
        for colour in (0, 1):
            a = nl.evaluate(u)
            off_diagonal = operator @ a - diagonal * a
            rhs = u_old + dt * off_diagonal
            mask = parity == colour
            u[mask] = nl.solve_shifted(rhs[mask], shift[mask])

        residual = float(np.max(np.abs(_residual(u, u_old, operator, nl, dt))))

        if residual <= tolerance:
            break

    return u, residual


# **************************************************************************************


def _newton(
    u_old: NDArray[np.float64],
    operator: sparse.csr_matrix,
    nl: Nonlinearity,
    dt: float,
    tolerance: float,
    max_iterations: int,
) -> Tuple[NDArray[np.float64], float, int]:
    u = u_old.copy()

    F = _residual(u, u_old, operator, nl, dt)

    norm = float(np.max(np.abs(F)))

    identity = sparse.identity(u.size, format="csr")

    for iteration in range(1, max_iterations + 1):
        # The flat segment contributes slope 0; the identity keeps the system regular:
        jacobian = identity - dt * (operator @ sparse.diags(nl.slope(u)))

        delta = spsolve(jacobian.tocsc(), -F)

        damping = 1.0

        while True:
            candidate = u + damping * delta
            F_candidate = _residual(candidate, u_old, operator, nl, dt)
            candidate_norm = float(np.max(np.abs(F_candidate)))

            if candidate_norm < (1.0 - 1e-4 * damping) * norm or damping < 2.0**-10:
                break

            damping *= 0.5

        u, F, norm = candidate, F_candidate, candidate_norm

        if norm <= tolerance:
            return u, norm, iteration

    return u, norm, max_iterations


# **************************************************************************************


def residual_tolerance(tolerance: float, previous: NDArray[np.float64]) -> float:
    """
    The stopping threshold for the residual infinity norm of one implicit step.

    Atom data reach values of order mass / h^dim, where round-off in the discrete
    Laplacian alone approaches an absolute 1e-12, so the threshold grows with
    |u_old|_inf once it exceeds one.
    """
    return tolerance * max(1.0, float(np.max(np.abs(previous))))


# **************************************************************************************


def step(
    u_old: Field,
    nl: Nonlinearity,
    dt: float,
    boundary: BoundaryCondition = BoundaryCondition.ZERO_FLUX,
    tolerance: float = 1e-12,
    max_iterations: int = 50,
    operator: Optional[sparse.csr_matrix] = None,
) -> Field:
    """
    One implicit Euler step: solve u_new - dt * laplacian(alpha(u_new)) = u_old.

    The tolerance on the residual infinity norm is relative, see residual_tolerance.
    On convergence u_new is finalised as u_old + dt * L alpha(u_new), which makes the
    discrete total enthalpy telescope exactly under zero-flux truncation.

    Raises:
        NewtonConvergenceError: If damped Newton and the Gauss-Seidel fallback fail.
    """
    grid = u_old.grid

    L = laplacian_matrix(grid, boundary) if operator is None else operator

    previous = u_old.values.ravel()

    scaled = residual_tolerance(tolerance, previous)

    initial = float(np.max(np.abs(_residual(previous, previous, L, nl, dt))))

    # Already stationary, e.g. entirely mushy or spatially constant data:
    if initial <= scaled:
        return Field(grid=grid, values=previous.copy(), time_tag=u_old.time_tag + dt)

    u, residual, _ = _newton(previous, L, nl, dt, scaled, max_iterations)

    if residual > scaled:
        logging.warning(
            f"Newton stalled at residual {residual:.3e}; falling back to nonlinear Gauss-Seidel"
        )

        u, residual = _gauss_seidel(
            u, previous, L, nl, dt, grid, scaled, sweeps=200 * max_iterations
        )

        if residual > scaled:
            raise NewtonConvergenceError(
                f"implicit step at t={u_old.time_tag + dt} did not converge", residual
            )

    u = previous + dt * (L @ nl.evaluate(u))

    return Field(grid=grid, values=u, time_tag=u_old.time_tag + dt)


# **************************************************************************************


def run_with_ledger(
    u0: Field, cfg: SolveConfig, nl: Nonlinearity
) -> Tuple[SpaceTimeField, RunLedger]:
    """
    Evolve an initial field over the configured horizon, storing every store_every-th
    slice and recording the total enthalpy after each step.
    """
    if u0.grid != cfg.grid:
        raise ValueError("initial field and solver configuration use different grids")

    L = laplacian_matrix(cfg.grid, cfg.boundary)

    volume = cfg.grid.cell_volume

    current = Field(grid=cfg.grid, values=u0.values, time_tag=0.0)

    stored = [current.values]

    totals = [float(np.sum(current.values) * volume)]

    for k in range(1, cfg.steps + 1):
        current = step(
            current,
            nl,
            cfg.dt,
            boundary=cfg.boundary,
            tolerance=cfg.tolerance,
            max_iterations=cfg.max_iterations,
            operator=L,
        )

        totals.append(float(np.sum(current.values) * volume))

        if k % cfg.store_every == 0:
            stored.append(current.values)

    history = SpaceTimeField(
        grid=cfg.grid,
        t_start=0.0,
        dt=cfg.dt * cfg.store_every,
        slices=np.stack(stored),
    )

    return history, RunLedger(totals=totals)


# **************************************************************************************


def evolve(u0: Field, cfg: SolveConfig, nl: Nonlinearity) -> SpaceTimeField:
    history, _ = run_with_ledger(u0, cfg, nl)
    return history


# **************************************************************************************


def run(mu: SignedMeasure, cfg: SolveConfig, nl: Nonlinearity) -> SpaceTimeField:
    """
    Solve from measure data: the initial slice is the exact cell average of mu.

    Raises:
        ValueError: If the horizon exceeds 1/(4c) for the measure's Gaussian exponent.
    """
    if mu.gauss_c is not None and cfg.horizon > mu.horizon:
        raise ValueError(
            f"horizon T={cfg.horizon} exceeds 1/(4c)={mu.horizon} for the initial data"
        )

    return evolve(cell_average(mu, cfg.grid), cfg, nl)


# **************************************************************************************


def distributional_residual(
    u: SpaceTimeField, nl: Nonlinearity, testfn: SpaceTimeTestFunction
) -> float:
    """
    The midpoint-rule value of the double integral of alpha(u) * laplacian(phi) +
    u * phi_t, with phi's exact derivatives taken at the middle of each slice interval.

    Raises:
        ValueError: If the test function is not supported strictly inside the box.
    """
    if not testfn.supported_inside(u.grid, u.t_start, u.t_end):
        raise ValueError("test function is not supported strictly inside the space-time box")

    x = u.grid.centers()

    total = 0.0

    for k in range(1, u.n_slices):
        t_mid = float(u.times[k]) - 0.5 * u.dt

        integrand = nl.evaluate(u.slices[k]) * testfn.laplacian(x, t_mid) + u.slices[
            k
        ] * testfn.time_derivative(x, t_mid)

        total += u.dt * float(np.sum(integrand))

    return total * u.grid.cell_volume


# **************************************************************************************


def initial_trace(
    u: SpaceTimeField,
    psi: SpatialTestFunction,
    times: Sequence[float],
) -> List[float]:
    """
    The pairings of u(., t) with psi at the slices nearest to each requested time.
    """
    values = psi(u.grid.centers())

    return [
        float(np.sum(u.slices[u.index_of(t)] * values) * u.grid.cell_volume)
        for t in times
    ]


# **************************************************************************************


def sup_after(u: SpaceTimeField, eps: float) -> float:
    """
    The maximum of |u| over the slices at times t >= eps.

    Raises:
        ValueError: If no slice lies at or after eps.
    """
    selected = u.times >= eps - 1e-12 * max(1.0, abs(eps))

    if not np.any(selected):
        raise ValueError(f"no stored slice at or after t={eps}")

    return float(np.max(np.abs(u.slices[selected])))


# **************************************************************************************


def interface_position(field: Field) -> float:
    """
    The liquid-solid interface of a 1D profile with liquid on the left, from the
    enthalpy fraction of the first cell that is not liquid.

    Raises:
        ValueError: If the field is not 1D or has no liquid-solid transition.
    """
    if field.grid.dim != 1:
        raise ValueError("interface_position expects a 1D field")

    u = field.values

    h = field.grid.spacing

    not_liquid = np.nonzero(u < 1.0)[0]

    if not_liquid.size == 0 or not_liquid[0] == 0:
        raise ValueError("profile has no liquid region on the left")

    i = int(not_liquid[0])

    left_face = field.grid.origin[0] + i * h

    fraction = min(max((u[i] + 1.0) / 2.0, 0.0), 1.0)

    return float(left_face + h * fraction)


# **************************************************************************************


def l1_contraction_profile(u: SpaceTimeField, v: SpaceTimeField) -> List[float]:
    """
    The L1 distance between two histories at every stored slice.
    """
    if u.grid != v.grid or u.n_slices != v.n_slices:
        raise ValueError("histories must share a grid and a time mesh")

    axes = tuple(range(1, u.grid.dim + 1))

    return list(
        np.sum(np.abs(u.slices - v.slices), axis=axes) * u.grid.cell_volume
    )


# **************************************************************************************
