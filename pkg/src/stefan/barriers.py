# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import logging
from math import e, log, pi, sqrt
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, Field as PydanticField, model_validator
from scipy.special import erfc, erfcinv

from .base import BaseParabolicSolverParameters, HeatSolver, VariableCoefficientSolver
from .common import BoundaryCondition
from .grid import BallDomain, Field, Grid, SpaceTimeField, normal_derivative

# **************************************************************************************

# The constant of the flux envelope as the explicit barrier yields it:
ENVELOPE_CONSTANT = 4.0 / sqrt(pi)

# **************************************************************************************

# w~(1, t) > 1 exactly when (R - 1) / sqrt(t) exceeds erfc^-1(1/2):
HALF_ERFC_ARGUMENT = float(erfcinv(0.5))

# **************************************************************************************


class BarrierParams(BaseModel):
    """
    The outer radius R and horizon T of the one-dimensional barrier problem on [1, R],
    with the resolution used for numeric comparisons.
    """

    R: float = PydanticField(..., gt=1.0)

    T: float = PydanticField(..., gt=0.0)

    spacing: float = PydanticField(default=0.05, gt=0.0)

    steps: int = PydanticField(default=100, ge=1)

    @model_validator(mode="after")
    def validate_resolution(self) -> "BarrierParams":
        cells = (self.R - 1.0) / self.spacing

        if abs(cells - round(cells)) > 1e-9 * max(1.0, cells) or round(cells) < 2:
            raise ValueError(
                f"R - 1 = {self.R - 1.0} must be a multiple (at least twice) of the "
                f"spacing {self.spacing}"
            )

        return self

    @property
    def dt(self) -> float:
        return self.T / self.steps


# **************************************************************************************


def _require_positive_time(t: ArrayLike) -> NDArray[np.float64]:
    times = np.asarray(t, dtype=float)

    if np.any(times <= 0):
        raise ValueError("the barrier is defined for t > 0 only")

    return times


# **************************************************************************************


def _arguments(
    x: ArrayLike, t: ArrayLike, R: float
) -> Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    times = _require_positive_time(t)
    position = np.asarray(x, dtype=float)
    root = 2.0 * np.sqrt(times)
    return (position - 1.0) / root, (2.0 * R - 1.0 - position) / root, times


# **************************************************************************************


def wtilde(x: ArrayLike, t: ArrayLike, R: float) -> NDArray[np.float64]:
    """
    The explicit barrier 2 [erfc((x - 1) / 2 sqrt(t)) - erfc((2R - 1 - x) / 2 sqrt(t))],
    the heat flow of 4 times the indicator of (-inf, 1) with its odd image about x = R.

    Raises:
        ValueError: If any t <= 0.
    """
    z1, z2, _ = _arguments(x, t, R)
    return 2.0 * (erfc(z1) - erfc(z2))


# **************************************************************************************


def wtilde_dx(x: ArrayLike, t: ArrayLike, R: float) -> NDArray[np.float64]:
    z1, z2, times = _arguments(x, t, R)
    return -(2.0 / np.sqrt(pi * times)) * (np.exp(-(z1**2)) + np.exp(-(z2**2)))


# **************************************************************************************


def wtilde_dxx(x: ArrayLike, t: ArrayLike, R: float) -> NDArray[np.float64]:
    z1, z2, times = _arguments(x, t, R)
    return (2.0 / (times * sqrt(pi))) * (
        z1 * np.exp(-(z1**2)) - z2 * np.exp(-(z2**2))
    )


# **************************************************************************************


def wtilde_dt(x: ArrayLike, t: ArrayLike, R: float) -> NDArray[np.float64]:
    """
    The time derivative of the barrier, differentiated through the erfc arguments.
    """
    z1, z2, times = _arguments(x, t, R)

    # d/dt erfc(z) = (z / (t sqrt(pi))) exp(-z^2) for z proportional to t^(-1/2):
    return 2.0 * (
        z1 * np.exp(-(z1**2)) - z2 * np.exp(-(z2**2))
    ) / (times * sqrt(pi))


# **************************************************************************************


def wtilde_dx_at_R(t: ArrayLike, R: float) -> NDArray[np.float64]:
    """
    The magnitude of the barrier's flux at x = R, (4 / sqrt(pi t)) exp(-(R - 1)^2 / 4t).

    Raises:
        ValueError: If any t <= 0.
    """
    times = _require_positive_time(t)
    return (4.0 / np.sqrt(pi * times)) * np.exp(-((R - 1.0) ** 2) / (4.0 * times))


# **************************************************************************************


def envelope(t: ArrayLike, R: float, constant: float = ENVELOPE_CONSTANT) -> NDArray[np.float64]:
    """
    The Gaussian flux envelope constant * exp(-R^2 / 8t), with constant 4 / sqrt(pi).

    Raises:
        ValueError: If any t <= 0.
    """
    times = _require_positive_time(t)
    return constant * np.exp(-(R**2) / (8.0 * times))


# **************************************************************************************


def admissible_radius(T: float) -> float:
    """
    The smallest R for which both the flux envelope and w~(1, t) > 1 hold on (0, T].

    The envelope holds at time t iff R^2 - 4R + 2 >= 4 t ln(1/t); the right-hand side
    peaks at t = 1/e, which gives R0 = 2 + sqrt(2 + 4/e) for every T >= 1/e.
    """
    if not T > 0:
        raise ValueError("the horizon T must be positive")

    peak = T * log(1.0 / T) if T <= 1.0 / e else 1.0 / e

    flux_radius = 2.0 + sqrt(2.0 + 4.0 * max(peak, 0.0))

    # The supremum over (0, T] of the trace condition is attained at t = T:
    trace_radius = 1.0 + HALF_ERFC_ARGUMENT * sqrt(T)

    return max(flux_radius, trace_radius)


# **************************************************************************************


class AdmissibleRadiusScan(BaseModel):
    T: float

    # The smallest scanned radius satisfying both conditions at every scanned time:
    radius: Optional[float]

    analytic_radius: float

    # Whether the envelope with constant 1 also holds at the reported radius:
    unit_constant_holds: bool


# **************************************************************************************


def scan_admissible_radius(
    T: float, radii: Sequence[float], n_times: int = 400
) -> AdmissibleRadiusScan:
    """
    Scan candidate radii in increasing order and report the smallest one for which
    the closed-form flux lies under the envelope and w~(1, t) > 1 at n_times equispaced
    times in (0, T].
    """
    if n_times < 1:
        raise ValueError("n_times must be at least 1")

    times = T * np.arange(1, n_times + 1) / n_times

    found: Optional[float] = None

    for R in sorted(radii):
        if R <= 1.0:
            continue

        flux_ok = np.all(wtilde_dx_at_R(times, R) <= envelope(times, R))
        trace_ok = np.all(wtilde(1.0, times, R) > 1.0)

        if flux_ok and trace_ok:
            found = float(R)
            break

    unit = found is not None and bool(
        np.all(wtilde_dx_at_R(times, found) <= envelope(times, found, constant=1.0))
    )

    return AdmissibleRadiusScan(
        T=T,
        radius=found,
        analytic_radius=admissible_radius(T),
        unit_constant_holds=unit,
    )


# **************************************************************************************


def check_envelope(p: BarrierParams, n_times: int = 400) -> bool:
    """
    Whether the closed-form flux at R stays under the envelope on (0, T].
    """
    times = p.T * np.arange(1, n_times + 1) / n_times
    return bool(np.all(wtilde_dx_at_R(times, p.R) <= envelope(times, p.R)))


# **************************************************************************************


def _barrier_grid(p: BarrierParams) -> Grid:
    # Cell centres sit on 1, 1 + h, ..., R:
    cells = int(round((p.R - 1.0) / p.spacing)) + 1
    return Grid(dim=1, origin=(1.0 - 0.5 * p.spacing,), spacing=p.spacing, cells=(cells,))


# **************************************************************************************


def solve_w(p: BarrierParams) -> SpaceTimeField:
    """
    Implicit Euler for w_t = w_xx on [1, R] with w(x, 0) = 0, w(1, t) = 1, w(R, t) = 0.

    Returns:
        SpaceTimeField: Node values at x = 1, 1 + h, ..., R for t = 0, dt, ..., T.
    """
    grid = _barrier_grid(p)

    free = np.ones(grid.cells[0], dtype=bool)
    free[0] = free[-1] = False

    fixed = np.zeros(grid.cells[0])
    fixed[0] = 1.0

    params: BaseParabolicSolverParameters = {
        "grid": grid,
        "free": free,
        "fixed_values": fixed,
        "boundary": BoundaryCondition.DIRICHLET_ZERO,
    }

    return HeatSolver(params).solve(np.zeros(grid.cells[0]), p.dt, p.steps)


# **************************************************************************************


def _flux_at_R(w: SpaceTimeField) -> NDArray[np.float64]:
    # One-sided second-order difference at the last node, per slice:
    s = w.slices
    return np.abs(3.0 * s[:, -1] - 4.0 * s[:, -2] + s[:, -3]) / (2.0 * w.grid.spacing)


# **************************************************************************************


class FluxBoundReport(BaseModel):
    times: List[float]

    flux: List[float]

    envelope: List[float]

    slack: float

    passed: bool

    # The first time at which the flux exceeds envelope plus slack:
    first_failure: Optional[float] = None


# **************************************************************************************


def _flux_report(
    times: NDArray[np.float64],
    flux: NDArray[np.float64],
    bound: NDArray[np.float64],
    slack: float,
) -> FluxBoundReport:
    failing = np.nonzero(flux > bound + slack)[0]

    first = float(times[failing[0]]) if failing.size else None

    if first is not None:
        logging.warning(f"flux exceeds the envelope from t={first}")

    return FluxBoundReport(
        times=[float(t) for t in times],
        flux=[float(f) for f in flux],
        envelope=[float(b) for b in bound],
        slack=slack,
        passed=first is None,
        first_failure=first,
    )


# **************************************************************************************


def check_flux_bound(w: SpaceTimeField, p: BarrierParams) -> FluxBoundReport:
    """
    Compare the numeric flux of w at x = R against the envelope at every t > 0, with
    slack 10 h^2 max|w| / h.
    """
    times = w.times[1:]

    flux = _flux_at_R(w)[1:]

    h = w.grid.spacing

    slack = 10.0 * h * float(np.max(np.abs(w.slices)))

    return _flux_report(times, flux, envelope(times, p.R), slack)


# **************************************************************************************


def barrier_table(
    p: BarrierParams, w: Optional[SpaceTimeField] = None
) -> List[Tuple[float, float, float, float]]:
    """
    Rows (t, numeric flux at R, closed-form flux at R, envelope) for every t > 0, from
    w when given and from a fresh solve_w otherwise.
    """
    if w is None:
        w = solve_w(p)

    times = w.times[1:]

    numeric = _flux_at_R(w)[1:]

    exact = wtilde_dx_at_R(times, p.R)

    bound = envelope(times, p.R)

    return [
        (float(t), float(n), float(c), float(b))
        for t, n, c, b in zip(times, numeric, exact, bound)
    ]


# **************************************************************************************

# A diffusion coefficient d(t) with kappa <= d <= 1:
TimeCoefficient = Callable[[float], float]

CoefficientKind = Literal["unit", "constant", "oscillatory"]

# **************************************************************************************


class ComparisonCoefficient(BaseModel):
    """
    The coefficient d of the comparison problem d * laplacian(h) = h_t.
    """

    kind: CoefficientKind = "unit"

    kappa: float = PydanticField(default=0.3, gt=0.0, le=1.0)

    period: float = PydanticField(default=0.1, gt=0.0)

    def __call__(self, t: float) -> float:
        if self.kind == "unit":
            return 1.0

        if self.kind == "constant":
            return self.kappa

        oscillation = 0.5 * (1.0 + np.sin(2.0 * pi * t / self.period))

        return float(self.kappa + (1.0 - self.kappa) * oscillation)


# **************************************************************************************


def solve_comparison_problem(
    f: Field,
    ball: BallDomain,
    d: TimeCoefficient,
    dt: float,
    steps: int,
) -> SpaceTimeField:
    """
    Implicit Euler for h_t = d(t) laplacian(h) on the ball interior with h = 0 outside.
    """
    params: BaseParabolicSolverParameters = {
        "grid": ball.grid,
        "free": ball.interior,
        "boundary": BoundaryCondition.DIRICHLET_ZERO,
    }

    return VariableCoefficientSolver(params, d).solve(
        ball.restrict(f.values), dt, steps
    )


# **************************************************************************************


class ComparisonReport(BaseModel):
    # The largest value of h - W over D = B(R) and {x_1 > 1}, over all times:
    max_excess: float

    comparison_passed: bool

    # The largest |dh/dn| - C exp(-R^2 / 8t) over the shell and t > 0:
    flux_excess: float

    flux_passed: bool

    slack: float

    rotation_discrepancy: Optional[float] = None

    @property
    def passed(self) -> bool:
        return self.comparison_passed and self.flux_passed


# **************************************************************************************


def half_space_barrier(history: SpaceTimeField, ball: BallDomain) -> NDArray[np.float64]:
    """
    W(x, t) = w(x_1, t) on the grid of a two-dimensional history, where w is the
    discrete barrier on [1, R_b] with R_b one cell beyond the ball in x_1, and W = 1
    for x_1 <= 1.

    Raises:
        ValueError: If 1 is not a whole number of cells away from a cell centre.
    """
    grid = history.grid

    h = grid.spacing

    x1 = grid.axes()[0]

    if abs(1.0 / h - round(1.0 / h)) > 1e-9 or np.min(np.abs(x1 - 1.0)) > 1e-9 * h:
        raise ValueError("the half-space barrier needs cell centres on multiples of 1/h")

    centres = grid.centers()[..., 0]

    R_b = float(np.max(centres[ball.interior])) + h

    p = BarrierParams(
        R=R_b, T=history.t_end - history.t_start, spacing=h, steps=history.n_slices - 1
    )

    w = solve_w(p)

    # Index of each x_1 column in the barrier grid, clipped to W = 1 and W = 0 beyond:
    index = np.rint((x1 - 1.0) / h).astype(int)

    columns = np.where(
        index[None, :] < 0,
        1.0,
        np.where(
            index[None, :] >= w.grid.cells[0],
            0.0,
            w.slices[:, np.clip(index, 0, w.grid.cells[0] - 1)],
        ),
    )

    return np.broadcast_to(columns[:, :, None], history.slices.shape).copy()


# **************************************************************************************


def _shell_flux(history: SpaceTimeField, ball: BallDomain) -> NDArray[np.float64]:
    return np.abs(normal_derivative(history.slices, ball, zero_at="shell"))


# **************************************************************************************


def comparison_h_vs_W(
    history: SpaceTimeField,
    ball: BallDomain,
    rotated: Optional[SpaceTimeField] = None,
) -> ComparisonReport:
    """
    Check h <= W on B(R) and {x_1 > 1}, and the shell flux against
    (4 / sqrt(pi)) exp(-R^2 / 8t), each up to slack 10 h max|h|.

    With a history from the datum rotated by 90 degrees, also report the largest
    difference of the per-time maximum shell flux between the two runs.
    """
    if history.grid.dim != 2:
        raise ValueError("the comparison check runs in two dimensions")

    h = history.grid.spacing

    W = half_space_barrier(history, ball)

    x1 = history.grid.centers()[..., 0]

    domain = ball.interior & (x1 > 1.0 + 1e-9 * h)

    slack = 10.0 * h * max(float(np.max(np.abs(history.slices))), 1e-300)

    excess = (
        float(np.max((history.slices - W)[:, domain])) if np.any(domain) else -np.inf
    )

    times = history.times[1:]

    flux = _shell_flux(history, ball)[1:]

    bound = envelope(times, ball.radius)[:, None]

    flux_excess = float(np.max(flux - bound))

    discrepancy: Optional[float] = None

    if rotated is not None:
        discrepancy = rotation_discrepancy(history, rotated, ball)

    return ComparisonReport(
        max_excess=excess,
        comparison_passed=excess <= slack,
        flux_excess=flux_excess,
        flux_passed=flux_excess <= slack,
        slack=slack,
        rotation_discrepancy=discrepancy,
    )


# **************************************************************************************


def rotate_field(f: Field) -> Field:
    """
    Rotate a two-dimensional field by 90 degrees about the origin of a symmetric grid.
    """
    return Field(grid=f.grid, values=np.rot90(f.values), time_tag=f.time_tag)


# **************************************************************************************


def rotation_discrepancy(
    history: SpaceTimeField, rotated: SpaceTimeField, ball: BallDomain
) -> float:
    """
    The largest difference, over times, of the maximum shell flux of two runs.
    """
    first = np.max(_shell_flux(history, ball), axis=-1)
    second = np.max(_shell_flux(rotated, ball), axis=-1)
    return float(np.max(np.abs(first - second)))


# **************************************************************************************


class RestartReport(BaseModel):
    T1: float

    flux: FluxBoundReport

    # The largest r - W over the ball when a barrier is supplied:
    max_excess: Optional[float] = None


# **************************************************************************************


def restart_bound(
    h_at_T1: Field,
    ball: BallDomain,
    T1: float,
    T: float,
    steps: int,
    barrier: Optional[SpaceTimeField] = None,
) -> RestartReport:
    """
    Continue from h(., T1) with the constant-coefficient heat equation on B(R) over
    (T1, T] and check the shell flux against C exp(-R^2 / 8t).

    Raises:
        ValueError: If T <= T1.
    """
    if not T > T1:
        raise ValueError("the restart needs T > T1")

    params: BaseParabolicSolverParameters = {
        "grid": ball.grid,
        "free": ball.interior,
        "boundary": BoundaryCondition.DIRICHLET_ZERO,
    }

    r = HeatSolver(params).solve(
        ball.restrict(h_at_T1.values), (T - T1) / steps, steps, s_start=T1
    )

    times = r.times[1:]

    flux = np.max(_shell_flux(r, ball)[1:], axis=-1)

    h = ball.grid.spacing

    slack = 10.0 * h * max(float(np.max(np.abs(r.slices))), 1e-300)

    excess: Optional[float] = None

    if barrier is not None:
        excess = float(np.max((r.slices - barrier)[:, ball.interior]))

    return RestartReport(
        T1=T1,
        flux=_flux_report(times, flux, envelope(times, ball.radius), slack),
        max_excess=excess,
    )


# **************************************************************************************
