# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import logging
from itertools import count
from math import ceil, exp, sqrt
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator
from scipy import sparse

from .barriers import ENVELOPE_CONSTANT, admissible_radius
from .base import BaseParabolicSolverParameters, HeatSolver, VariableCoefficientSolver
from .common import BoundaryCondition
from .grid import (
    BallDomain,
    Field,
    SpaceTimeField,
    gaussian_weight,
    gradient_norm_squared,
    laplacian_matrix,
    normal_derivative,
    shell_time_integral,
    weighted_l1,
)
from .nonlinearity import Nonlinearity, difference_quotient
from .representation import MollifierSpec, mollifier_kernel, smooth_values
from .utils import dyadic_sequence

# **************************************************************************************

Verdict = Literal["PASS", "FAIL", "UNREACHABLE"]

# **************************************************************************************

TERMS = ("I1", "I2", "I3", "II", "III")

# **************************************************************************************


def _check_pair(u: SpaceTimeField, v: SpaceTimeField) -> None:
    if (
        u.grid != v.grid
        or u.n_slices != v.n_slices
        or abs(u.dt - v.dt) > 1e-12 * u.dt
        or abs(u.t_start - v.t_start) > 1e-12 * max(1.0, u.dt)
    ):
        raise ValueError("u and v must share a grid and a time mesh")


# **************************************************************************************


def _apply_laplacian(
    slices: NDArray[np.float64], operator: sparse.csr_matrix
) -> NDArray[np.float64]:
    # The Dirichlet-zero operator applied to every slice of a (time, space...) array:
    flat = slices.reshape(slices.shape[0], -1)
    return (operator @ flat.T).T.reshape(slices.shape)


# **************************************************************************************


def _effective_slope(nl: Nonlinearity) -> float:
    # The q problem needs a positive diffusivity; a = 0 falls back to the heat equation:
    return nl.slope_at_infinity if nl.slope_at_infinity > 0 else 1.0


# **************************************************************************************


def _time_scale(nl: Nonlinearity) -> float:
    # Coefficients up to L slow the envelope by L; below 1 the unit barrier applies:
    return max(nl.lipschitz, 1.0)


# **************************************************************************************


class DualCoefficient(BaseModel):
    """
    The difference quotient c, its floored and smoothed regularization c_m >= 1/m, and
    j = sum |c - c_m|^2 / c_m over the region it was measured on.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    c: SpaceTimeField

    m: float = PydanticField(..., ge=1.0)

    c_m: SpaceTimeField

    j_value: float = PydanticField(..., ge=0.0)

    @property
    def floor(self) -> float:
        return 1.0 / self.m


# **************************************************************************************


def build_c(u: SpaceTimeField, v: SpaceTimeField, nl: Nonlinearity) -> SpaceTimeField:
    """
    The quotient (alpha(u) - alpha(v)) / (u - v), with 0 wherever u == v exactly.
    """
    _check_pair(u, v)

    return u.map(lambda slices: difference_quotient(nl, slices, v.slices))


# **************************************************************************************


def _slice_range(field: SpaceTimeField, t1: float, t2: float) -> Tuple[int, int]:
    return field.index_of(t1, exact=True), field.index_of(t2, exact=True)


# **************************************************************************************


def floor_and_smooth(
    c: SpaceTimeField,
    m: float,
    ball: Optional[BallDomain] = None,
    window: Optional[Tuple[float, float]] = None,
) -> DualCoefficient:
    """
    Clamp c below at 1/m, smooth with the mass-normalized space-time mollifier at
    scale 1/m (mirrored at every boundary), and clamp again.

    The j value sums |c - c_m|^2 / c_m times dt and the cell volume over the ball
    interior (the whole grid without a ball) and over the slices t1 <= t < t2 of the
    window (every slice without one).
    """
    if not m >= 1.0:
        raise ValueError("the regularization index m must be at least 1")

    floor = 1.0 / m

    clamped = np.maximum(c.slices, floor)

    kernel = mollifier_kernel(MollifierSpec(m=m), c.grid.spacing, c.dt, c.grid.dim)

    smoothed = np.maximum(smooth_values(clamped, kernel), floor)

    c_m = c.map(lambda _: smoothed)

    quotient = (c.slices - smoothed) ** 2 / smoothed

    if ball is not None:
        quotient = np.where(ball.interior, quotient, 0.0)

    if window is not None:
        k1, k2 = _slice_range(c, *window)
        quotient = quotient[k1:k2]

    j_value = float(np.sum(quotient) * c.dt * c.grid.cell_volume)

    return DualCoefficient(c=c, m=m, c_m=c_m, j_value=j_value)


# **************************************************************************************


def solve_dual(
    cm: DualCoefficient, theta: Field, ball: BallDomain, t0: float, delta: float
) -> SpaceTimeField:
    """
    Solve phi_t + c_m laplacian(phi) = 0 on the ball backward from phi(t0) = theta to
    t = delta, with phi = 0 outside the ball.

    Each backward step solves (I - dt diag(c_m(t_{k-1})) L) phi_{k-1} = phi_k.

    Returns:
        SpaceTimeField: phi on the slices delta, ..., t0 in increasing time.
    """
    k_delta, k0 = _slice_range(cm.c_m, delta, t0)

    if not k_delta < k0:
        raise ValueError("solve_dual requires delta < t0")

    params: BaseParabolicSolverParameters = {
        "grid": ball.grid,
        "free": ball.interior,
        "boundary": BoundaryCondition.DIRICHLET_ZERO,
    }

    # Step s of the reversed solve produces slice k0 - s:
    coefficients = [cm.c_m.slices[k0 - s] for s in range(k0 - k_delta + 1)]

    reversed_history = VariableCoefficientSolver(params, coefficients).solve(
        ball.restrict(theta.values), cm.c_m.dt, k0 - k_delta
    )

    return SpaceTimeField(
        grid=ball.grid,
        t_start=float(cm.c_m.times[k_delta]),
        dt=cm.c_m.dt,
        slices=reversed_history.slices[::-1].copy(),
    )


# **************************************************************************************


class EnergyBalance(BaseModel):
    """
    The discrete energy identity of the dual problem:

    half_gradient_at_delta + dissipation <= half_gradient_at_t0, with an O(dt) gap.
    """

    half_gradient_at_delta: float

    dissipation: float

    half_gradient_at_t0: float

    @property
    def lhs(self) -> float:
        return self.half_gradient_at_delta + self.dissipation

    @property
    def rhs(self) -> float:
        return self.half_gradient_at_t0

    @property
    def residual(self) -> float:
        return self.rhs - self.lhs


# **************************************************************************************


def energy_identity(
    phi: SpaceTimeField, cm: DualCoefficient, ball: BallDomain
) -> EnergyBalance:
    """
    Evaluate both sides of the dual energy identity with the forward-difference gradient
    and the stencil Laplacian, summing c_m |L phi|^2 over the slices delta <= t < t0.
    """
    grid = phi.grid

    L = laplacian_matrix(grid, BoundaryCondition.DIRICHLET_ZERO)

    k_delta = cm.c_m.index_of(phi.t_start, exact=True)

    lap = _apply_laplacian(phi.slices[:-1], L)

    coefficient = cm.c_m.slices[k_delta : k_delta + phi.n_slices - 1]

    dissipation = float(
        np.sum(np.where(ball.interior, coefficient * lap**2, 0.0))
        * phi.dt
        * grid.cell_volume
    )

    return EnergyBalance(
        half_gradient_at_delta=0.5 * gradient_norm_squared(phi.slices[0], grid),
        dissipation=dissipation,
        half_gradient_at_t0=0.5 * gradient_norm_squared(phi.slices[-1], grid),
    )


# **************************************************************************************


class TermEstimate(BaseModel):
    name: str

    computed: float

    bound: float

    slack: float = 0.0

    budget: Optional[float] = None

    # The signed value entering the decomposition of the target pairing:
    signed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.computed <= self.bound + self.slack


# **************************************************************************************


def _slack(grid_spacing: float, dt: float, scale: float, constant: float = 10.0) -> float:
    return constant * (grid_spacing**2 + dt) * scale


# **************************************************************************************


def _max_difference(
    u: SpaceTimeField, v: SpaceTimeField, ball: BallDomain, k1: int = 0, k2: Optional[int] = None
) -> float:
    difference = np.abs(u.slices[k1:k2] - v.slices[k1:k2])
    if difference.size == 0:
        return 0.0
    return float(np.max(np.where(ball.interior, difference, 0.0)))


# **************************************************************************************


def l1_uniform_bound(
    u: SpaceTimeField, v: SpaceTimeField, K: NDArray[np.bool_]
) -> float:
    """
    The supremum over stored slices of the L1 distance between u and v on the cells K.
    """
    _check_pair(u, v)

    per_slice = np.sum(
        np.where(K, np.abs(u.slices - v.slices), 0.0),
        axis=tuple(range(1, u.grid.dim + 1)),
    )

    return float(np.max(per_slice) * u.grid.cell_volume)


# **************************************************************************************


def bound_III(
    u: SpaceTimeField,
    v: SpaceTimeField,
    phi: SpaceTimeField,
    cm: DualCoefficient,
    ball: BallDomain,
    nl: Nonlinearity,
    delta: float,
    t0: float,
) -> TermEstimate:
    """
    The volume term sum dt [L phi (alpha(u) - alpha(v)) + phi_t (u - v)] over the ball
    and the slices delta <= t < t0, against max|u - v| (dissipation)^(1/2) j^(1/2).

    On these slices the summand equals (c - c_m) L phi (u - v). The bound is the
    Cauchy-Schwarz inequality with |u - v|^2 kept inside the j sum, which is at most the
    product above and holds exactly.
    """
    k_delta, k0 = _slice_range(u, delta, t0)

    grid = u.grid

    L = laplacian_matrix(grid, BoundaryCondition.DIRICHLET_ZERO)

    lap = _apply_laplacian(phi.slices[:-1], L)

    rate = np.diff(phi.slices, axis=0) / phi.dt

    du = u.slices[k_delta:k0] - v.slices[k_delta:k0]

    da = nl.evaluate(u.slices[k_delta:k0]) - nl.evaluate(v.slices[k_delta:k0])

    summand = np.where(ball.interior, lap * da + rate * du, 0.0)

    signed = float(np.sum(summand) * u.dt * grid.cell_volume)

    energy = energy_identity(phi, cm, ball)

    c, c_m = cm.c.slices[k_delta:k0], cm.c_m.slices[k_delta:k0]

    weighted = float(
        np.sum(np.where(ball.interior, (c - c_m) ** 2 / c_m * du**2, 0.0))
        * u.dt
        * grid.cell_volume
    )

    bound = min(
        _max_difference(u, v, ball, k_delta, k0) * sqrt(j_on_window(cm, ball, delta, t0)),
        sqrt(weighted),
    ) * sqrt(max(energy.dissipation, 0.0))

    return TermEstimate(name="III", computed=abs(signed), bound=bound, signed=signed)


# **************************************************************************************


def j_on_window(
    cm: DualCoefficient, ball: BallDomain, delta: float, t0: float
) -> float:
    """
    j = sum |c - c_m|^2 / c_m over the ball interior and the slices delta <= t < t0.
    """
    k_delta, k0 = _slice_range(cm.c_m, delta, t0)

    quotient = (cm.c.slices[k_delta:k0] - cm.c_m.slices[k_delta:k0]) ** 2 / cm.c_m.slices[
        k_delta:k0
    ]

    return float(
        np.sum(np.where(ball.interior, quotient, 0.0)) * cm.c_m.dt * cm.c_m.grid.cell_volume
    )


# **************************************************************************************


def _temperature_gap(
    u: SpaceTimeField, v: SpaceTimeField, nl: Nonlinearity
) -> SpaceTimeField:
    return u.map(lambda slices: np.abs(nl.evaluate(slices) - nl.evaluate(v.slices)))


# **************************************************************************************


def _shell_term(
    flux: NDArray[np.float64],
    u: SpaceTimeField,
    v: SpaceTimeField,
    ball: BallDomain,
    nl: Nonlinearity,
    k1: int,
    k2: int,
) -> float:
    # sum over slices k1 < k <= k2 of dt * sum_shell s * flux * (alpha(u) - alpha(v)):
    da = ball.on_shell(nl.evaluate(u.slices[k1 + 1 : k2 + 1])) - ball.on_shell(
        nl.evaluate(v.slices[k1 + 1 : k2 + 1])
    )
    return float(np.sum(flux * da * ball.shell_weights) * u.dt)


# **************************************************************************************


def shell_envelope_bound(
    u: SpaceTimeField,
    v: SpaceTimeField,
    ball: BallDomain,
    nl: Nonlinearity,
    gauss_c: float,
    theta_sup: float,
    t1: float,
    t2: float,
    time_to_go: float,
) -> float:
    """
    C |theta|_inf exp(c R_s^2 - R^2 / (8 L' s)) times the Gaussian-weighted shell
    integral of |alpha(u) - alpha(v)| over (t1, t2], where s is the largest time to go,
    R_s the outermost shell centre and L' = max(L, 1).
    """
    weighted = shell_time_integral(
        _temperature_gap(u, v, nl),
        ball,
        t1,
        t2,
        weight=gaussian_weight(u.grid, gauss_c),
    )

    if weighted == 0.0:
        return 0.0

    exponent = gauss_c * ball.shell_radius**2 - ball.radius**2 / (
        8.0 * _time_scale(nl) * time_to_go
    )

    return ENVELOPE_CONSTANT * theta_sup * exp(exponent) * weighted


# **************************************************************************************


def _shell_scale(
    u: SpaceTimeField, v: SpaceTimeField, ball: BallDomain, nl: Nonlinearity, t1: float, t2: float
) -> float:
    return shell_time_integral(_temperature_gap(u, v, nl), ball, t1, t2)


# **************************************************************************************


def bound_II(
    u: SpaceTimeField,
    v: SpaceTimeField,
    phi: SpaceTimeField,
    ball: BallDomain,
    nl: Nonlinearity,
    gauss_c: float,
    theta_sup: float,
    delta: float,
    t0: float,
) -> TermEstimate:
    """
    The shell term -sum dt sum_shell s dphi/dn (alpha(u) - alpha(v)) over (delta, t0],
    against the barrier envelope times the Gaussian-weighted shell integral.

    Raises:
        ValueError: If t0 >= 1 / (8c).
    """
    if not t0 < 1.0 / (8.0 * gauss_c):
        raise ValueError("t0 must satisfy t0 < 1/(8c)")

    k_delta, k0 = _slice_range(u, delta, t0)

    flux = normal_derivative(phi.slices[1:], ball, zero_at="shell")

    signed = -_shell_term(flux, u, v, ball, nl, k_delta, k0)

    bound = shell_envelope_bound(u, v, ball, nl, gauss_c, theta_sup, delta, t0, t0 - delta)

    scale = theta_sup * _shell_scale(u, v, ball, nl, delta, t0)

    return TermEstimate(
        name="II",
        computed=abs(signed),
        bound=bound,
        slack=_slack(u.grid.spacing, u.dt, scale),
        signed=signed,
    )


# **************************************************************************************


class ShellScan(BaseModel):
    """
    The discrete shell set: radii R >= L_min (multiples of h fitting in the grid) with
    the Gaussian-weighted shell integral at most M / R^n and R barrier-admissible.
    """

    M: float

    candidates: List[float]

    qualifying: List[float]

    admissible_from: float


# **************************************************************************************


def candidate_radii(grid_spacing: float, L_min: float) -> Iterator[float]:
    """
    The multiples of h from L_min outward, without end.
    """
    start = max(int(ceil(L_min / grid_spacing - 1e-9)), 2)
    return (k * grid_spacing for k in count(start))


# **************************************************************************************


def scan_shells(
    u: SpaceTimeField,
    v: SpaceTimeField,
    nl: Nonlinearity,
    gauss_c: float,
    L_min: float,
    t0: float,
) -> ShellScan:
    """
    Scan every grid shell R >= L_min that fits in the grid, using
    M = integral of (|alpha(u)| + |alpha(v)|) exp(-c |x|^2) over (0, t0].
    """
    _check_pair(u, v)

    both = u.map(lambda slices: np.abs(nl.evaluate(slices)) + np.abs(nl.evaluate(v.slices)))

    M = weighted_l1(both, gauss_c, window=(u.t_start, t0))

    weight = gaussian_weight(u.grid, gauss_c)

    R0 = admissible_radius(_time_scale(nl) * t0)

    candidates: List[float] = []
    qualifying: List[float] = []

    for R in candidate_radii(u.grid.spacing, L_min):
        try:
            ball = BallDomain(grid=u.grid, radius=R)
        except ValueError:
            break

        candidates.append(R)

        S = shell_time_integral(both, ball, u.t_start, t0, weight=weight)

        if S <= M / R**u.grid.dim and R >= R0:
            qualifying.append(R)

    return ShellScan(M=M, candidates=candidates, qualifying=qualifying, admissible_from=R0)


# **************************************************************************************


def choose_R(
    u: SpaceTimeField,
    v: SpaceTimeField,
    nl: Nonlinearity,
    gauss_c: float,
    L_min: float,
    t0: float,
) -> float:
    """
    The smallest qualifying shell radius.

    Raises:
        ValueError: If no shell inside the grid qualifies.
    """
    scan = scan_shells(u, v, nl, gauss_c, L_min, t0)

    if not scan.qualifying:
        raise ValueError(
            f"no qualifying shell R >= {max(L_min, scan.admissible_from)} inside the grid; "
            "enlarge the truncation box"
        )

    return scan.qualifying[0]


# **************************************************************************************


def solve_q(
    phi_at_delta: Field,
    ball: BallDomain,
    delta: float,
    dt: float,
    diffusivity: float = 1.0,
    t_stop: float = 0.0,
) -> SpaceTimeField:
    """
    Solve q_t + diffusivity * laplacian(q) = 0 on the ball backward from q(delta) =
    phi(delta) to t_stop, with q = 0 outside the ball.

    Returns:
        SpaceTimeField: q on t_stop, ..., delta in increasing time.
    """
    steps = int(round((delta - t_stop) / dt))

    if steps < 1 or abs(t_stop + steps * dt - delta) > 1e-9 * max(1.0, delta):
        raise ValueError("delta - t_stop must be a positive multiple of dt")

    params: BaseParabolicSolverParameters = {
        "grid": ball.grid,
        "free": ball.interior,
        "boundary": BoundaryCondition.DIRICHLET_ZERO,
    }

    reversed_history = HeatSolver(params, diffusivity).solve(
        ball.restrict(phi_at_delta.values), dt, steps
    )

    return SpaceTimeField(
        grid=ball.grid,
        t_start=t_stop,
        dt=dt,
        slices=reversed_history.slices[::-1].copy(),
    )


# **************************************************************************************


class EnergyChain(BaseModel):
    """
    sum |L q|^2 over (gamma, delta) <= |grad phi(delta)|^2 / 2a <= |grad theta|^2 / 2a.
    """

    q_dissipation: float

    phi_energy: float

    theta_energy: float

    @property
    def holds(self) -> bool:
        tolerance = 1e-12 * max(1.0, self.theta_energy)
        return (
            self.q_dissipation <= self.phi_energy + tolerance
            and self.phi_energy <= self.theta_energy + tolerance
        )


# **************************************************************************************


def _theta_energy(theta: Field, ball: BallDomain) -> float:
    return 0.5 * gradient_norm_squared(ball.restrict(theta.values), theta.grid)


# **************************************************************************************


def I3_bound(
    u: SpaceTimeField,
    v: SpaceTimeField,
    ball: BallDomain,
    nl: Nonlinearity,
    theta: Field,
    delta: float,
    gamma: Optional[float] = None,
) -> float:
    """
    D3 sqrt(|B| delta) (|grad theta|^2 / 2a)^(1/2) with D3 = min(2B, (L + a) max|u - v|),
    the maximum taken over the ball and the slices gamma <= t < delta of the term's
    window. Without gamma the window starts one step after t_start, the smallest gamma
    the certificate sweeps, so the bound covers every later choice of gamma.
    """
    a = _effective_slope(nl)

    k_gamma = u.index_of(u.t_start + u.dt if gamma is None else gamma, exact=True)

    D3 = min(
        2.0 * nl.offset_bound,
        (nl.lipschitz + nl.slope_at_infinity)
        * _max_difference(u, v, ball, k_gamma, u.index_of(delta, exact=True)),
    )

    return D3 * sqrt(ball.volume * delta) * sqrt(_theta_energy(theta, ball) / a)


# **************************************************************************************


def bound_I3(
    q: SpaceTimeField,
    u: SpaceTimeField,
    v: SpaceTimeField,
    ball: BallDomain,
    nl: Nonlinearity,
    theta: Field,
    gamma: float,
    delta: float,
) -> Tuple[TermEstimate, EnergyChain]:
    """
    The volume term sum dt L q [(alpha(u) - alpha(v)) - a (u - v)] over the ball and the
    slices gamma <= t < delta, and the energy chain.

    The bound is the smaller of the closed form on the term's window and the
    Cauchy-Schwarz bound |gap|_L2 (|grad theta|^2 / 2a)^(1/2) with the measured gap,
    which vanishes on cells where u and v sit on segments of alpha with slope a.
    """
    a = _effective_slope(nl)

    grid = u.grid

    k_gamma, k_delta = _slice_range(u, gamma, delta)
    q_gamma, q_delta = _slice_range(q, gamma, delta)

    L = laplacian_matrix(grid, BoundaryCondition.DIRICHLET_ZERO)

    lap = _apply_laplacian(q.slices[q_gamma:q_delta], L)

    uk, vk = u.slices[k_gamma:k_delta], v.slices[k_gamma:k_delta]

    gap = (nl.evaluate(uk) - nl.evaluate(vk)) - nl.slope_at_infinity * (uk - vk)

    signed = float(
        np.sum(np.where(ball.interior, lap * gap, 0.0)) * u.dt * grid.cell_volume
    )

    chain = EnergyChain(
        q_dissipation=float(
            np.sum(np.where(ball.interior, lap**2, 0.0)) * u.dt * grid.cell_volume
        ),
        phi_energy=0.5 * gradient_norm_squared(q.slices[q_delta], grid) / a,
        theta_energy=_theta_energy(theta, ball) / a,
    )

    gap_norm = sqrt(
        float(np.sum(np.where(ball.interior, gap**2, 0.0)) * u.dt * grid.cell_volume)
    )

    # sum |L q|^2 is at most the theta energy whenever the chain holds:
    measured = gap_norm * sqrt(max(chain.q_dissipation, chain.theta_energy))

    scale = float(np.max(theta.values)) * l1_uniform_bound(u, v, ball.interior)

    return (
        TermEstimate(
            name="I3",
            computed=abs(signed),
            bound=min(I3_bound(u, v, ball, nl, theta, delta, gamma), measured),
            slack=_slack(grid.spacing, u.dt, scale),
            signed=signed,
        ),
        chain,
    )


# **************************************************************************************


def bound_I2(
    q: SpaceTimeField,
    u: SpaceTimeField,
    v: SpaceTimeField,
    ball: BallDomain,
    nl: Nonlinearity,
    gauss_c: float,
    theta_sup: float,
    gamma: float,
    delta: float,
    t0: float,
) -> TermEstimate:
    """
    The shell term of q over (gamma, delta], bounded like II with time to go t0 - gamma.
    """
    k_gamma, k_delta = _slice_range(u, gamma, delta)
    q_gamma, q_delta = _slice_range(q, gamma, delta)

    flux = normal_derivative(q.slices[q_gamma + 1 : q_delta + 1], ball, zero_at="shell")

    signed = -_shell_term(flux, u, v, ball, nl, k_gamma, k_delta)

    bound = shell_envelope_bound(
        u, v, ball, nl, gauss_c, theta_sup, gamma, delta, t0 - gamma
    )

    scale = theta_sup * _shell_scale(u, v, ball, nl, gamma, delta)

    return TermEstimate(
        name="I2",
        computed=abs(signed),
        bound=bound,
        slack=_slack(u.grid.spacing, u.dt, scale),
        signed=signed,
    )


# **************************************************************************************


class I1Split(BaseModel):
    # (u - v)(gamma) paired with q(gamma) - q(0):
    first: float

    # (u - v)(gamma) paired with q(0), the initial-trace summand:
    second: float

    # sup_t |u - v|_L1(B) max|q(gamma) - q(0)|:
    first_bound: float

    @property
    def term(self) -> float:
        return self.first + self.second


# **************************************************************************************


def eval_I1(
    u: SpaceTimeField, v: SpaceTimeField, q: SpaceTimeField, ball: BallDomain, gamma: float
) -> I1Split:
    """
    Split the pairing of (u - v)(gamma) with q(gamma) into its q(gamma) - q(0) and
    q(0) parts.
    """
    k = u.index_of(gamma, exact=True)

    j = q.index_of(gamma, exact=True)

    difference = np.where(ball.interior, u.slices[k] - v.slices[k], 0.0)

    drift = q.slices[j] - q.slices[0]

    volume = u.grid.cell_volume

    return I1Split(
        first=float(np.sum(difference * drift) * volume),
        second=float(np.sum(difference * q.slices[0]) * volume),
        first_bound=l1_uniform_bound(u, v, ball.interior)
        * float(np.max(np.abs(np.where(ball.interior, drift, 0.0)))),
    )


# **************************************************************************************


def trace_obstruction(
    sweep: Sequence[Tuple[float, float]], slack: float
) -> Optional[str]:
    """
    Judge the initial-trace summand of I1 along a gamma sweep, largest gamma first.

    With a shared initial trace the summand tends to 0 with gamma. It is an obstruction
    when at the smallest gamma it still exceeds the slack and has not fallen below half
    of its largest magnitude along the sweep. Neither test involves eps.
    """
    if not sweep:
        return None

    gamma, last = sweep[-1]

    peak = max(abs(summand) for _, summand in sweep)

    if abs(last) <= slack or abs(last) < 0.5 * peak:
        return None

    return (
        f"initial-trace summand of I1 stays at {last:.3e} down to gamma={gamma} "
        f"(slack {slack:.3e}, largest {peak:.3e}); u and v appear to have different "
        "initial data"
    )


# **************************************************************************************


class Schedule(BaseModel):
    """
    The certificate parameters, chosen in the order R, delta, m, gamma.
    """

    R: float

    delta: float

    m: float

    gamma: float

    t0: float

    theta: str

    budgets: Dict[str, float]

    @model_validator(mode="after")
    def validate_order(self) -> "Schedule":
        if not 0 < self.gamma < self.delta < self.t0:
            raise ValueError("the schedule must satisfy 0 < gamma < delta < t0")

        return self


# **************************************************************************************


class CertificateReport(BaseModel):
    verdict: Verdict

    eps: float

    t0: float

    schedule: Optional[Schedule] = None

    terms: List[TermEstimate] = PydanticField(default_factory=list)

    energy: Optional[EnergyBalance] = None

    chain: Optional[EnergyChain] = None

    # |sum (u - v)(t0) theta| on the grid:
    target: float = 0.0

    # |target - sum of the signed terms|, and its O(h^2 + dt) slack:
    decomposition_defect: float = 0.0

    decomposition_slack: float = 0.0

    # (gamma, initial-trace summand of I1) over the whole gamma sweep, largest first:
    trace_sweep: List[Tuple[float, float]] = PydanticField(default_factory=list)

    qualifying_radii: List[float] = PydanticField(default_factory=list)

    binding_constraint: Optional[str] = None

    obstruction: Optional[str] = None

    growth_hypothesis_assumed: bool = False

    @property
    def certified_bound(self) -> float:
        return float(sum(term.bound for term in self.terms))

    @property
    def decomposition_within_slack(self) -> bool:
        return self.decomposition_defect <= self.decomposition_slack

    def term(self, name: str) -> TermEstimate:
        for estimate in self.terms:
            if estimate.name == name:
                return estimate

        raise KeyError(name)

    def to_rows(self) -> List[Tuple[str, float, float, float, float, bool]]:
        """
        One (name, computed, bound, slack, budget, pass) row per term, a
        "decomposition" row with the defect against its slack, then a "certified" row
        pairing the target with the certified bound and eps.
        """
        rows = [
            (
                t.name,
                t.computed,
                t.bound,
                t.slack,
                t.budget if t.budget is not None else float("nan"),
                t.passed,
            )
            for t in self.terms
        ]

        rows.append(
            (
                "decomposition",
                self.decomposition_defect,
                0.0,
                self.decomposition_slack,
                float("nan"),
                self.decomposition_within_slack,
            )
        )

        rows.append(
            (
                "certified",
                self.target,
                self.certified_bound,
                0.0,
                self.eps,
                self.verdict == "PASS",
            )
        )

        return rows


# **************************************************************************************


class CertifyOptions(BaseModel):
    """
    Budgets as fractions of eps, the shell scan start and the sweep lengths.
    """

    budget_fractions: Dict[str, float] = PydanticField(
        default_factory=lambda: {name: 0.2 for name in TERMS}
    )

    L_min: float = PydanticField(default=2.0, gt=0.0)

    m_start: float = PydanticField(default=4.0, ge=1.0)

    delta_levels: int = PydanticField(default=16, ge=1)

    m_levels: int = PydanticField(default=8, ge=1)

    gamma_levels: int = PydanticField(default=16, ge=1)

    @model_validator(mode="after")
    def validate_budgets(self) -> "CertifyOptions":
        if set(self.budget_fractions) != set(TERMS):
            raise ValueError(f"budget fractions must name exactly {list(TERMS)}")

        if any(f <= 0 for f in self.budget_fractions.values()):
            raise ValueError("budget fractions must be positive")

        if sum(self.budget_fractions.values()) > 1.0 + 1e-12:
            raise ValueError("budget fractions must sum to at most 1")

        return self


# **************************************************************************************


def _snap_down(field: SpaceTimeField, t: float) -> float:
    # The largest mesh time at or below t:
    k = int(np.floor((t - field.t_start) / field.dt + 1e-9))
    return float(field.t_start + k * field.dt)


# **************************************************************************************


def _dyadic_mesh_times(
    field: SpaceTimeField, start: float, levels: int, lowest: float
) -> List[float]:
    times: List[float] = []

    t = start

    for _ in range(levels):
        snapped = _snap_down(field, t)

        if snapped < lowest - 1e-12:
            break

        if not times or snapped < times[-1] - 1e-12:
            times.append(snapped)

        t *= 0.5

    return times


# **************************************************************************************


def _validate_inputs(
    u: SpaceTimeField,
    v: SpaceTimeField,
    theta: Field,
    t0: float,
    gauss_c: float,
) -> None:
    _check_pair(u, v)

    if not t0 < min(1.0 / (8.0 * gauss_c), u.t_end):
        raise ValueError(
            f"t0 must satisfy t0 < min{{1/(8c), T}} = {min(1.0 / (8.0 * gauss_c), u.t_end)}"
        )

    u.index_of(t0, exact=True)

    if theta.grid != u.grid:
        raise ValueError("theta must live on the grid of u and v")

    if np.any(theta.values < 0):
        raise ValueError("theta must be nonnegative")

    outside = theta.grid.radius() > 1.0 + 1e-9 * theta.grid.spacing

    if np.any(theta.values[outside] != 0.0):
        raise ValueError("theta must be supported in the unit ball")


# **************************************************************************************


def certify(
    u: SpaceTimeField,
    v: SpaceTimeField,
    theta: Field,
    t0: float,
    eps: float,
    gauss_c: float,
    nl: Nonlinearity,
    options: CertifyOptions = CertifyOptions(),
    theta_name: str = "theta",
) -> CertificateReport:
    """
    Bound |sum (u - v)(t0) theta| by choosing R for the shell terms II and I2, then delta
    for I3, then m for III, then gamma for I1, and summing the five term bounds.

    The verdict is PASS when every computed term sits under its bound plus slack and
    the certified bound is at most eps; FAIL when a term exceeds its bound or the
    initial-trace summand of I1 refuses to vanish; UNREACHABLE when a sweep hits its
    resolution cap before meeting its budget.

    Raises:
        ValueError: If t0 >= min(1/(8c), T), or theta is negative or not supported in
            the unit ball.
    """
    _validate_inputs(u, v, theta, t0, gauss_c)

    budgets = {name: eps * f for name, f in options.budget_fractions.items()}

    theta_sup = float(np.max(theta.values))

    growth = nl.slope_at_infinity != 1.0

    pairing = float(
        np.sum((u.slices[u.index_of(t0)] - v.slices[v.index_of(t0)]) * theta.values)
        * u.grid.cell_volume
    )

    target = abs(pairing)

    binding: List[str] = []

    # R: the smallest qualifying shell whose envelope bound over (0, t0] meets both
    # shell budgets; both later windows and times to go are no larger.
    scan = scan_shells(u, v, nl, gauss_c, options.L_min, t0)

    if not scan.qualifying:
        logging.warning("no qualifying shell inside the grid; the certificate is unreachable")

        return CertificateReport(
            verdict="UNREACHABLE",
            eps=eps,
            t0=t0,
            target=target,
            binding_constraint="R: no qualifying shell inside the grid",
            growth_hypothesis_assumed=growth,
        )

    for R in scan.qualifying:
        ball = BallDomain(grid=u.grid, radius=R)

        pre = shell_envelope_bound(u, v, ball, nl, gauss_c, theta_sup, u.t_start, t0, t0)

        if pre <= min(budgets["II"], budgets["I2"]):
            break
    else:
        binding.append("R: largest qualifying shell misses the II/I2 budgets")

    logging.info(f"certify: chose R={ball.radius} from {len(scan.qualifying)} qualifying shells")

    # delta: closed-form I3 bound, capped at delta >= 4 dt:
    deltas = _dyadic_mesh_times(
        u, _snap_down(u, 0.5 * t0), options.delta_levels, u.t_start + 4.0 * u.dt
    )

    if not deltas:
        raise ValueError("t0 is too small for delta >= 4 dt; refine the time step")

    delta = deltas[-1]

    for candidate in deltas:
        if I3_bound(u, v, ball, nl, theta, candidate) <= budgets["I3"]:
            delta = candidate
            break
    else:
        binding.append("delta: I3 budget unmet at the cap delta >= 4 dt")

    logging.info(f"certify: chose delta={delta}")

    # m: dyadic sweep with 1/m >= 2h, one dual solve each:
    c = build_c(u, v, nl)

    indices = dyadic_sequence(options.m_start, options.m_levels, factor=2.0)
    indices = [m for m in indices if 1.0 / m >= 2.0 * u.grid.spacing - 1e-12] or [
        max(1.0, 1.0 / (2.0 * u.grid.spacing))
    ]

    for m in indices:
        cm = floor_and_smooth(c, m, ball=ball, window=(delta, t0))

        phi = solve_dual(cm, theta, ball, t0, delta)

        III = bound_III(u, v, phi, cm, ball, nl, delta, t0)

        if III.bound <= budgets["III"]:
            break
    else:
        binding.append("m: III budget unmet at the cap 1/m >= 2h")

    logging.info(f"certify: chose m={m}")

    energy = energy_identity(phi, cm, ball)

    II = bound_II(u, v, phi, ball, nl, gauss_c, theta_sup, delta, t0)

    q = solve_q(
        phi.slice(0), ball, delta, u.dt, diffusivity=_effective_slope(nl), t_stop=u.t_start
    )

    # gamma: dyadic from delta / 2, capped at gamma >= dt; the whole sweep is evaluated
    # so the initial-trace summand of I1 can be followed down to the cap:
    gammas = _dyadic_mesh_times(u, 0.5 * delta, options.gamma_levels, u.t_start + u.dt)

    if not gammas:
        raise ValueError("delta is too small for gamma >= dt; refine the time step")

    trials = [(candidate, eval_I1(u, v, q, ball, candidate)) for candidate in gammas]

    trace_sweep = [(candidate, trial.second) for candidate, trial in trials]

    # O(h^2 + dt) allowance shared by I1 and the decomposition of the target:
    trace_slack = _slack(
        u.grid.spacing, u.dt, theta_sup * l1_uniform_bound(u, v, ball.interior)
    )

    obstruction = trace_obstruction(trace_sweep, trace_slack)

    if obstruction is not None:
        logging.warning(obstruction)

    gamma, split = trials[-1]

    for candidate, trial in trials:
        if trial.first_bound + abs(trial.second) <= budgets["I1"]:
            gamma, split = candidate, trial
            break
    else:
        binding.append("gamma: I1 budget unmet at the cap gamma >= dt")

    logging.info(f"certify: chose gamma={gamma}")

    I2 = bound_I2(q, u, v, ball, nl, gauss_c, theta_sup, gamma, delta, t0)

    I3, chain = bound_I3(q, u, v, ball, nl, theta, gamma, delta)

    # The trace summand enters the bound as measured; when it does not vanish with
    # gamma the obstruction above fails the certificate whatever eps is:
    I1 = TermEstimate(
        name="I1",
        computed=abs(split.term),
        bound=split.first_bound + abs(split.second),
        slack=trace_slack,
        signed=split.term,
    )

    terms = []

    for estimate in (I1, I2, I3, II, III):
        terms.append(estimate.model_copy(update={"budget": budgets[estimate.name]}))

    report = CertificateReport(
        verdict="PASS",
        eps=eps,
        t0=t0,
        schedule=Schedule(
            R=ball.radius,
            delta=delta,
            m=m,
            gamma=gamma,
            t0=t0,
            theta=theta_name,
            budgets=budgets,
        ),
        terms=terms,
        energy=energy,
        chain=chain,
        target=target,
        decomposition_defect=abs(pairing - sum(t.signed for t in terms)),
        decomposition_slack=trace_slack,
        trace_sweep=trace_sweep,
        qualifying_radii=scan.qualifying,
        binding_constraint="; ".join(binding) if binding else None,
        obstruction=obstruction,
        growth_hypothesis_assumed=growth,
    )

    if obstruction is not None or not all(t.passed for t in terms):
        verdict: Verdict = "FAIL"
    elif report.certified_bound <= eps:
        verdict = "PASS"
    else:
        verdict = "UNREACHABLE"

        if not binding:
            report.binding_constraint = "sum of the term bounds exceeds eps"

    report.verdict = verdict

    logging.info(
        f"certify: verdict {verdict}, certified bound {report.certified_bound:.3e}, "
        f"target {target:.3e}"
    )

    return report


# **************************************************************************************


class ChainReport(BaseModel):
    windows: List[Tuple[float, float]]

    reports: List[CertificateReport]

    @property
    def chain_ok(self) -> bool:
        return bool(self.reports) and all(r.verdict == "PASS" for r in self.reports)


# **************************************************************************************


def certify_chain(
    u: SpaceTimeField,
    v: SpaceTimeField,
    theta: Field,
    t0: float,
    eps: float,
    gauss_c: float,
    nl: Nonlinearity,
    options: CertifyOptions = CertifyOptions(),
) -> ChainReport:
    """
    Certify the overlapping windows (s, s + t0) for s = 0, t0/2, t0, ... snapped down to
    the time mesh, with s + t0 inside the stored range, each on the histories restarted
    at s. A start that snaps onto the previous one is skipped.
    """
    _check_pair(u, v)

    windows: List[Tuple[float, float]] = []
    reports: List[CertificateReport] = []

    for k in count():
        s = _snap_down(u, u.t_start + 0.5 * k * t0)

        if not s + t0 < u.t_end - 1e-12:
            break

        if windows and s <= windows[-1][0] + 1e-12:
            continue

        restarted_u = u.window(s, u.t_end).shifted(0.0)
        restarted_v = v.window(s, v.t_end).shifted(0.0)

        windows.append((s, s + t0))
        reports.append(
            certify(restarted_u, restarted_v, theta, t0, eps, gauss_c, nl, options)
        )

    return ChainReport(windows=windows, reports=reports)


# **************************************************************************************
