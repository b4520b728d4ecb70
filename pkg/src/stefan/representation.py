# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

from math import pi
from typing import Literal, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, Field as PydanticField
from scipy.signal import fftconvolve
from scipy.special import beta, gamma

from .grid import BallDomain, SpaceTimeField
from .nonlinearity import Nonlinearity
from .testfunctions import SpaceTimeProduct

# **************************************************************************************

MollifierScaling = Literal["mass_normalized", "unit_mass"]

# **************************************************************************************


def bump_mass(dimensions: int) -> float:
    """
    The integral of (1 - |z|^2)_+^4 over R^dimensions: |S^(N-1)| * B(N/2, 5) / 2.
    """
    sphere = 2.0 * pi ** (dimensions / 2.0) / gamma(dimensions / 2.0)
    return float(sphere * 0.5 * beta(dimensions / 2.0, 5.0))


# **************************************************************************************


class MollifierSpec(BaseModel):
    """
    The space-time bump (1 - |z|^2)_+^4 at scale 1/m, with z = m (y, s).
    """

    m: float = PydanticField(..., ge=1.0)

    scaling: MollifierScaling = "mass_normalized"

    @property
    def support_radius(self) -> float:
        return 1.0 / self.m


# **************************************************************************************


def mollifier_kernel(
    spec: MollifierSpec, spacing: float, dt: float, dim: int
) -> NDArray[np.float64]:
    """
    The discrete kernel shaped (2K_t + 1, 2K_x + 1, ...) with time as the first axis.

    Mass-normalized weights sum to 1; the "unit_mass" scaling uses m * phi(m y, m s) with
    phi of unit continuous mass in dim + 1 variables, times the cell volume and dt.
    """
    reach_t = int(np.floor(spec.support_radius / dt + 1e-9))
    reach_x = int(np.floor(spec.support_radius / spacing + 1e-9))

    axes = [dt * np.arange(-reach_t, reach_t + 1)] + [
        spacing * np.arange(-reach_x, reach_x + 1)
    ] * dim

    mesh = np.meshgrid(*axes, indexing="ij")

    z2 = spec.m**2 * sum(axis**2 for axis in mesh)

    bump = np.clip(1.0 - z2, 0.0, None) ** 4

    if spec.scaling == "mass_normalized":
        return bump / np.sum(bump)

    return spec.m * bump / bump_mass(dim + 1) * spacing**dim * dt


# **************************************************************************************


def smooth_values(
    values: NDArray[np.float64], kernel: NDArray[np.float64]
) -> NDArray[np.float64]:
    """
    Convolve a (time, space...) array with a kernel, mirroring at every boundary so the
    output keeps the input's shape.
    """
    width = [(n // 2, n // 2) for n in kernel.shape]

    padded = np.pad(values, width, mode="symmetric")

    return fftconvolve(padded, kernel, mode="valid")


# **************************************************************************************


def _check_margins(
    u: SpaceTimeField,
    spec: MollifierSpec,
    ball: Optional[BallDomain],
    window: Optional[Tuple[float, float]],
) -> None:
    reach = spec.support_radius

    if window is not None:
        t1, t2 = window

        if t1 - reach < u.t_start - 1e-12 or t2 + reach > u.t_end + 1e-12:
            raise ValueError(
                f"window ({t1}, {t2}) lies within 1/m={reach} of the stored time range"
            )

    if ball is not None:
        cells = np.argwhere(ball.interior)

        reach_x = int(np.floor(reach / u.grid.spacing + 1e-9))

        if np.any(cells.min(axis=0) - reach_x < 0) or np.any(
            cells.max(axis=0) + reach_x >= np.array(u.grid.cells)
        ):
            raise ValueError(
                f"ball of radius {ball.radius} lies within 1/m={reach} of the grid box"
            )


# **************************************************************************************


def mollify(
    u: SpaceTimeField,
    spec: MollifierSpec,
    nl: Nonlinearity,
    ball: Optional[BallDomain] = None,
    window: Optional[Tuple[float, float]] = None,
) -> Tuple[SpaceTimeField, SpaceTimeField]:
    """
    Convolve u and alpha(u) with the space-time mollifier.

    When a ball or time window is given, the kernel support around that region must
    stay inside the stored space-time box.

    Raises:
        ValueError: If the queried region lies within 1/m of the boundary.
    """
    _check_margins(u, spec, ball, window)

    kernel = mollifier_kernel(spec, u.grid.spacing, u.dt, u.grid.dim)

    smoothed = smooth_values(u.slices, kernel)

    temperature = smooth_values(nl.evaluate(u.slices), kernel)

    return u.map(lambda _: smoothed), u.map(lambda _: temperature)


# **************************************************************************************


class GreenIdentityTerms(BaseModel):
    """
    The terms of the Green representation on a ball over (t1, t2]:

    lhs = initial - boundary + volume_time + volume_space, up to the residual.
    """

    lhs: float

    initial: float

    boundary: float

    volume_time: float

    volume_space: float

    @property
    def residual(self) -> float:
        return abs(
            self.lhs
            - (self.initial - self.boundary + self.volume_time + self.volume_space)
        )


# **************************************************************************************


def green_terms(
    u: SpaceTimeField,
    nl: Nonlinearity,
    phi: SpaceTimeProduct,
    ball: BallDomain,
    t1: float,
    t2: float,
) -> GreenIdentityTerms:
    """
    Evaluate every term of the Green representation with the midpoint rule in time,
    the ball's cell sum in space and phi's exact derivatives.

    The boundary term pairs alpha(u) on each shell cell with the exact outward normal
    derivative of phi at the cell's radial projection onto |x| = R.

    Raises:
        ValueError: If t1 >= t2, or phi does not vanish on |x| = R.
    """
    if not t1 < t2:
        raise ValueError("green_terms requires t1 < t2")

    k1, k2 = u.index_of(t1, exact=True), u.index_of(t2, exact=True)

    grid = u.grid

    x = grid.centers()

    interior = ball.interior

    volume = grid.cell_volume

    normals = ball.shell_normals

    projected = ball.radius * normals

    # The spatial profile itself must vanish on |x| = R, whatever the time factor:
    on_sphere = np.abs(phi.profile.value(projected))

    if np.any(on_sphere > 1e-12 * max(1.0, float(np.max(np.abs(phi.profile.value(x)))))):
        raise ValueError("test function does not vanish on the ball boundary")

    def pairing(k: int, t: float) -> float:
        return float(np.sum((u.slices[k] * phi.value(x, t))[interior]) * volume)

    boundary = 0.0
    volume_time = 0.0
    volume_space = 0.0

    for k in range(k1 + 1, k2 + 1):
        t_mid = float(u.times[k]) - 0.5 * u.dt

        alpha = nl.evaluate(u.slices[k])

        flux = np.sum(phi.gradient(projected, t_mid) * normals, axis=-1)

        boundary += u.dt * float(np.sum(ball.shell_weights * ball.on_shell(alpha) * flux))

        volume_time += u.dt * float(
            np.sum((u.slices[k] * phi.time_derivative(x, t_mid))[interior]) * volume
        )

        volume_space += u.dt * float(
            np.sum((alpha * phi.laplacian(x, t_mid))[interior]) * volume
        )

    return GreenIdentityTerms(
        lhs=pairing(k2, float(u.times[k2])),
        initial=pairing(k1, float(u.times[k1])),
        boundary=boundary,
        volume_time=volume_time,
        volume_space=volume_space,
    )


# **************************************************************************************


def green_residual(
    u: SpaceTimeField,
    nl: Nonlinearity,
    phi: SpaceTimeProduct,
    ball: BallDomain,
    t1: float,
    t2: float,
) -> float:
    return green_terms(u, nl, phi, ball, t1, t2).residual


# **************************************************************************************
