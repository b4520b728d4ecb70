# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import csv
from math import ceil, pi
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray
from pydantic import (
    BaseModel,
    ConfigDict,
    PrivateAttr,
    field_validator,
    model_validator,
)
from scipy import sparse

from .common import BoundaryCondition

# **************************************************************************************

# A weight applied per cell, either as a function of the cell centres or as values:
CellWeight = Union[Callable[[NDArray[np.float64]], NDArray[np.float64]], NDArray[np.float64]]

# **************************************************************************************

# Where a field is taken to vanish when differencing outward across the ball boundary:
ZeroLocation = Literal["shell", "sphere"]

# **************************************************************************************


class Grid(BaseModel):
    """
    A uniform cell-centred grid in one or two dimensions with equal spacing per axis.
    """

    model_config = ConfigDict(frozen=True)

    dim: Literal[1, 2]

    # The lower corner of the box:
    origin: Tuple[float, ...]

    spacing: float

    cells: Tuple[int, ...]

    @field_validator("spacing")
    @classmethod
    def validate_spacing(cls, value: float) -> float:
        if not value > 0 or not np.isfinite(value):
            raise ValueError("spacing must be a positive finite length")
        return value

    @model_validator(mode="after")
    def validate_axes(self) -> "Grid":
        if len(self.origin) != self.dim or len(self.cells) != self.dim:
            raise ValueError("origin and cells must have one entry per dimension")

        if any(n < 3 for n in self.cells):
            raise ValueError("a grid needs at least 3 cells per axis")

        return self

    @classmethod
    def symmetric(cls, dim: Literal[1, 2], half_width: float, spacing: float) -> "Grid":
        """
        A box centred on the origin with an odd cell count per axis, so that cell
        centres sit at integer multiples of the spacing and the origin is a centre.

        Args:
            dim (Literal[1, 2]): The spatial dimension.
            half_width (float): The minimum half width of the box.
            spacing (float): The cell width.

        Returns:
            Grid: The grid.
        """
        n = 2 * int(ceil(half_width / spacing - 1e-9)) + 1

        return cls(
            dim=dim,
            origin=tuple([-0.5 * n * spacing] * dim),
            spacing=spacing,
            cells=tuple([n] * dim),
        )

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.cells)

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_volume(self) -> float:
        return float(self.spacing**self.dim)

    @property
    def box(self) -> List[Tuple[float, float]]:
        return [
            (o, o + n * self.spacing) for o, n in zip(self.origin, self.cells)
        ]

    def axes(self) -> List[NDArray[np.float64]]:
        """
        The cell centre coordinates along each axis.
        """
        return [
            o + (np.arange(n) + 0.5) * self.spacing
            for o, n in zip(self.origin, self.cells)
        ]

    def centers(self) -> NDArray[np.float64]:
        """
        The cell centres, shaped (*cells, dim).
        """
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def radius(self) -> NDArray[np.float64]:
        """
        The distance |x| of each cell centre from the coordinate origin.
        """
        return np.sqrt(np.sum(self.centers() ** 2, axis=-1))

    def refined(self, factor: int) -> "Grid":
        """
        The same box with every cell split into factor cells per axis.
        """
        return Grid(
            dim=self.dim,
            origin=self.origin,
            spacing=self.spacing / factor,
            cells=tuple(n * factor for n in self.cells),
        )

    def contains(self, point: Sequence[float]) -> bool:
        return all(lo <= x < hi for x, (lo, hi) in zip(point, self.box))


# **************************************************************************************


class Field(BaseModel):
    """
    One value per cell of a grid, tagged with the time it represents.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: Grid

    values: np.ndarray

    time_tag: float = 0.0

    @field_validator("values", mode="before")
    @classmethod
    def coerce_values(cls, value: object) -> np.ndarray:
        return np.array(value, dtype=float)

    @model_validator(mode="after")
    def validate_values(self) -> "Field":
        if self.values.size != self.grid.size:
            raise ValueError(
                f"field has {self.values.size} values but the grid has {self.grid.size} cells"
            )

        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

        self.values = self.values.reshape(self.grid.shape)

        return self


# **************************************************************************************


class SpaceTimeField(BaseModel):
    """
    A uniformly spaced sequence of fields on one grid.

    Slice k sits at t_start + k * dt and represents the interval (t_k - dt, t_k]; the
    first slice is the initial state and carries no time measure.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: Grid

    t_start: float = 0.0

    dt: float

    slices: np.ndarray

    @field_validator("slices", mode="before")
    @classmethod
    def coerce_slices(cls, value: object) -> np.ndarray:
        return np.array(value, dtype=float)

    @field_validator("dt")
    @classmethod
    def validate_dt(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("dt must be positive")
        return value

    @model_validator(mode="after")
    def validate_slices(self) -> "SpaceTimeField":
        if self.slices.ndim == 0 or self.slices.size % self.grid.size != 0:
            raise ValueError("slices do not match the grid")

        self.slices = self.slices.reshape((-1, *self.grid.shape))

        if self.slices.shape[0] == 0:
            raise ValueError("a space-time field needs at least one slice")

        if not np.all(np.isfinite(self.slices)):
            raise ValueError("space-time field values must be finite")

        return self

    @classmethod
    def from_fields(cls, fields: Sequence[Field], dt: float) -> "SpaceTimeField":
        return cls(
            grid=fields[0].grid,
            t_start=fields[0].time_tag,
            dt=dt,
            slices=np.stack([f.values for f in fields]),
        )

    @property
    def n_slices(self) -> int:
        return int(self.slices.shape[0])

    @property
    def times(self) -> NDArray[np.float64]:
        return self.t_start + self.dt * np.arange(self.n_slices)

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * (self.n_slices - 1)

    def slice(self, k: int) -> Field:
        return Field(grid=self.grid, values=self.slices[k], time_tag=float(self.times[k]))

    def index_of(self, t: float, exact: bool = False) -> int:
        """
        The index of the slice nearest to time t.

        Args:
            t (float): The time.
            exact (bool): Require t to coincide with a slice time.

        Returns:
            int: The slice index.

        Raises:
            ValueError: If t lies outside the stored range, or off the mesh when exact.
        """
        k = int(round((t - self.t_start) / self.dt))

        if k < 0 or k >= self.n_slices:
            raise ValueError(
                f"time {t} lies outside [{self.t_start}, {self.t_end}]"
            )

        if exact and abs(self.t_start + k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not on the time mesh of spacing {self.dt}")

        return k

    def time_weights(self, t1: float, t2: float) -> NDArray[np.float64]:
        """
        The length of (t1, t2] covered by the interval each slice represents.
        """
        upper = self.times
        lower = np.maximum(upper - self.dt, self.t_start)
        lower[0] = upper[0]

        return np.clip(np.minimum(upper, t2) - np.maximum(lower, t1), 0.0, None)

    def window(self, t1: float, t2: float) -> "SpaceTimeField":
        """
        The slices with times in [t1, t2]; both ends must lie on the time mesh.
        """
        k1, k2 = self.index_of(t1, exact=True), self.index_of(t2, exact=True)

        if k2 < k1:
            raise ValueError("window requires t1 <= t2")

        return SpaceTimeField(
            grid=self.grid,
            t_start=float(self.times[k1]),
            dt=self.dt,
            slices=self.slices[k1 : k2 + 1],
        )

    def shifted(self, t_start: float) -> "SpaceTimeField":
        return SpaceTimeField(
            grid=self.grid, t_start=t_start, dt=self.dt, slices=self.slices
        )

    def subsample(self, factor: int) -> "SpaceTimeField":
        """
        Every factor-th slice, so the time step grows by factor.
        """
        if factor < 1:
            raise ValueError("subsampling factor must be at least 1")

        return SpaceTimeField(
            grid=self.grid,
            t_start=self.t_start,
            dt=self.dt * factor,
            slices=self.slices[::factor],
        )

    def map(self, fn: Callable[[NDArray[np.float64]], NDArray[np.float64]]) -> "SpaceTimeField":
        return SpaceTimeField(
            grid=self.grid, t_start=self.t_start, dt=self.dt, slices=fn(self.slices)
        )


# **************************************************************************************


class BallDomain(BaseModel):
    """
    The cells of a grid whose centres lie in the closed ball |x - center| <= R, and the
    one-cell-thick shell of outside cells that share a face with one of them.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: Grid

    radius: float

    center: Optional[Tuple[float, ...]] = None

    _interior: NDArray[np.bool_] = PrivateAttr()

    _shell: NDArray[np.int64] = PrivateAttr()

    _offsets: NDArray[np.float64] = PrivateAttr()

    _weights: NDArray[np.float64] = PrivateAttr()

    _stencils: Dict[str, Tuple[NDArray[np.int64], NDArray[np.float64]]] = PrivateAttr(
        default_factory=dict
    )

    @model_validator(mode="after")
    def build_masks(self) -> "BallDomain":
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

        grid = self.grid

        center = np.zeros(grid.dim) if self.center is None else np.array(self.center)

        offsets = grid.centers() - center

        distance = np.sqrt(np.sum(offsets**2, axis=-1))

        interior = distance <= self.radius + 1e-9 * grid.spacing

        if not np.any(interior):
            raise ValueError(f"ball of radius {self.radius} contains no cell centre")

        padded = np.pad(interior, 1, mode="constant", constant_values=False)

        touched = np.zeros_like(interior)

        for axis in range(grid.dim):
            for neighbour in (slice(0, -2), slice(2, None)):
                window = [slice(1, -1)] * grid.dim
                window[axis] = neighbour
                touched |= padded[tuple(window)]

        shell = touched & ~interior

        edge = np.zeros_like(interior)

        for axis in range(grid.dim):
            view = np.moveaxis(edge, axis, 0)
            view[0] = True
            view[-1] = True

        if np.any((interior | shell) & edge):
            raise ValueError(
                f"ball of radius {self.radius} does not fit strictly inside the grid box"
            )

        self._interior = interior
        self._shell = np.argwhere(shell)
        self._offsets = offsets[shell]

        if grid.dim == 1:
            weights = np.ones(len(self._shell))
        else:
            norms = np.sqrt(np.sum(self._offsets**2, axis=-1))
            normals = self._offsets / norms[:, None]
            weights = grid.spacing / np.sum(np.abs(normals), axis=-1)
            weights *= 2.0 * pi * self.radius / np.sum(weights)

        self._weights = weights

        return self

    @property
    def interior(self) -> NDArray[np.bool_]:
        return self._interior

    @property
    def shell_indices(self) -> NDArray[np.int64]:
        """
        The multi-indices of the shell cells, shaped (n_shell, dim).
        """
        return self._shell

    @property
    def shell_offsets(self) -> NDArray[np.float64]:
        return self._offsets

    @property
    def shell_weights(self) -> NDArray[np.float64]:
        """
        Surface measure per shell cell: 1 per endpoint in 1D, arc length in 2D.
        """
        return self._weights

    @property
    def shell_normals(self) -> NDArray[np.float64]:
        norms = np.sqrt(np.sum(self._offsets**2, axis=-1))
        return self._offsets / norms[:, None]

    @property
    def shell_radius(self) -> float:
        """
        The largest distance from the centre to a shell cell centre.
        """
        return float(np.max(np.sqrt(np.sum(self._offsets**2, axis=-1))))

    @property
    def volume(self) -> float:
        """
        The discrete volume |B(R)|, the interior cell count times the cell volume.
        """
        return float(np.count_nonzero(self._interior) * self.grid.cell_volume)

    @property
    def surface_area(self) -> float:
        return 2.0 if self.grid.dim == 1 else 2.0 * pi * self.radius

    def on_shell(self, values: NDArray[np.float64]) -> NDArray[np.float64]:
        """
        Gather shell cell values from (..., *grid.shape) into (..., n_shell).
        """
        return values[(Ellipsis, *self._shell.T)]

    def restrict(self, values: NDArray[np.float64]) -> NDArray[np.float64]:
        """
        Zero every cell outside the ball interior.
        """
        return np.where(self._interior, values, 0.0)

    def interior_laplacian(self) -> sparse.csr_matrix:
        """
        The stencil Laplacian on interior cells with zero values outside the ball.
        """
        free = self._interior.ravel()
        full = laplacian_matrix(self.grid, BoundaryCondition.DIRICHLET_ZERO)
        return full[free][:, free].tocsr()

    def normal_stencil(
        self, zero_at: ZeroLocation = "shell"
    ) -> Tuple[NDArray[np.int64], NDArray[np.float64]]:
        """
        Flat indices and coefficients of a one-sided second-order outward normal
        derivative per shell cell, three points each.

        With zero_at="shell" the field is differenced from the shell cell inward,
        matching discrete fields that vanish on the shell. With zero_at="sphere" the
        field is taken to vanish where the axis line crosses |x| = R.

        Raises:
            ValueError: If a shell cell lacks the interior neighbours along every axis.
        """
        if zero_at in self._stencils:
            return self._stencils[zero_at]

        grid, h = self.grid, self.grid.spacing

        indices = np.zeros((len(self._shell), 3), dtype=np.int64)
        coefficients = np.zeros((len(self._shell), 3))

        def is_interior(index: NDArray[np.int64]) -> bool:
            if np.any(index < 0) or np.any(index >= np.array(grid.cells)):
                return False
            return bool(self._interior[tuple(index)])

        for j, (cell, p) in enumerate(zip(self._shell, self._offsets)):
            norm = float(np.sqrt(np.sum(p**2)))

            found = False

            for axis in np.argsort(-np.abs(p), kind="stable"):
                if abs(p[axis]) < 1e-12 * h:
                    continue

                s = 1 if p[axis] > 0 else -1
                step = np.zeros(grid.dim, dtype=np.int64)
                step[axis] = s

                inward = [cell - k * step for k in (1, 2, 3)]

                if not (is_interior(inward[0]) and is_interior(inward[1])):
                    continue

                if zero_at == "shell":
                    nodes = [cell, inward[0], inward[1]]
                    n_axis = abs(p[axis]) / norm
                    weights = np.array([3.0, -4.0, 1.0]) / (2.0 * h * n_axis)
                else:
                    y1 = p - step * h
                    tau = -s * y1[axis] + np.sqrt(
                        y1[axis] ** 2 - np.sum(y1**2) + self.radius**2
                    )

                    if tau >= 0.5 * h:
                        nodes = [cell, inward[0], inward[1]]
                        t1, t2 = tau, tau + h
                    elif is_interior(inward[2]):
                        nodes = [cell, inward[1], inward[2]]
                        t1, t2 = tau + h, tau + 2 * h
                    else:
                        continue

                    crossing = y1 + tau * step
                    n_axis = abs(crossing[axis]) / self.radius

                    weights = np.array(
                        [
                            0.0,
                            -t2 / (t1 * (t2 - t1)),
                            t1 / (t2 * (t2 - t1)),
                        ]
                    ) / n_axis

                indices[j] = [np.ravel_multi_index(tuple(n), grid.cells) for n in nodes]
                coefficients[j] = weights
                found = True
                break

            if not found:
                raise ValueError(
                    f"shell cell {tuple(cell)} lacks two interior neighbours along the radial axis"
                )

        self._stencils[zero_at] = (indices, coefficients)

        return indices, coefficients


# **************************************************************************************


def laplacian_matrix(grid: Grid, boundary: BoundaryCondition) -> sparse.csr_matrix:
    """
    The 3-point (1D) or 5-point (2D) Laplacian as a sparse matrix on row-major cells.

    Args:
        grid (Grid): The grid.
        boundary (BoundaryCondition): Zero-flux mirrors the boundary cell into its
            ghost; Dirichlet-zero sets the ghost to zero.

    Returns:
        sparse.csr_matrix: The operator.
    """
    factors = []

    for n in grid.cells:
        main = np.full(n, -2.0)

        if boundary == BoundaryCondition.ZERO_FLUX:
            main[0] = main[-1] = -1.0

        off = np.ones(n - 1)

        factors.append(sparse.diags([off, main, off], [-1, 0, 1], format="csr"))

    h2 = grid.spacing**2

    if grid.dim == 1:
        return (factors[0] / h2).tocsr()

    n0, n1 = grid.cells

    operator = sparse.kron(factors[0], sparse.identity(n1)) + sparse.kron(
        sparse.identity(n0), factors[1]
    )

    return (operator / h2).tocsr()


# **************************************************************************************


def laplacian_values(
    values: NDArray[np.float64],
    spacing: float,
    boundary: BoundaryCondition = BoundaryCondition.ZERO_FLUX,
) -> NDArray[np.float64]:
    mode = "edge" if boundary == BoundaryCondition.ZERO_FLUX else "constant"

    padded = np.pad(values, 1, mode=mode)  # type: ignore[call-overload]

    result = np.zeros_like(values)

    centre = tuple(slice(1, -1) for _ in range(values.ndim))

    for axis in range(values.ndim):
        lower = list(centre)
        upper = list(centre)
        lower[axis] = slice(0, -2)
        upper[axis] = slice(2, None)
        result += padded[tuple(lower)] + padded[tuple(upper)] - 2.0 * values

    return result / spacing**2


# **************************************************************************************


def laplacian(
    f: Field, boundary: BoundaryCondition = BoundaryCondition.ZERO_FLUX
) -> Field:
    """
    The centred second-order Laplacian of a field.

    Args:
        f (Field): The field.
        boundary (BoundaryCondition): The ghost-cell rule at the box boundary.

    Returns:
        Field: The Laplacian, with the same time tag.
    """
    return Field(
        grid=f.grid,
        values=laplacian_values(f.values, f.grid.spacing, boundary),
        time_tag=f.time_tag,
    )


# **************************************************************************************


def gradient_norm_squared(
    values: NDArray[np.float64],
    grid: Grid,
    boundary: BoundaryCondition = BoundaryCondition.DIRICHLET_ZERO,
) -> float:
    """
    The forward-difference Dirichlet energy sum |grad_h f|^2 times the cell volume.

    With Dirichlet-zero ghosts, <laplacian(f), f> = -gradient_norm_squared(f).
    """
    total = 0.0

    for axis in range(grid.dim):
        if boundary == BoundaryCondition.DIRICHLET_ZERO:
            width = [(0, 0)] * grid.dim
            width[axis] = (1, 1)
            difference = np.diff(np.pad(values, width), axis=axis)
        else:
            difference = np.diff(values, axis=axis)

        total += float(np.sum(difference**2))

    return total * grid.cell_volume / grid.spacing**2


# **************************************************************************************


def inner(f: Field, g: Field) -> float:
    return float(np.sum(f.values * g.values) * f.grid.cell_volume)


# **************************************************************************************


def l1_distance(
    f: Field, g: Field, mask: Optional[NDArray[np.bool_]] = None
) -> float:
    difference = np.abs(f.values - g.values)

    if mask is not None:
        difference = np.where(mask, difference, 0.0)

    return float(np.sum(difference) * f.grid.cell_volume)


# **************************************************************************************


def restrict(field: Field, factor: int) -> Field:
    """
    Conservative coarsening by averaging factor^dim blocks of cells.

    Raises:
        ValueError: If a cell count is not divisible by factor.
    """
    return Field(
        grid=_coarse_grid(field.grid, factor),
        values=_block_average(field.values, factor),
        time_tag=field.time_tag,
    )


# **************************************************************************************


def restrict_history(history: SpaceTimeField, factor: int) -> SpaceTimeField:
    coarse = _coarse_grid(history.grid, factor)

    return SpaceTimeField(
        grid=coarse,
        t_start=history.t_start,
        dt=history.dt,
        slices=np.stack([_block_average(s, factor) for s in history.slices]),
    )


# **************************************************************************************


def _integer_ratio(coarse: float, fine: float) -> int:
    ratio = coarse / fine

    if abs(ratio - round(ratio)) > 1e-9 * ratio or round(ratio) < 1:
        raise ValueError(f"{coarse} is not an integer multiple of {fine}")

    return int(round(ratio))


# **************************************************************************************


def match_resolution(
    u: SpaceTimeField, v: SpaceTimeField
) -> Tuple[SpaceTimeField, SpaceTimeField]:
    """
    Bring two histories of the same box to the coarser of their resolutions: the finer
    grid is block averaged and the finer time mesh subsampled.

    Raises:
        ValueError: If the grids are not nested refinements of one another or the time
            steps are not integer multiples.
    """

    def coarsen(fine: SpaceTimeField, coarse: SpaceTimeField) -> SpaceTimeField:
        factor = _integer_ratio(coarse.grid.spacing, fine.grid.spacing)

        restricted = restrict_history(fine, factor) if factor > 1 else fine

        offset = np.subtract(restricted.grid.origin, coarse.grid.origin)

        if restricted.grid.cells != coarse.grid.cells or np.any(
            np.abs(offset) > 1e-9 * coarse.grid.spacing
        ):
            raise ValueError("the grids are not nested refinements of one box")

        return SpaceTimeField(
            grid=coarse.grid,
            t_start=restricted.t_start,
            dt=restricted.dt,
            slices=restricted.slices,
        )

    if u.grid.spacing <= v.grid.spacing:
        u = coarsen(u, v)
    else:
        v = coarsen(v, u)

    if u.dt < v.dt:
        u = u.subsample(_integer_ratio(v.dt, u.dt))
    elif v.dt < u.dt:
        v = v.subsample(_integer_ratio(u.dt, v.dt))

    return u, v


# **************************************************************************************


def _coarse_grid(grid: Grid, factor: int) -> Grid:
    if factor < 1 or any(n % factor for n in grid.cells):
        raise ValueError(f"cell counts {grid.cells} are not divisible by {factor}")

    return Grid(
        dim=grid.dim,
        origin=grid.origin,
        spacing=grid.spacing * factor,
        cells=tuple(n // factor for n in grid.cells),
    )


# **************************************************************************************


def _block_average(values: NDArray[np.float64], factor: int) -> NDArray[np.float64]:
    shape: List[int] = []

    for n in values.shape:
        shape.extend([n // factor, factor])

    return values.reshape(shape).mean(axis=tuple(range(1, 2 * values.ndim, 2)))


# **************************************************************************************


def gaussian_weight(grid: Grid, c: float) -> NDArray[np.float64]:
    return np.exp(-c * grid.radius() ** 2)


# **************************************************************************************


def weighted_l1(
    u: SpaceTimeField, c: float, window: Optional[Tuple[float, float]] = None
) -> float:
    """
    The midpoint-rule integral of |u| exp(-c |x|^2) over space and time.

    Without a window every slice carries the full time step; with a window (t1, t2]
    each slice carries the part of the window it represents.

    Raises:
        ValueError: If c is not positive.
    """
    if not c > 0:
        raise ValueError("the Gaussian exponent c must be positive")

    weight = gaussian_weight(u.grid, c)

    per_slice = np.sum(
        np.abs(u.slices) * weight, axis=tuple(range(1, u.grid.dim + 1))
    ) * u.grid.cell_volume

    if window is None:
        return float(u.dt * np.sum(per_slice))

    return float(np.sum(u.time_weights(*window) * per_slice))


# **************************************************************************************


def shell_time_integral(
    g: SpaceTimeField,
    ball: BallDomain,
    t1: float,
    t2: float,
    weight: Optional[CellWeight] = None,
) -> float:
    """
    The surface-measure-weighted sum over shell cells of g times weight, integrated
    over (t1, t2] with the midpoint rule.

    Raises:
        ValueError: If t1 >= t2 or the interval leaves the stored time range.
    """
    tolerance = 1e-9 * max(1.0, abs(t2))

    if not t1 < t2:
        raise ValueError("shell_time_integral requires t1 < t2")

    if t1 < g.t_start - tolerance or t2 > g.t_end + tolerance:
        raise ValueError(
            f"interval ({t1}, {t2}] leaves the stored range [{g.t_start}, {g.t_end}]"
        )

    surface = ball.shell_weights.copy()

    if weight is not None:
        if callable(weight):
            surface *= weight(g.grid.centers()[tuple(ball.shell_indices.T)])
        else:
            surface *= ball.on_shell(np.asarray(weight))

    per_slice = ball.on_shell(g.slices) @ surface

    return float(np.sum(g.time_weights(t1, t2) * per_slice))


# **************************************************************************************


def normal_derivative(
    f: Union[Field, NDArray[np.float64]],
    ball: BallDomain,
    zero_at: ZeroLocation = "shell",
) -> NDArray[np.float64]:
    """
    The outward normal derivative per shell cell by a one-sided second-order
    difference along the axis closest to the radial direction.

    Args:
        f (Union[Field, NDArray[np.float64]]): A field, or values shaped
            (..., *grid.shape) for a batch of slices.
        ball (BallDomain): The ball.
        zero_at (ZeroLocation): Where the field is taken to vanish.

    Returns:
        NDArray[np.float64]: Values shaped (..., n_shell).

    Raises:
        ValueError: If a shell cell lacks two interior neighbours along any axis.
    """
    values = f.values if isinstance(f, Field) else np.asarray(f, dtype=float)

    indices, coefficients = ball.normal_stencil(zero_at)

    flat = values.reshape((*values.shape[: values.ndim - ball.grid.dim], -1))

    return np.sum(flat[..., indices] * coefficients, axis=-1)


# **************************************************************************************


def write_field_csv(path: Union[str, Path], field: Field) -> None:
    """
    Write a field as a header row, a metadata row and one value per line (row-major).
    """
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["dim", "origin", "spacing", "cells", "time_tag"])
        writer.writerow(
            [
                field.grid.dim,
                ";".join(repr(float(o)) for o in field.grid.origin),
                repr(float(field.grid.spacing)),
                ";".join(str(n) for n in field.grid.cells),
                repr(float(field.time_tag)),
            ]
        )
        for value in field.values.ravel():
            writer.writerow([repr(float(value))])


# **************************************************************************************


def read_field_csv(path: Union[str, Path]) -> Field:
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))

    if len(rows) < 2 or rows[0] != ["dim", "origin", "spacing", "cells", "time_tag"]:
        raise ValueError(f"{path} is not a field CSV")

    dim, origin, spacing, cells, time_tag = rows[1]

    grid = Grid(
        dim=int(dim),  # type: ignore[arg-type]
        origin=tuple(float(o) for o in origin.split(";")),
        spacing=float(spacing),
        cells=tuple(int(n) for n in cells.split(";")),
    )

    return Field(
        grid=grid,
        values=np.array([float(row[0]) for row in rows[2:] if row]),
        time_tag=float(time_tag),
    )


# **************************************************************************************


def write_run_directory(
    directory: Union[str, Path], history: SpaceTimeField
) -> List[Path]:
    """
    Write every slice of a history as slice_<k>.csv inside directory.

    Returns:
        List[Path]: The written files.
    """
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)

    written: List[Path] = []

    for k in range(history.n_slices):
        path = root / f"slice_{k:05d}.csv"
        write_field_csv(path, history.slice(k))
        written.append(path)

    return written


# **************************************************************************************


def read_run_directory(directory: Union[str, Path]) -> SpaceTimeField:
    """
    Read the slice CSVs of a run directory back into a history.

    Raises:
        ValueError: If fewer than two slices exist or their times are not uniform.
    """
    paths = sorted(Path(directory).glob("slice_*.csv"))

    if len(paths) < 2:
        raise ValueError(f"{directory} holds fewer than two slices")

    fields = [read_field_csv(p) for p in paths]

    times = np.array([f.time_tag for f in fields])

    dt = float((times[-1] - times[0]) / (len(times) - 1))

    if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=1e-12):
        raise ValueError(f"slice times in {directory} are not uniformly spaced")

    return SpaceTimeField.from_fields(fields, dt=dt)


# **************************************************************************************
