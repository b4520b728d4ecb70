# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

from math import inf, log, pi, sqrt
from typing import Callable, List, Optional, Tuple

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator
from scipy.special import erf

from .grid import Field, Grid

# **************************************************************************************

# A spatial function evaluated on points shaped (..., dim):
SpatialFunction = Callable[[NDArray[np.float64]], NDArray[np.float64]]

# **************************************************************************************


class Atom(BaseModel):
    model_config = ConfigDict(frozen=True)

    location: Tuple[float, ...]

    weight: float


# **************************************************************************************


class DensityBlock(BaseModel):
    """
    A piecewise-constant signed density on a box, split into equal sub-cells.

    Values are listed in row-major order over a sub-cell array of the given shape.
    """

    model_config = ConfigDict(frozen=True)

    # One (lower, upper) pair per axis:
    box: List[Tuple[float, float]]

    values: List[float]

    shape: Optional[Tuple[int, ...]] = None

    @model_validator(mode="after")
    def validate_shape(self) -> "DensityBlock":
        if any(not hi > lo for lo, hi in self.box):
            raise ValueError("density box must satisfy lower < upper on every axis")

        shape = self.cell_shape

        if len(shape) != len(self.box):
            raise ValueError("density shape must have one entry per box axis")

        if int(np.prod(shape)) != len(self.values):
            raise ValueError(
                f"density has {len(self.values)} values but shape {shape} needs "
                f"{int(np.prod(shape))}"
            )

        return self

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def cell_shape(self) -> Tuple[int, ...]:
        if self.shape is not None:
            return tuple(self.shape)

        if self.dim == 1:
            return (len(self.values),)

        if len(self.values) == 1:
            return (1,) * self.dim

        raise ValueError("a multi-dimensional density with several values needs a shape")

    def array(self) -> NDArray[np.float64]:
        return np.array(self.values, dtype=float).reshape(self.cell_shape)

    def edges(self) -> List[NDArray[np.float64]]:
        return [
            np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(self.box, self.cell_shape)
        ]

    def sub_cell_volume(self) -> float:
        return float(
            np.prod([(hi - lo) / n for (lo, hi), n in zip(self.box, self.cell_shape)])
        )


# **************************************************************************************


class SignedMeasure(BaseModel):
    """
    A signed Radon measure made of atoms and piecewise-constant densities, with the
    exponent c of its Gaussian moment condition.
    """

    model_config = ConfigDict(frozen=True)

    atoms: List[Atom] = PydanticField(default_factory=list)

    density: List[DensityBlock] = PydanticField(default_factory=list)

    gauss_c: Optional[float] = PydanticField(default=None, gt=0.0)

    @model_validator(mode="after")
    def validate_dimensions(self) -> "SignedMeasure":
        dims = {len(a.location) for a in self.atoms} | {d.dim for d in self.density}

        if len(dims) > 1:
            raise ValueError("atoms and densities must share one spatial dimension")

        if dims and not dims <= {1, 2}:
            raise ValueError("measures are supported in one or two dimensions")

        return self

    @property
    def dim(self) -> Optional[int]:
        if self.atoms:
            return len(self.atoms[0].location)
        if self.density:
            return self.density[0].dim
        return None

    @property
    def horizon(self) -> float:
        """
        The existence horizon T = 1 / (4c) when the Gaussian exponent is declared.
        """
        return inf if self.gauss_c is None else 1.0 / (4.0 * self.gauss_c)

    def support_radius(self) -> float:
        """
        The largest distance from the origin to an atom or a density box corner.
        """
        radius = 0.0

        for atom in self.atoms:
            radius = max(radius, sqrt(sum(x * x for x in atom.location)))

        for block in self.density:
            radius = max(
                radius, sqrt(sum(max(lo * lo, hi * hi) for lo, hi in block.box))
            )

        return radius


# **************************************************************************************


def _gaussian_interval_integrals(
    edges: NDArray[np.float64], c: float
) -> NDArray[np.float64]:
    # The antiderivative of exp(-c x^2) is sqrt(pi / c) / 2 * erf(sqrt(c) x):
    return 0.5 * sqrt(pi / c) * np.diff(erf(sqrt(c) * edges))


# **************************************************************************************


def gaussian_moment(mu: SignedMeasure, c: float) -> float:
    """
    The Gaussian moment of |mu|: the sum of |w| exp(-c |x|^2) over atoms plus the
    integral of |density| exp(-c |x|^2), the latter exact via the error function.

    Raises:
        ValueError: If c is not positive.
    """
    if not c > 0:
        raise ValueError("the Gaussian exponent c must be positive")

    total = 0.0

    for atom in mu.atoms:
        total += abs(atom.weight) * np.exp(-c * sum(x * x for x in atom.location))

    for block in mu.density:
        factors = [_gaussian_interval_integrals(e, c) for e in block.edges()]

        weight = factors[0] if block.dim == 1 else np.outer(factors[0], factors[1])

        total += float(np.sum(np.abs(block.array()) * weight))

    return float(total)


# **************************************************************************************


def total_mass(mu: SignedMeasure) -> float:
    mass = sum(atom.weight for atom in mu.atoms)

    for block in mu.density:
        mass += float(np.sum(block.array())) * block.sub_cell_volume()

    return float(mass)


# **************************************************************************************


def integrate(mu: SignedMeasure, psi: SpatialFunction) -> float:
    """
    The pairing of psi with mu, with an 8-node Gauss-Legendre rule per density sub-cell.
    """
    total = 0.0

    for atom in mu.atoms:
        total += atom.weight * float(psi(np.array(atom.location, dtype=float)))

    nodes, weights = np.polynomial.legendre.leggauss(8)

    for block in mu.density:
        axis_points = []
        axis_weights = []

        for e in block.edges():
            half = 0.5 * np.diff(e)
            middle = 0.5 * (e[:-1] + e[1:])
            axis_points.append(middle[:, None] + half[:, None] * nodes[None, :])
            axis_weights.append(half[:, None] * weights[None, :])

        values = block.array()

        if block.dim == 1:
            samples = psi(axis_points[0][..., None])
            total += float(np.sum(values[:, None] * axis_weights[0] * samples))
            continue

        x, y = axis_points

        # Tensor points shaped (nx, 8, ny, 8, 2):
        points = np.stack(
            np.broadcast_arrays(x[:, :, None, None], y[None, None, :, :]), axis=-1
        )

        w = axis_weights[0][:, :, None, None] * axis_weights[1][None, None, :, :]

        total += float(np.sum(values[:, None, :, None] * w * psi(points)))

    return float(total)


# **************************************************************************************


def combine(first: SignedMeasure, second: SignedMeasure) -> SignedMeasure:
    """
    The sum of two measures; the Gaussian exponent is the larger declared one.
    """
    exponents = [c for c in (first.gauss_c, second.gauss_c) if c is not None]

    return SignedMeasure(
        atoms=[*first.atoms, *second.atoms],
        density=[*first.density, *second.density],
        gauss_c=max(exponents) if exponents else None,
    )


# **************************************************************************************


def _overlap_matrix(
    sub_edges: NDArray[np.float64], origin: float, spacing: float, n: int
) -> NDArray[np.float64]:
    cell_edges = origin + spacing * np.arange(n + 1)

    lower = np.maximum(sub_edges[:-1, None], cell_edges[None, :-1])
    upper = np.minimum(sub_edges[1:, None], cell_edges[None, 1:])

    return np.clip(upper - lower, 0.0, None)


# **************************************************************************************


def cell_average(mu: SignedMeasure, grid: Grid) -> Field:
    """
    Project a measure onto a grid: each cell holds (atom mass in the cell plus the
    density integral over the cell) divided by the cell volume.

    Atoms on a cell face go to the cell on the positive side.

    Raises:
        ValueError: If an atom or a density box lies outside the grid box.
    """
    if mu.dim is not None and mu.dim != grid.dim:
        raise ValueError(f"measure is {mu.dim}D but the grid is {grid.dim}D")

    mass = np.zeros(grid.shape)

    for atom in mu.atoms:
        index = tuple(
            int(np.floor((x - o) / grid.spacing))
            for x, o in zip(atom.location, grid.origin)
        )

        if any(i < 0 or i >= n for i, n in zip(index, grid.cells)):
            raise ValueError(f"atom at x={atom.location} lies outside the grid box")

        mass[index] += atom.weight

    tolerance = 1e-12 * grid.spacing

    for block in mu.density:
        for (lo, hi), (box_lo, box_hi) in zip(block.box, grid.box):
            if lo < box_lo - tolerance or hi > box_hi + tolerance:
                raise ValueError(f"density box {block.box} extends outside the grid box")

        overlaps = [
            _overlap_matrix(e, o, grid.spacing, n)
            for e, o, n in zip(block.edges(), grid.origin, grid.cells)
        ]

        values = block.array()

        if grid.dim == 1:
            mass += values @ overlaps[0]
        else:
            mass += overlaps[0].T @ values @ overlaps[1]

    return Field(grid=grid, values=mass / grid.cell_volume, time_tag=0.0)


# **************************************************************************************


def suggest_half_width(mu: SignedMeasure, c: float, tolerance: float = 1e-12) -> float:
    """
    A truncation half width such that exp(-c dist^2) <= tolerance at the box boundary
    measured from the support of the data.
    """
    if not c > 0:
        raise ValueError("the Gaussian exponent c must be positive")

    return mu.support_radius() + sqrt(log(1.0 / tolerance) / c)


# **************************************************************************************
