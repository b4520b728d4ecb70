# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

from math import sqrt
from typing import Dict, List, Optional, Protocol, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator

from .grid import BallDomain, Field, Grid
from .utils import is_finite_number, parse_float_safely

# **************************************************************************************


class SpatialProfile(Protocol):
    """
    A compactly supported function of space with exact first and second derivatives.
    """

    def value(self, x: NDArray[np.float64]) -> NDArray[np.float64]: ...

    def gradient(self, x: NDArray[np.float64]) -> NDArray[np.float64]: ...

    def laplacian(self, x: NDArray[np.float64]) -> NDArray[np.float64]: ...

    def support_box(self) -> List[Tuple[float, float]]: ...


# **************************************************************************************


class TimeFactor(BaseModel):
    """
    A polynomial in t, optionally multiplied by the window (4 (t - a)(b - t) / (b - a)^2)^k
    on [a, b] and zero outside it.
    """

    model_config = ConfigDict(frozen=True)

    # Polynomial coefficients in increasing degree:
    coefficients: List[float] = PydanticField(default_factory=lambda: [1.0], min_length=1)

    window: Optional[Tuple[float, float]] = None

    window_power: int = PydanticField(default=3, ge=2)

    @model_validator(mode="after")
    def validate_window(self) -> "TimeFactor":
        if self.window is not None and not self.window[1] > self.window[0]:
            raise ValueError("time window must satisfy a < b")

        return self

    def _window(self, t: float) -> Tuple[float, float]:
        if self.window is None:
            return 1.0, 0.0

        a, b = self.window

        if t <= a or t >= b:
            return 0.0, 0.0

        width = (b - a) ** 2
        base = 4.0 * (t - a) * (b - t) / width
        k = self.window_power

        return base**k, k * base ** (k - 1) * 4.0 * (a + b - 2.0 * t) / width

    def value(self, t: float) -> float:
        window, _ = self._window(t)
        return float(Polynomial(self.coefficients)(t) * window)

    def derivative(self, t: float) -> float:
        p = Polynomial(self.coefficients)
        window, slope = self._window(t)
        return float(p.deriv()(t) * window + p(t) * slope)


# **************************************************************************************


class BallBump(BaseModel):
    """
    The radial bump (1 - |x - c|^2 / r^2)_+^p.
    """

    model_config = ConfigDict(frozen=True)

    center: Tuple[float, ...] = (0.0,)

    radius: float = PydanticField(default=0.9, gt=0.0)

    power: int = PydanticField(default=4, ge=1)

    @property
    def dim(self) -> int:
        return len(self.center)

    def _offsets(self, x: NDArray[np.float64]) -> Tuple[NDArray[np.float64], NDArray[np.float64]]:
        offsets = np.asarray(x, dtype=float) - np.asarray(self.center)
        base = 1.0 - np.sum(offsets**2, axis=-1) / self.radius**2
        return offsets, np.clip(base, 0.0, None)

    def value(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        _, base = self._offsets(x)
        return base**self.power

    def gradient(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        offsets, base = self._offsets(x)

        p, r2 = self.power, self.radius**2

        outer = np.where(base > 0, -p / r2 * base ** (p - 1), 0.0)

        return 2.0 * outer[..., None] * offsets

    def laplacian(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        offsets, base = self._offsets(x)

        p, r2 = self.power, self.radius**2

        inside = base > 0

        # g(s) = (1 - s / r^2)^p with s = |x - c|^2, so laplacian = 4 s g'' + 2 n g':
        first = np.where(inside, -p / r2 * base ** (p - 1), 0.0)

        second = (
            np.where(inside, p * (p - 1) / r2**2 * base ** (p - 2), 0.0)
            if p >= 2
            else np.zeros_like(base)
        )

        s = np.sum(offsets**2, axis=-1)

        return 4.0 * s * second + 2.0 * self.dim * first

    def support_box(self) -> List[Tuple[float, float]]:
        return [(c - self.radius, c + self.radius) for c in self.center]

    def support_radius(self) -> float:
        return float(sqrt(sum(c * c for c in self.center)) + self.radius)


# **************************************************************************************


class TensorBump(BaseModel):
    """
    The product over axes of the one-dimensional bumps (1 - ((x_i - c_i) / r)^2)_+^p.
    """

    model_config = ConfigDict(frozen=True)

    center: Tuple[float, ...] = (0.0,)

    radius: float = PydanticField(default=0.7, gt=0.0)

    power: int = PydanticField(default=4, ge=2)

    @property
    def dim(self) -> int:
        return len(self.center)

    def _factors(
        self, x: NDArray[np.float64]
    ) -> Tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        y = np.asarray(x, dtype=float) - np.asarray(self.center)

        p, r2 = self.power, self.radius**2

        base = np.clip(1.0 - y**2 / r2, 0.0, None)

        inside = base > 0

        value = base**p

        first = np.where(inside, -2.0 * p * y / r2 * base ** (p - 1), 0.0)

        second = np.where(
            inside,
            -2.0 * p / r2 * base ** (p - 1)
            + 4.0 * p * (p - 1) * y**2 / r2**2 * base ** (p - 2),
            0.0,
        )

        return value, first, second

    def value(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        value, _, _ = self._factors(x)
        return np.prod(value, axis=-1)

    def gradient(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        value, first, _ = self._factors(x)

        components = [
            first[..., i] * np.prod(np.delete(value, i, axis=-1), axis=-1)
            for i in range(self.dim)
        ]

        return np.stack(components, axis=-1)

    def laplacian(self, x: NDArray[np.float64]) -> NDArray[np.float64]:
        value, _, second = self._factors(x)

        return sum(
            second[..., i] * np.prod(np.delete(value, i, axis=-1), axis=-1)
            for i in range(self.dim)
        )

    def support_box(self) -> List[Tuple[float, float]]:
        return [(c - self.radius, c + self.radius) for c in self.center]

    def support_radius(self) -> float:
        return float(sqrt(sum((abs(c) + self.radius) ** 2 for c in self.center)))


# **************************************************************************************

Profile = Union[BallBump, TensorBump]

# **************************************************************************************


class SpaceTimeProduct(BaseModel):
    """
    phi(x, t) = profile(x) * time(t), with exact time derivative and Laplacian.
    """

    model_config = ConfigDict(frozen=True)

    name: str = "test-function"

    profile: Profile

    time: TimeFactor = PydanticField(default_factory=TimeFactor)

    def value(self, x: NDArray[np.float64], t: float) -> NDArray[np.float64]:
        return self.profile.value(x) * self.time.value(t)

    def time_derivative(self, x: NDArray[np.float64], t: float) -> NDArray[np.float64]:
        return self.profile.value(x) * self.time.derivative(t)

    def laplacian(self, x: NDArray[np.float64], t: float) -> NDArray[np.float64]:
        return self.profile.laplacian(x) * self.time.value(t)

    def gradient(self, x: NDArray[np.float64], t: float) -> NDArray[np.float64]:
        return self.profile.gradient(x) * self.time.value(t)

    def supported_inside(self, grid: Grid, t_start: float, t_end: float) -> bool:
        """
        Whether the support lies strictly inside the grid box, one cell from its faces,
        and the time window strictly inside [t_start, t_end].
        """
        margin = grid.spacing

        for (lo, hi), (box_lo, box_hi) in zip(self.profile.support_box(), grid.box):
            if lo <= box_lo + margin or hi >= box_hi - margin:
                return False

        window = self.time.window

        return window is not None and window[0] >= t_start and window[1] <= t_end


# **************************************************************************************


def amplitude_field(profile: Profile, grid: Grid) -> Field:
    """
    A spatial profile sampled at the cell centres of a grid.
    """
    return Field(grid=grid, values=profile.value(grid.centers()), time_tag=0.0)


# **************************************************************************************


def vanishes_on_shell(profile: Profile, ball: BallDomain) -> bool:
    """
    Whether the profile is zero at every shell cell centre.
    """
    points = ball.grid.centers()[tuple(ball.shell_indices.T)]
    return bool(np.all(profile.value(points) == 0.0))


# **************************************************************************************


def builtin_test_functions(
    dim: int, t_start: float = 0.0, t_end: float = 1.0
) -> List[SpaceTimeProduct]:
    """
    The five built-in test functions: ball and tensor bumps with polynomial time
    factors, all supported in the unit ball and, when windowed, inside (t_start, t_end).
    """
    origin = (0.0,) * dim
    shifted = (0.2,) + (0.0,) * (dim - 1)
    window = (t_start, t_end)

    return [
        SpaceTimeProduct(
            name="ball-bump-linear-in-time",
            profile=BallBump(center=origin, radius=0.8, power=4),
            time=TimeFactor(coefficients=[1.0, 1.0], window=window),
        ),
        SpaceTimeProduct(
            name="shifted-ball-bump",
            profile=BallBump(center=shifted, radius=0.6, power=3),
            time=TimeFactor(coefficients=[1.0], window=window),
        ),
        SpaceTimeProduct(
            name="tensor-bump",
            profile=TensorBump(center=origin, radius=0.7, power=4),
            time=TimeFactor(coefficients=[2.0, -1.0], window=window),
        ),
        SpaceTimeProduct(
            name="wide-ball-bump-quadratic-in-time",
            profile=BallBump(center=origin, radius=0.9, power=6),
            time=TimeFactor(coefficients=[1.0, -1.0, 1.0], window=window),
        ),
        SpaceTimeProduct(
            name="flat-tensor-bump",
            profile=TensorBump(center=origin, radius=0.5, power=2),
            time=TimeFactor(coefficients=[0.5, 0.0, 1.0], window=window),
        ),
    ]


# **************************************************************************************


def _parse_parameters(text: str) -> Dict[str, str]:
    parameters: Dict[str, str] = {}

    for item in filter(None, (part.strip() for part in text.split(","))):
        key, separator, value = item.partition("=")

        if not separator:
            raise ValueError(f"test function parameter '{item}' is not key=value")

        parameters[key.strip()] = value.strip()

    return parameters


# **************************************************************************************


def parse_theta_spec(spec: str, dim: int) -> Profile:
    """
    Parse a spatial target such as "ball-bump:radius=0.9,power=3" or
    "tensor-bump:radius=0.5,power=4". Optional keys cx and cy move the centre.

    Raises:
        ValueError: For an unknown kind, an unknown key, or a non-numeric value.
    """
    kind, _, rest = spec.partition(":")

    parameters = _parse_parameters(rest)

    allowed = {"radius", "power", "cx", "cy"}

    unknown = set(parameters) - allowed

    if unknown:
        raise ValueError(f"unknown test function parameters: {sorted(unknown)}")

    bad = [k for k, v in parameters.items() if not is_finite_number(v)]

    if bad:
        raise ValueError(f"test function parameters {bad} are not finite numbers")

    numbers = {k: parse_float_safely(v) for k, v in parameters.items()}

    center = tuple([numbers.get("cx", 0.0), numbers.get("cy", 0.0)][:dim])

    options: Dict[str, object] = {"center": center}

    if "radius" in numbers:
        options["radius"] = numbers["radius"]

    if "power" in numbers:
        options["power"] = int(numbers["power"])

    if kind.strip() == "ball-bump":
        return BallBump.model_validate(options)

    if kind.strip() == "tensor-bump":
        return TensorBump.model_validate(options)

    raise ValueError(f"unknown test function kind '{kind}'")


# **************************************************************************************
