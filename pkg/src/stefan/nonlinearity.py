# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

from typing import List, Optional, Tuple, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .common import NumericRange

# **************************************************************************************

# Scalar or array evaluations both flow through the same piecewise-linear code path:
Enthalpy = Union[float, ArrayLike]

# **************************************************************************************


class Nonlinearity(BaseModel):
    """
    A continuous, monotone nondecreasing, piecewise-linear temperature map alpha,
    stored as its breakpoints and extrapolated linearly beyond the end segments.
    """

    model_config = ConfigDict(frozen=True)

    breakpoints: List[Tuple[float, float]] = Field(
        ...,
        min_length=2,
        description="Ordered (enthalpy, temperature) pairs defining alpha",
    )

    slope_at_infinity: float = Field(
        default=1.0,
        ge=0.0,
        description="The slope a in the bound |alpha(u) - a u| <= B",
    )

    offset_bound: float = Field(
        default=1.0,
        ge=0.0,
        description="The offset bound B in |alpha(u) - a u| <= B",
    )

    @field_validator("breakpoints")
    @classmethod
    def validate_breakpoints(
        cls, value: List[Tuple[float, float]]
    ) -> List[Tuple[float, float]]:
        enthalpies = [u for u, _ in value]

        if any(not np.isfinite(u) or not np.isfinite(a) for u, a in value):
            raise ValueError("breakpoints must be finite")

        if any(right <= left for left, right in zip(enthalpies[:-1], enthalpies[1:])):
            raise ValueError("breakpoint enthalpies must be strictly increasing")

        for (u0, a0), (u1, a1) in zip(value[:-1], value[1:]):
            if (a1 - a0) / (u1 - u0) < 0:
                raise ValueError(
                    f"segment [{u0}, {u1}] has a negative slope; alpha must be nondecreasing"
                )

        return value

    @model_validator(mode="after")
    def validate_slope_at_infinity(self) -> "Nonlinearity":
        if self.slope_at_infinity > self.lipschitz + 1e-15:
            raise ValueError(
                "the slope at infinity cannot exceed the Lipschitz constant of alpha"
            )

        return self

    @property
    def enthalpies(self) -> NDArray[np.float64]:
        return np.array([u for u, _ in self.breakpoints], dtype=float)

    @property
    def temperatures(self) -> NDArray[np.float64]:
        return np.array([a for _, a in self.breakpoints], dtype=float)

    @property
    def slopes(self) -> NDArray[np.float64]:
        """
        The slope of every segment, the two end segments included.

        Returns:
            NDArray[np.float64]: One slope per segment.
        """
        return np.diff(self.temperatures) / np.diff(self.enthalpies)

    @property
    def lipschitz(self) -> float:
        """
        The Lipschitz constant L of alpha, i.e., its maximum segment slope.

        Returns:
            float: The Lipschitz constant.
        """
        return float(np.max(self.slopes))

    def evaluate(self, u: Enthalpy) -> NDArray[np.float64]:
        """
        Evaluate alpha cellwise, exactly at breakpoints and linearly on each segment.

        Args:
            u (Enthalpy): The enthalpy (scalar or array).

        Returns:
            NDArray[np.float64]: The temperature alpha(u), shaped like u.
        """
        x = np.asarray(u, dtype=float)

        xs, ys, slopes = self.enthalpies, self.temperatures, self.slopes

        value = np.interp(x, xs, ys)

        # Linear extrapolation beyond the outermost breakpoints:
        value = np.where(x < xs[0], ys[0] + slopes[0] * (x - xs[0]), value)
        value = np.where(x > xs[-1], ys[-1] + slopes[-1] * (x - xs[-1]), value)

        return value

    def slope(self, u: Enthalpy) -> NDArray[np.float64]:
        """
        The slope of the segment active at u; at a breakpoint, the segment to its right.

        Args:
            u (Enthalpy): The enthalpy (scalar or array).

        Returns:
            NDArray[np.float64]: The active slope, shaped like u.
        """
        x = np.asarray(u, dtype=float)

        index = np.searchsorted(self.enthalpies, x, side="right") - 1

        return self.slopes[np.clip(index, 0, len(self.breakpoints) - 2)]

    def solve_shifted(self, rhs: ArrayLike, k: ArrayLike) -> NDArray[np.float64]:
        """
        Solve u + k * alpha(u) = rhs cellwise for u, where k >= 0.

        The map u -> u + k * alpha(u) is strictly increasing and piecewise linear with
        the same breakpoints as alpha, so the inverse is exact on the active segment.

        Args:
            rhs (ArrayLike): The right-hand side per cell.
            k (ArrayLike): The nonnegative shift per cell.

        Returns:
            NDArray[np.float64]: The solution u per cell.
        """
        b = np.atleast_1d(np.asarray(rhs, dtype=float))

        shift = np.broadcast_to(np.asarray(k, dtype=float), b.shape).ravel()

        flat = b.ravel()

        xs, ys, slopes = self.enthalpies, self.temperatures, self.slopes

        # The shifted map evaluated at every breakpoint, one row per cell:
        g = xs[None, :] + shift[:, None] * ys[None, :]

        # Cells beyond either end breakpoint fall onto the end segments:
        segment = np.clip(
            np.sum(g <= flat[:, None], axis=1) - 1, 0, len(self.breakpoints) - 2
        )

        rows = np.arange(flat.size)

        u = xs[segment] + (flat - g[rows, segment]) / (1.0 + shift * slopes[segment])

        return u.reshape(np.shape(rhs)) if np.ndim(rhs) else u.reshape(())


# **************************************************************************************


class GeneralizedValidationReport(BaseModel):
    """
    The outcome of sampling alpha against its declared structural constants.
    """

    passed: bool
    monotone: bool
    lipschitz_ok: bool
    offset_ok: bool
    lipschitz: float
    worst_slope: float
    worst_offset: float
    worst_offset_at: float
    # Solutions are assumed to keep the Gaussian growth hypothesis when a != 1:
    growth_hypothesis_assumed: bool
    violation: Optional[str] = None


# **************************************************************************************


def make_two_phase() -> Nonlinearity:
    """
    The two-phase Stefan map: alpha(u) = u + 1 for u < -1, 0 on [-1, 1], u - 1 for u > 1.

    Returns:
        Nonlinearity: The three-piece map with a = 1, B = 1 and L = 1.
    """
    return Nonlinearity(
        breakpoints=[(-2.0, -1.0), (-1.0, 0.0), (1.0, 0.0), (2.0, 1.0)],
        slope_at_infinity=1.0,
        offset_bound=1.0,
    )


# **************************************************************************************


def make_linear(slope: float = 1.0) -> Nonlinearity:
    """
    The linear map alpha(u) = slope * u, i.e., the heat equation with diffusivity slope.
    """
    return Nonlinearity(
        breakpoints=[(-1.0, -slope), (1.0, slope)],
        slope_at_infinity=slope,
        offset_bound=0.0,
    )


# **************************************************************************************


def eval_alpha(nl: Nonlinearity, u: Enthalpy) -> Union[float, NDArray[np.float64]]:
    value = nl.evaluate(u)

    if np.ndim(value) == 0:
        return float(value)

    return value


# **************************************************************************************


def difference_quotient(
    nl: Nonlinearity, u: ArrayLike, v: ArrayLike
) -> NDArray[np.float64]:
    """
    The quotient (alpha(u) - alpha(v)) / (u - v), defined as 0 wherever u == v.

    Equality is tested exactly on the supplied floating point values.

    Args:
        nl (Nonlinearity): The temperature map.
        u (ArrayLike): The first enthalpy.
        v (ArrayLike): The second enthalpy.

    Returns:
        NDArray[np.float64]: The quotient, clipped to [0, L].
    """
    a = np.asarray(u, dtype=float)
    b = np.asarray(v, dtype=float)

    numerator = nl.evaluate(a) - nl.evaluate(b)
    denominator = a - b

    quotient = np.divide(
        numerator,
        denominator,
        out=np.zeros(np.broadcast(a, b).shape, dtype=float),
        where=denominator != 0.0,
    )

    return np.clip(quotient, 0.0, nl.lipschitz)


# **************************************************************************************


def validate_generalized(
    nl: Nonlinearity, sample_range: NumericRange, n_samples: int
) -> GeneralizedValidationReport:
    """
    Sample alpha on a range and confirm monotonicity, the Lipschitz bound L and the
    offset bound |alpha(u) - a u| <= B.

    Args:
        nl (Nonlinearity): The temperature map.
        sample_range (NumericRange): The enthalpy interval to sample.
        n_samples (int): The number of equispaced samples (>= 2).

    Returns:
        GeneralizedValidationReport: The report, naming the worst violation if any.

    Raises:
        ValueError: If n_samples < 2, the range is empty, or a segment slope is negative.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be at least 2")

    lower, upper = float(sample_range["minimum"]), float(sample_range["maximum"])

    if not upper > lower:
        raise ValueError("sample range must satisfy minimum < maximum")

    if np.any(nl.slopes < 0):
        raise ValueError("alpha has a negative segment slope")

    # Always include the breakpoints so that kinks are sampled exactly:
    samples = np.unique(
        np.concatenate(
            [
                np.linspace(lower, upper, n_samples),
                nl.enthalpies[(nl.enthalpies >= lower) & (nl.enthalpies <= upper)],
            ]
        )
    )

    values = nl.evaluate(samples)

    quotients = np.diff(values) / np.diff(samples)

    offsets = np.abs(values - nl.slope_at_infinity * samples)

    worst = int(np.argmax(offsets))

    tolerance = 1e-12 * (1.0 + np.max(np.abs(samples)))

    monotone = bool(np.all(quotients >= -tolerance))
    lipschitz_ok = bool(np.all(quotients <= nl.lipschitz + tolerance))
    offset_ok = bool(offsets[worst] <= nl.offset_bound + tolerance)

    violation: Optional[str] = None

    if not monotone:
        violation = f"alpha decreases near u={samples[int(np.argmin(quotients))]}"
    elif not lipschitz_ok:
        violation = f"difference quotient {np.max(quotients)} exceeds L={nl.lipschitz}"
    elif not offset_ok:
        violation = (
            f"|alpha(u) - a u| = {offsets[worst]} exceeds B={nl.offset_bound} "
            f"at u={samples[worst]}"
        )

    return GeneralizedValidationReport(
        passed=violation is None,
        monotone=monotone,
        lipschitz_ok=lipschitz_ok,
        offset_ok=offset_ok,
        lipschitz=nl.lipschitz,
        worst_slope=float(np.max(quotients)),
        worst_offset=float(offsets[worst]),
        worst_offset_at=float(samples[worst]),
        growth_hypothesis_assumed=nl.slope_at_infinity != 1.0,
        violation=violation,
    )


# **************************************************************************************
