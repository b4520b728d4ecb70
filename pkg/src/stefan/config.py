# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import re
from pathlib import Path
from typing import (
    Any,
    Dict,
    List,
    Literal,
    Optional,
    Tuple,
    Union,
)

from pydantic import (
    BaseModel,
    ConfigDict,
    Field as PydanticField,
    ValidationError,
    field_validator,
    model_validator,
)

from .barriers import BarrierParams
from .common import BoundaryCondition
from .duality import TERMS, CertifyOptions
from .grid import Grid
from .measures import Atom, DensityBlock, SignedMeasure, suggest_half_width
from .nonlinearity import Nonlinearity, make_linear, make_two_phase
from .representation import MollifierScaling
from .similarity import InterfaceStudyParameters
from .solver import SolveConfig

# **************************************************************************************

# The blocks each subcommand cannot run without:
REQUIRED_BLOCKS: Dict[str, Tuple[str, ...]] = {
    "forward": ("measure", "grid", "time"),
    "barrier-table": (),
    "represent-check": ("represent",),
    "dual-certify": ("certify",),
    "convergence": (),
}

SUBCOMMANDS = tuple(REQUIRED_BLOCKS)

# **************************************************************************************


class ConfigurationError(ValueError):
    """
    Raised when an experiment configuration is rejected, carrying every violation found.
    """

    def __init__(self, violations: List[str]) -> None:
        self.violations = violations
        super().__init__("; ".join(violations))


# **************************************************************************************


def _split_top_level(text: str, separator: str = ",") -> List[str]:
    """
    Split text on a separator that is not nested inside brackets, braces or quotes.
    """
    parts: List[str] = []

    depth = 0
    quote: Optional[str] = None
    start = 0

    for i, char in enumerate(text):
        if quote:
            if char == quote:
                quote = None
            continue

        if char in "\"'":
            quote = char
        elif char in "[{":
            depth += 1
        elif char in "]}":
            depth -= 1
        elif char == separator and depth == 0:
            parts.append(text[start:i])
            start = i + 1

    parts.append(text[start:])

    return parts


# **************************************************************************************


def _strip_comment(line: str) -> str:
    quote: Optional[str] = None

    for i, char in enumerate(line):
        if quote:
            if char == quote:
                quote = None
        elif char in "\"'":
            quote = char
        elif char == "#":
            return line[:i]

    return line


# **************************************************************************************


class ConfigTextParser:
    """
    A parser that converts a line-oriented "key = value" experiment configuration into a
    nested dictionary.

    It supports dot-delimited keys for nesting, array-like keys with indices, repeated
    keys (which accumulate into a list), "#" comments, and values that are booleans,
    numbers, quoted or bare strings, bracketed lists or inline tables "{ k = v, ... }".
    """

    def __init__(self, raw: Union[bytes, str]) -> None:
        # If the input is in bytes, decode it into a string using UTF-8:
        if isinstance(raw, bytes):
            self.data: str = raw.decode("utf-8")
        else:
            self.data = raw

        self._seen: Dict[str, int] = {}

    def parse(self) -> Dict[str, Any]:
        """
        Parse the raw data into a nested dictionary.

        Raises:
            ConfigurationError: Listing every malformed line.
        """
        result: Dict[str, Any] = {}

        violations: List[str] = []

        self._seen = {}

        for number, raw_line in enumerate(self.data.splitlines(), start=1):
            line = _strip_comment(raw_line).strip()

            # Skip empty and comment-only lines:
            if not line:
                continue

            key, separator, value = line.partition("=")

            if not separator or not key.strip():
                violations.append(f"line {number}: expected 'key = value', got '{line}'")
                continue

            try:
                converted = self._convert_value(value.strip())
            except ValueError as error:
                violations.append(f"line {number}: {error}")
                continue

            self._insert_into_dict(result, key.strip(), converted)

        if violations:
            raise ConfigurationError(violations)

        return result

    def _convert_value(self, value: str) -> Any:
        """
        Convert a string value to a bool, int, float, string, list or dictionary.
        """
        if not value:
            raise ValueError("missing value")

        if value[0] == "[":
            if value[-1] != "]":
                raise ValueError(f"unterminated list '{value}'")

            inner = value[1:-1].strip()

            if not inner:
                return []

            return [self._convert_value(v.strip()) for v in _split_top_level(inner)]

        if value[0] == "{":
            if value[-1] != "}":
                raise ValueError(f"unterminated table '{value}'")

            table: Dict[str, Any] = {}

            for item in filter(None, (p.strip() for p in _split_top_level(value[1:-1]))):
                key, separator, inner = item.partition("=")

                if not separator:
                    raise ValueError(f"table entry '{item}' is not 'key = value'")

                table[key.strip()] = self._convert_value(inner.strip())

            return table

        if value[0] in "\"'":
            if len(value) < 2 or value[-1] != value[0]:
                raise ValueError(f"unterminated string {value}")

            return value[1:-1]

        # Check for boolean values in a case-insensitive manner:
        if value.lower() == "true":
            return True
        if value.lower() == "false":
            return False

        # Try converting the string to a numeric value:
        try:
            numeric = float(value)
        except ValueError:
            # If conversion to a number fails, return the bare string:
            return value

        if numeric.is_integer() and re.fullmatch(r"[+-]?\d+", value):
            return int(numeric)

        return numeric

    def _insert_into_dict(self, container: Dict[str, Any], key: str, value: Any) -> None:
        """
        Insert a key/value pair, supporting dot-delimited nesting, array indices and
        repeated keys.
        """
        count = self._seen.get(key, 0)

        self._seen[key] = count + 1

        parts: List[str] = key.split(".")

        current: Dict[str, Any] = container

        for i, part in enumerate(parts):
            last = i == len(parts) - 1

            array_match = re.match(r"(.+)\[(\d+)\]$", part)

            if array_match:
                base_key: str = array_match.group(1)
                index: int = int(array_match.group(2))

                if base_key not in current or not isinstance(current[base_key], list):
                    current[base_key] = []

                while len(current[base_key]) <= index:
                    current[base_key].append({})

                if last:
                    current[base_key][index] = value
                else:
                    if not isinstance(current[base_key][index], dict):
                        current[base_key][index] = {}
                    current = current[base_key][index]

                continue

            if not last:
                if part not in current or not isinstance(current[part], dict):
                    current[part] = {}
                current = current[part]
                continue

            # A repeated key accumulates: the second occurrence turns the value into a
            # list of occurrences, later ones append to it:
            if count == 1:
                current[part] = [current[part], value]
            elif count > 1:
                current[part].append(value)
            else:
                current[part] = value


# **************************************************************************************


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


# **************************************************************************************


class DensityConfig(_Block):
    box: List[Tuple[float, float]]

    values: List[float]

    shape: Optional[Tuple[int, ...]] = None

    @field_validator("box", mode="before")
    @classmethod
    def wrap_interval(cls, value: Any) -> Any:
        # A one-dimensional box may be written as a flat [lower, upper] pair:
        if isinstance(value, list) and len(value) == 2 and not isinstance(value[0], list):
            return [value]
        return value

    @field_validator("values", mode="before")
    @classmethod
    def wrap_scalar(cls, value: Any) -> Any:
        return [value] if isinstance(value, (int, float)) else value


# **************************************************************************************


class MeasureConfig(_Block):
    """
    Atoms written as [x, weight] or [x, y, weight], densities as inline tables, and the
    Gaussian exponent c of the moment condition.
    """

    atom: List[List[float]] = PydanticField(default_factory=list)

    density: List[DensityConfig] = PydanticField(default_factory=list)

    gauss_c: Optional[float] = PydanticField(default=None, gt=0.0)

    @field_validator("atom", mode="before")
    @classmethod
    def wrap_single_atom(cls, value: Any) -> Any:
        if isinstance(value, list) and value and not isinstance(value[0], list):
            return [value]
        return value

    @field_validator("density", mode="before")
    @classmethod
    def wrap_single_density(cls, value: Any) -> Any:
        return [value] if isinstance(value, dict) else value

    @field_validator("atom")
    @classmethod
    def validate_atoms(cls, value: List[List[float]]) -> List[List[float]]:
        for row in value:
            if len(row) not in (2, 3):
                raise ValueError(
                    f"atom {row} must be [x, weight] or [x, y, weight]"
                )
        return value

    def to_measure(self) -> SignedMeasure:
        return SignedMeasure(
            atoms=[Atom(location=tuple(row[:-1]), weight=row[-1]) for row in self.atom],
            density=[
                DensityBlock(box=d.box, values=d.values, shape=d.shape)
                for d in self.density
            ],
            gauss_c=self.gauss_c,
        )


# **************************************************************************************


class NonlinearityConfig(_Block):
    kind: Literal["two_phase", "linear", "breakpoints"] = "two_phase"

    # The diffusivity of the linear map:
    slope: float = PydanticField(default=1.0, gt=0.0)

    breakpoints: Optional[List[Tuple[float, float]]] = None

    slope_at_infinity: float = PydanticField(default=1.0, ge=0.0)

    offset_bound: float = PydanticField(default=1.0, ge=0.0)

    @model_validator(mode="after")
    def validate_breakpoints(self) -> "NonlinearityConfig":
        if self.kind == "breakpoints" and not self.breakpoints:
            raise ValueError("nonlinearity.breakpoints is required for kind=breakpoints")

        return self

    def to_nonlinearity(self) -> Nonlinearity:
        if self.kind == "two_phase":
            return make_two_phase()

        if self.kind == "linear":
            return make_linear(self.slope)

        return Nonlinearity(
            breakpoints=self.breakpoints or [],
            slope_at_infinity=self.slope_at_infinity,
            offset_bound=self.offset_bound,
        )


# **************************************************************************************


class GridConfig(_Block):
    dim: Literal[1, 2] = 1

    spacing: float = PydanticField(..., gt=0.0)

    # Derived from the data and gauss_c when omitted:
    half_width: Optional[float] = PydanticField(default=None, gt=0.0)


# **************************************************************************************


class TimeConfig(_Block):
    horizon: float = PydanticField(..., gt=0.0)

    dt: float = PydanticField(..., gt=0.0)

    store_every: int = PydanticField(default=1, ge=1)


# **************************************************************************************


class SolverConfig(_Block):
    tolerance: float = PydanticField(default=1e-12, gt=0.0)

    max_iterations: int = PydanticField(default=50, ge=1)

    boundary: BoundaryCondition = BoundaryCondition.ZERO_FLUX

    # Relative drift of the total enthalpy tolerated by a zero-flux forward run:
    conservation_tolerance: float = PydanticField(default=1e-12, gt=0.0)


# **************************************************************************************


class BarrierConfig(_Block):
    R: float = PydanticField(default=10.0, gt=1.0)

    T: float = PydanticField(default=1.0, gt=0.0)

    spacing: float = PydanticField(default=0.05, gt=0.0)

    steps: int = PydanticField(default=100, ge=1)

    def to_params(self) -> BarrierParams:
        return BarrierParams(R=self.R, T=self.T, spacing=self.spacing, steps=self.steps)


# **************************************************************************************


class CertifyConfig(_Block):
    run_a: str

    run_b: str

    theta: str = "ball-bump:radius=0.9,power=3"

    t0: float = PydanticField(..., gt=0.0)

    eps: float = PydanticField(..., gt=0.0)

    # Falls back to measure.gauss_c:
    gauss_c: Optional[float] = PydanticField(default=None, gt=0.0)

    budget: Dict[str, float] = PydanticField(
        default_factory=lambda: {name: 0.2 for name in TERMS}
    )

    L_min: float = PydanticField(default=2.0, gt=0.0)

    m_start: float = PydanticField(default=4.0, ge=1.0)

    delta_levels: int = PydanticField(default=16, ge=1)

    m_levels: int = PydanticField(default=8, ge=1)

    gamma_levels: int = PydanticField(default=16, ge=1)

    chain: bool = False

    def to_options(self) -> CertifyOptions:
        return CertifyOptions(
            budget_fractions=self.budget,
            L_min=self.L_min,
            m_start=self.m_start,
            delta_levels=self.delta_levels,
            m_levels=self.m_levels,
            gamma_levels=self.gamma_levels,
        )


# **************************************************************************************


class RepresentConfig(_Block):
    run: str

    R: float = PydanticField(..., gt=0.0)

    t1: float

    t2: float

    # A single spatial profile, e.g. "ball-bump:radius=0.9,power=3"; the built-in family
    # is used when omitted:
    test_function: Optional[str] = None

    # Reports the L1 distance between u and its mollification when set:
    mollifier_m: Optional[float] = PydanticField(default=None, ge=1.0)

    scaling: MollifierScaling = "mass_normalized"

    # Largest Green residual accepted; residuals are only reported when omitted:
    tolerance: Optional[float] = PydanticField(default=None, gt=0.0)

    @model_validator(mode="after")
    def validate_window(self) -> "RepresentConfig":
        if not self.t1 < self.t2:
            raise ValueError("represent.t1 must be smaller than represent.t2")

        return self


# **************************************************************************************


class ConvergenceConfig(_Block):
    liquid: float = PydanticField(default=3.0, gt=1.0)

    solid: float = PydanticField(default=1.5, gt=1.0)

    half_width: float = PydanticField(default=3.0, gt=0.0)

    spacing: float = PydanticField(default=0.04, gt=0.0)

    dt_per_h: float = PydanticField(default=0.125, gt=0.0)

    horizon: float = PydanticField(default=0.25, gt=0.0)

    levels: int = PydanticField(default=3, ge=2)

    min_order: float = PydanticField(default=0.8, gt=0.0)

    def to_params(self) -> InterfaceStudyParameters:
        return InterfaceStudyParameters(
            **self.model_dump(exclude={"min_order"})
        )


# **************************************************************************************


class OutputConfig(_Block):
    directory: str = "out"


# **************************************************************************************


class ExperimentConfig(_Block):
    """
    A validated experiment: initial data, constitutive map, discretisation and the
    blocks read by the individual subcommands. Unknown keys are rejected in every block.
    """

    measure: Optional[MeasureConfig] = None

    nonlinearity: NonlinearityConfig = PydanticField(default_factory=NonlinearityConfig)

    grid: Optional[GridConfig] = None

    time: Optional[TimeConfig] = None

    solver: SolverConfig = PydanticField(default_factory=SolverConfig)

    barrier: BarrierConfig = PydanticField(default_factory=BarrierConfig)

    certify: Optional[CertifyConfig] = None

    represent: Optional[RepresentConfig] = None

    convergence: ConvergenceConfig = PydanticField(default_factory=ConvergenceConfig)

    output: OutputConfig = PydanticField(default_factory=OutputConfig)

    seed: int = 0

    @field_validator("nonlinearity", mode="before")
    @classmethod
    def expand_keyword(cls, value: Any) -> Any:
        # "nonlinearity = two_phase" selects a map by keyword:
        return {"kind": value} if isinstance(value, str) else value

    @model_validator(mode="after")
    def validate_horizon(self) -> "ExperimentConfig":
        c = self.measure.gauss_c if self.measure else None

        if c is not None and self.time is not None and self.time.horizon > 1.0 / (4.0 * c):
            raise ValueError(
                f"time.horizon={self.time.horizon} exceeds the existence horizon "
                f"T = 1/(4c) = {1.0 / (4.0 * c)} for measure.gauss_c={c}"
            )

        if self.certify is not None and self.gauss_c is None:
            raise ValueError("certify needs gauss_c, either in certify or in measure")

        return self

    @property
    def gauss_c(self) -> Optional[float]:
        if self.certify is not None and self.certify.gauss_c is not None:
            return self.certify.gauss_c

        return self.measure.gauss_c if self.measure else None

    def build_grid(self) -> Grid:
        """
        The symmetric grid of the grid block; the half width defaults to one where the
        Gaussian weight of the data falls below 1e-12.

        Raises:
            ValueError: If the grid block is missing, or no half width can be derived.
        """
        if self.grid is None:
            raise ValueError("the grid block is required")

        half_width = self.grid.half_width

        if half_width is None:
            if self.measure is None or self.measure.gauss_c is None:
                raise ValueError("grid.half_width is required when measure.gauss_c is absent")

            half_width = suggest_half_width(self.measure.to_measure(), self.measure.gauss_c)

        return Grid.symmetric(self.grid.dim, half_width, self.grid.spacing)

    def solve_config(self) -> SolveConfig:
        if self.time is None:
            raise ValueError("the time block is required")

        return SolveConfig(
            grid=self.build_grid(),
            horizon=self.time.horizon,
            dt=self.time.dt,
            boundary=self.solver.boundary,
            tolerance=self.solver.tolerance,
            max_iterations=self.solver.max_iterations,
            store_every=self.time.store_every,
            gauss_c=self.measure.gauss_c if self.measure else None,
        )


# **************************************************************************************


def _describe(error: ValidationError) -> List[str]:
    violations: List[str] = []

    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        message = item["msg"]
        violations.append(f"{location}: {message}" if location else message)

    return violations


# **************************************************************************************


def _set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    current = data

    *parents, leaf = key.split(".")

    for part in parents:
        if not isinstance(current.get(part), dict):
            current[part] = {}
        current = current[part]

    current[leaf] = value


# **************************************************************************************


def build_config(
    data: Dict[str, Any],
    subcommand: Optional[str] = None,
    base: Optional[Path] = None,
) -> ExperimentConfig:
    """
    Validate a nested configuration dictionary, collecting every violation.

    Run directories named by the certify and represent blocks are resolved against
    base (when relative) and must exist.

    Raises:
        ConfigurationError: Listing every violation found.
    """
    violations: List[str] = []

    if subcommand is not None:
        if subcommand not in REQUIRED_BLOCKS:
            raise ConfigurationError([f"unknown subcommand '{subcommand}'"])

        for block in REQUIRED_BLOCKS[subcommand]:
            if block not in data:
                violations.append(f"{block}: block required by '{subcommand}' is missing")

    config: Optional[ExperimentConfig] = None

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as error:
        violations.extend(_describe(error))

    if config is not None:
        root = base or Path(".")

        directories: List[Tuple[str, BaseModel, str]] = []

        if config.certify is not None:
            directories += [
                ("certify.run_a", config.certify, "run_a"),
                ("certify.run_b", config.certify, "run_b"),
            ]

        if config.represent is not None:
            directories.append(("represent.run", config.represent, "run"))

        for name, block, attribute in directories:
            path = Path(getattr(block, attribute))

            if not path.is_absolute():
                path = root / path

            if not path.is_dir():
                violations.append(f"{name}: run directory '{path}' does not exist")
            else:
                setattr(block, attribute, str(path))

    if violations or config is None:
        raise ConfigurationError(violations)

    return config


# **************************************************************************************


def parse_config(
    path: Optional[Union[str, Path]],
    subcommand: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Read and validate an experiment configuration file.

    Args:
        path: The configuration file, or None to start from the defaults.
        subcommand: When given, the blocks it requires must be present.
        overrides: Dotted keys (e.g. "barrier.R") applied over the file's values.

    Raises:
        ConfigurationError: Listing every violation, not just the first.
        OSError: If the file cannot be read.
    """
    data: Dict[str, Any] = {}

    base: Optional[Path] = None

    if path is not None:
        data = ConfigTextParser(Path(path).read_bytes()).parse()
        base = Path(path).parent

    for key, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(data, key, value)

    return build_config(data, subcommand=subcommand, base=base)


# **************************************************************************************
