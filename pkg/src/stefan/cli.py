# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import argparse
import csv
import logging
from pathlib import Path
from time import perf_counter
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field as PydanticField

from .barriers import barrier_table, check_flux_bound, solve_w
from .common import BoundaryCondition
from .config import SUBCOMMANDS, ConfigurationError, ExperimentConfig, parse_config
from .duality import CertificateReport, certify, certify_chain
from .grid import BallDomain, match_resolution, read_run_directory, write_run_directory
from .manifest import build_manifest, utc_now, write_manifest
from .measures import cell_average
from .representation import MollifierSpec, green_terms, mollify
from .similarity import interface_convergence_study
from .solver import run_with_ledger
from .testfunctions import (
    SpaceTimeProduct,
    TimeFactor,
    amplitude_field,
    builtin_test_functions,
    parse_theta_spec,
)

# **************************************************************************************

EPILOG = """\
configuration file: one "key = value" per line, "#" starts a comment, dotted keys
nest, repeated keys accumulate. Unknown keys are rejected.

  measure.atom = [x, weight] | [x, y, weight]   (repeat for several atoms)
  measure.density = { box = [lo, hi], values = [...], shape = [...] }
  measure.gauss_c = <c>          horizon must satisfy T <= 1/(4c)
  nonlinearity = two_phase | linear
  nonlinearity.kind / .slope / .breakpoints / .slope_at_infinity / .offset_bound
  grid.dim = 1 | 2, grid.spacing = <h>, grid.half_width = <w> (default from gauss_c)
  time.horizon, time.dt, time.store_every = 1
  solver.tolerance = 1e-12, solver.max_iterations = 50,
  solver.boundary = zero_flux | dirichlet_zero, solver.conservation_tolerance = 1e-12
  barrier.R = 10, barrier.T = 1, barrier.spacing = 0.05, barrier.steps = 100
  represent.run, represent.R, represent.t1, represent.t2, represent.test_function,
  represent.mollifier_m, represent.scaling = mass_normalized | unit_mass, represent.tolerance
  certify.run_a, certify.run_b, certify.theta = "ball-bump:radius=0.9,power=3",
  certify.t0, certify.eps, certify.gauss_c, certify.budget = { I1 = 0.2, ... },
  certify.L_min = 2, certify.m_start = 4, certify.delta_levels = 16,
  certify.m_levels = 8, certify.gamma_levels = 16, certify.chain = false
  convergence.liquid = 3, convergence.solid = 1.5, convergence.half_width = 3,
  convergence.spacing = 0.04, convergence.dt_per_h = 0.125, convergence.horizon = 0.25,
  convergence.levels = 3, convergence.min_order = 0.8
  output.directory = out, seed = 0

exit codes: 0 pass, 1 numeric check failed, 2 configuration or runtime error
"""

# **************************************************************************************


class SubcommandResult(BaseModel):
    passed: bool

    directory: Path

    outputs: List[Path] = PydanticField(default_factory=list)

    extra: Dict[str, Any] = PydanticField(default_factory=dict)


# **************************************************************************************


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(x)) if isinstance(x, float) else x for x in row])

    return path


# **************************************************************************************


def _forward(cfg: ExperimentConfig, out: Optional[Path]) -> SubcommandResult:
    if cfg.measure is None:
        raise ValueError("forward needs a measure block")

    mu = cfg.measure.to_measure()

    solve = cfg.solve_config()

    if mu.dim is not None and mu.dim != solve.grid.dim:
        raise ValueError(f"the measure is {mu.dim}D but the grid is {solve.grid.dim}D")

    directory = out or Path(cfg.output.directory)

    u0 = cell_average(mu, solve.grid)

    history, ledger = run_with_ledger(u0, solve, cfg.nonlinearity.to_nonlinearity())

    outputs = write_run_directory(directory, history)

    outputs.append(
        write_csv(
            directory / "ledger.csv",
            ["step", "total_enthalpy"],
            list(enumerate(ledger.totals)),
        )
    )

    departure = max(abs(t - ledger.totals[0]) for t in ledger.totals)

    scale = float(np.sum(np.abs(u0.values))) * solve.grid.cell_volume or 1.0

    passed = True

    if solve.boundary == BoundaryCondition.ZERO_FLUX:
        passed = departure <= cfg.solver.conservation_tolerance * scale

        if not passed:
            logging.warning(
                f"total enthalpy drifted by {departure:.3e} (scale {scale:.3e})"
            )

    return SubcommandResult(
        passed=passed,
        directory=directory,
        outputs=outputs,
        extra={
            "steps": solve.steps,
            "stored_slices": history.n_slices,
            "enthalpy_departure": departure,
            "enthalpy_scale": scale,
            "grid": solve.grid.model_dump(mode="json"),
        },
    )


# **************************************************************************************


def _barrier_table(cfg: ExperimentConfig, out: Optional[Path]) -> SubcommandResult:
    p = cfg.barrier.to_params()

    path = out or Path(cfg.output.directory) / "barrier_table.csv"

    w = solve_w(p)

    report = check_flux_bound(w, p)

    written = write_csv(
        path,
        ["t", "numeric_flux", "closed_form_flux", "envelope"],
        barrier_table(p, w),
    )

    if not report.passed:
        logging.warning(f"barrier flux exceeds the envelope first at t={report.first_failure}")

    return SubcommandResult(
        passed=report.passed,
        directory=path.parent,
        outputs=[written],
        extra={"slack": report.slack, "first_failure": report.first_failure},
    )


# **************************************************************************************


def _represent_check(cfg: ExperimentConfig, out: Optional[Path]) -> SubcommandResult:
    r = cfg.represent

    if r is None:
        raise ValueError("represent-check needs a represent block")

    u = read_run_directory(r.run)

    nl = cfg.nonlinearity.to_nonlinearity()

    ball = BallDomain(grid=u.grid, radius=r.R)

    if r.test_function is not None:
        functions = [
            SpaceTimeProduct(
                name=r.test_function,
                profile=parse_theta_spec(r.test_function, u.grid.dim),
                time=TimeFactor(window=(u.t_start, u.t_end)),
            )
        ]
    else:
        functions = builtin_test_functions(u.grid.dim, u.t_start, u.t_end)

    rows = []

    for phi in functions:
        terms = green_terms(u, nl, phi, ball, r.t1, r.t2)

        rows.append(
            (
                phi.name,
                terms.lhs,
                terms.initial,
                terms.boundary,
                terms.volume_time,
                terms.volume_space,
                terms.residual,
            )
        )

    path = out or Path(cfg.output.directory) / "representation.csv"

    written = write_csv(
        path,
        ["name", "lhs", "initial", "boundary", "volume_time", "volume_space", "residual"],
        rows,
    )

    extra: Dict[str, Any] = {"largest_residual": max(row[-1] for row in rows)}

    if r.mollifier_m is not None:
        spec = MollifierSpec(m=r.mollifier_m, scaling=r.scaling)

        u_m, _ = mollify(u, spec, nl, ball=ball, window=(r.t1, r.t2))

        k1, k2 = u.index_of(r.t1, exact=True), u.index_of(r.t2, exact=True)

        gap = np.abs(u_m.slices[k1 : k2 + 1] - u.slices[k1 : k2 + 1])

        extra["mollified_l1"] = float(
            np.sum(gap[:, ball.interior]) * u.grid.cell_volume * u.dt
        )

    passed = r.tolerance is None or all(row[-1] <= r.tolerance for row in rows)

    return SubcommandResult(
        passed=passed, directory=path.parent, outputs=[written], extra=extra
    )


# **************************************************************************************


def _report_summary(report: CertificateReport) -> Dict[str, Any]:
    return {
        "verdict": report.verdict,
        "certified_bound": report.certified_bound,
        "target": report.target,
        "decomposition_defect": report.decomposition_defect,
        "decomposition_slack": report.decomposition_slack,
        "trace_sweep": report.trace_sweep,
        "binding_constraint": report.binding_constraint,
        "obstruction": report.obstruction,
        "growth_hypothesis_assumed": report.growth_hypothesis_assumed,
        "schedule": report.schedule.model_dump() if report.schedule else None,
    }


# **************************************************************************************


def _dual_certify(cfg: ExperimentConfig, out: Optional[Path]) -> SubcommandResult:
    c = cfg.certify

    gauss_c = cfg.gauss_c

    if c is None or gauss_c is None:
        raise ValueError("dual-certify needs a certify block and gauss_c")

    u, v = match_resolution(read_run_directory(c.run_a), read_run_directory(c.run_b))

    theta = amplitude_field(parse_theta_spec(c.theta, u.grid.dim), u.grid)

    nl = cfg.nonlinearity.to_nonlinearity()

    options = c.to_options()

    header = ["name", "computed", "bound", "slack", "budget", "pass"]

    path = out or Path(cfg.output.directory) / "report.csv"

    if c.chain:
        chain = certify_chain(u, v, theta, c.t0, c.eps, gauss_c, nl, options)

        rows = [
            (f"[{start:g},{end:g}] {row[0]}", *row[1:])
            for (start, end), report in zip(chain.windows, chain.reports)
            for row in report.to_rows()
        ]

        return SubcommandResult(
            passed=chain.chain_ok,
            directory=path.parent,
            outputs=[write_csv(path, header, rows)],
            extra={
                "windows": chain.windows,
                "reports": [_report_summary(r) for r in chain.reports],
            },
        )

    report = certify(u, v, theta, c.t0, c.eps, gauss_c, nl, options, theta_name=c.theta)

    logging.info(
        f"certificate: verdict={report.verdict}, bound={report.certified_bound:.3e}"
    )

    return SubcommandResult(
        passed=report.verdict == "PASS",
        directory=path.parent,
        outputs=[write_csv(path, header, report.to_rows())],
        extra=_report_summary(report),
    )


# **************************************************************************************


def _convergence(cfg: ExperimentConfig, out: Optional[Path]) -> SubcommandResult:
    study = interface_convergence_study(cfg.convergence.to_params())

    orders = [float("nan")] + list(study.orders)

    path = out or Path(cfg.output.directory) / "convergence.csv"

    written = write_csv(
        path,
        ["h", "dt", "error", "order"],
        list(zip(study.spacings, study.dts, study.errors, orders)),
    )

    passed = study.overall_order >= cfg.convergence.min_order

    if not passed:
        logging.warning(
            f"measured interface order {study.overall_order:.3f} is below "
            f"{cfg.convergence.min_order}"
        )

    return SubcommandResult(
        passed=passed,
        directory=path.parent,
        outputs=[written],
        extra={"lambda": study.lam, "overall_order": study.overall_order},
    )


# **************************************************************************************

HANDLERS: Dict[str, Callable[[ExperimentConfig, Optional[Path]], SubcommandResult]] = {
    "forward": _forward,
    "barrier-table": _barrier_table,
    "represent-check": _represent_check,
    "dual-certify": _dual_certify,
    "convergence": _convergence,
}

# **************************************************************************************


def run_subcommand(
    cfg: ExperimentConfig, name: str, out: Optional[Path] = None
) -> int:
    """
    Dispatch a subcommand and write its manifest beside its outputs.

    Returns:
        int: 0 when every numeric check passed, 1 otherwise.

    Raises:
        ValueError: For an unknown subcommand or invalid inputs.
        RuntimeError: When a nonlinear solve fails to converge.
        OSError: When inputs cannot be read or outputs written.
    """
    if name not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand '{name}'")

    started = utc_now()

    clock = perf_counter()

    result = HANDLERS[name](cfg, out)

    manifest = build_manifest(
        subcommand=name,
        config=cfg.model_dump(mode="json"),
        started=started,
        wall_time=perf_counter() - clock,
        outputs=list(result.outputs),
        passed=result.passed,
        extra=result.extra,
    )

    write_manifest(result.directory, manifest)

    logging.info(f"{name}: passed={result.passed}, outputs in {result.directory}")

    return 0 if result.passed else 1


# **************************************************************************************


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stefan",
        description=(
            "Enthalpy solver and duality certificate harness for the two-phase Stefan "
            "problem with signed measure data."
        ),
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment configuration file")
    common.add_argument("--out", type=Path, help="output directory or CSV file")
    common.add_argument("--verbose", action="store_true", help="log at INFO level")

    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    def add(name: str, summary: str) -> argparse.ArgumentParser:
        return subparsers.add_parser(
            name,
            parents=[common],
            help=summary,
            epilog=EPILOG,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )

    add("forward", "solve from measure data and write the slices")

    barrier = add("barrier-table", "tabulate the barrier flux against its envelope")
    barrier.add_argument("--R", dest="barrier.R", type=float)
    barrier.add_argument("--T", dest="barrier.T", type=float)
    barrier.add_argument("--spacing", dest="barrier.spacing", type=float)
    barrier.add_argument("--steps", dest="barrier.steps", type=int)

    represent = add("represent-check", "evaluate the Green representation terms")
    represent.add_argument("--run", dest="represent.run", type=Path)
    represent.add_argument("--R", dest="represent.R", type=float)
    represent.add_argument("--t1", dest="represent.t1", type=float)
    represent.add_argument("--t2", dest="represent.t2", type=float)
    represent.add_argument("--test-function", dest="represent.test_function")
    represent.add_argument("--m", dest="represent.mollifier_m", type=float)

    dual = add("dual-certify", "certify |int (u - v)(t0) theta| for two runs")
    dual.add_argument("--runA", dest="certify.run_a", type=Path)
    dual.add_argument("--runB", dest="certify.run_b", type=Path)
    dual.add_argument("--theta", dest="certify.theta")
    dual.add_argument("--t0", dest="certify.t0", type=float)
    dual.add_argument("--eps", dest="certify.eps", type=float)
    dual.add_argument("--gauss-c", dest="certify.gauss_c", type=float)
    dual.add_argument("--chain", dest="certify.chain", action="store_const", const=True)

    convergence = add("convergence", "measure the interface order against Neumann")
    convergence.add_argument("--spacing", dest="convergence.spacing", type=float)
    convergence.add_argument("--levels", dest="convergence.levels", type=int)

    return parser


# **************************************************************************************


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(message)s",
    )

    # Dotted destinations are configuration overrides; paths given on the command
    # line are taken relative to the working directory:
    overrides: Dict[str, Any] = {
        key: str(value.resolve()) if isinstance(value, Path) else value
        for key, value in vars(args).items()
        if "." in key and value is not None
    }

    try:
        cfg = parse_config(args.config, subcommand=args.subcommand, overrides=overrides)
        return run_subcommand(cfg, args.subcommand, out=args.out)
    except ConfigurationError as error:
        for violation in error.violations:
            logging.error(f"configuration: {violation}")
        return 2
    except (ValueError, RuntimeError, OSError) as error:
        logging.error(f"{args.subcommand} failed: {error}")
        return 2


# **************************************************************************************

if __name__ == "__main__":
    raise SystemExit(main())

# **************************************************************************************
