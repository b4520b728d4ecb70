# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import unittest
from math import e, exp, pi, sqrt

import numpy as np
from scipy.integrate import quad
from scipy.special import erfc

from stefan.barriers import (
    ENVELOPE_CONSTANT,
    BarrierParams,
    ComparisonCoefficient,
    _flux_report,
    admissible_radius,
    barrier_table,
    check_envelope,
    check_flux_bound,
    comparison_h_vs_W,
    envelope,
    restart_bound,
    rotate_field,
    scan_admissible_radius,
    solve_comparison_problem,
    solve_w,
    wtilde,
    wtilde_dt,
    wtilde_dx,
    wtilde_dx_at_R,
    wtilde_dxx,
)
from stefan.grid import BallDomain, Field, Grid

# **************************************************************************************


def heat_kernel_barrier(x: float, t: float, R: float) -> float:
    def kernel(y: float) -> float:
        return exp(-((x - y) ** 2) / (4.0 * t)) / sqrt(4.0 * pi * t)

    left, _ = quad(kernel, -np.inf, 1.0, epsabs=1e-14, epsrel=1e-13)
    right, _ = quad(kernel, 2.0 * R - 1.0, np.inf, epsabs=1e-14, epsrel=1e-13)

    return 4.0 * (left - right)


# **************************************************************************************


class TestBarrierParams(unittest.TestCase):
    def test_radius_must_exceed_one(self) -> None:
        with self.assertRaises(ValueError):
            BarrierParams(R=1.0, T=1.0)

    def test_length_must_be_a_multiple_of_the_spacing(self) -> None:
        with self.assertRaises(ValueError):
            BarrierParams(R=1.52, T=1.0, spacing=0.05)

    def test_dt(self) -> None:
        self.assertAlmostEqual(BarrierParams(R=10.0, T=1.0).dt, 0.01)


# **************************************************************************************


class TestClosedFormBarrier(unittest.TestCase):
    def test_matches_the_heat_kernel_integral(self) -> None:
        for x, t, R in ((1.0, 0.5, 3.0), (2.5, 1.0, 4.0), (0.2, 0.1, 2.0), (3.9, 2.0, 4.0)):
            with self.subTest(x=x, t=t, R=R):
                self.assertAlmostEqual(
                    float(wtilde(x, t, R)), heat_kernel_barrier(x, t, R), delta=1e-10
                )

    def test_vanishes_at_R(self) -> None:
        self.assertAlmostEqual(float(wtilde(5.0, 0.7, 5.0)), 0.0, places=14)

    def test_solves_the_heat_equation(self) -> None:
        x = np.linspace(0.5, 3.5, 13)

        for t, d in ((0.4, 1e-3), (0.1, 5e-4)):
            in_time = (wtilde(x, t + d, 4.0) - wtilde(x, t - d, 4.0)) / (2.0 * d)

            in_space = (
                wtilde(x + d, t, 4.0) - 2.0 * wtilde(x, t, 4.0) + wtilde(x - d, t, 4.0)
            ) / d**2

            with self.subTest(t=t):
                # Both centred differences carry O(d^2) truncation error:
                np.testing.assert_allclose(in_time, in_space, atol=1e-3)
                np.testing.assert_allclose(in_time, wtilde_dt(x, t, 4.0), atol=1e-3)

    def test_derivatives_match_finite_differences(self) -> None:
        d = 1e-4
        x = np.linspace(0.5, 3.5, 13)

        first = (wtilde(x + d, 0.4, 4.0) - wtilde(x - d, 0.4, 4.0)) / (2.0 * d)
        second = (
            wtilde(x + d, 0.4, 4.0) - 2.0 * wtilde(x, 0.4, 4.0) + wtilde(x - d, 0.4, 4.0)
        ) / d**2
        in_time = (wtilde(x, 0.4 + d, 4.0) - wtilde(x, 0.4 - d, 4.0)) / (2.0 * d)

        np.testing.assert_allclose(wtilde_dx(x, 0.4, 4.0), first, atol=1e-6)
        np.testing.assert_allclose(wtilde_dxx(x, 0.4, 4.0), second, atol=1e-4)
        np.testing.assert_allclose(wtilde_dt(x, 0.4, 4.0), in_time, atol=1e-6)

    def test_flux_at_R_is_the_derivative_magnitude(self) -> None:
        t = np.array([0.1, 0.5, 1.0])

        np.testing.assert_allclose(
            wtilde_dx_at_R(t, 4.0), np.abs(wtilde_dx(4.0, t, 4.0)), rtol=1e-12
        )

    def test_nonpositive_time_is_rejected(self) -> None:
        for fn in (
            lambda: wtilde(1.0, 0.0, 3.0),
            lambda: wtilde_dx_at_R(-1.0, 3.0),
            lambda: envelope([0.5, 0.0], 3.0),
        ):
            with self.subTest(fn=fn):
                with self.assertRaises(ValueError):
                    fn()

    def test_envelope(self) -> None:
        self.assertAlmostEqual(
            float(envelope(0.5, 2.0)), ENVELOPE_CONSTANT * exp(-1.0), places=14
        )
        self.assertAlmostEqual(ENVELOPE_CONSTANT, 4.0 / sqrt(pi))


# **************************************************************************************


class TestAdmissibleRadius(unittest.TestCase):
    def test_long_horizons_share_the_peak_radius(self) -> None:
        expected = 2.0 + sqrt(2.0 + 4.0 / e)

        for T in (1.0 / e, 1.0, 5.0):
            with self.subTest(T=T):
                self.assertAlmostEqual(admissible_radius(T), expected, places=12)

    def test_short_horizon(self) -> None:
        self.assertAlmostEqual(
            admissible_radius(0.1), 2.0 + sqrt(2.0 + 0.4 * np.log(10.0)), places=12
        )

    def test_trace_condition_binds_for_long_horizons(self) -> None:
        T = 100.0

        R = admissible_radius(T)

        self.assertGreater(R, 2.0 + sqrt(2.0 + 4.0 / e))
        self.assertAlmostEqual(float(wtilde(1.0, T, R)), 1.0, places=9)

    def test_nonpositive_horizon_is_rejected(self) -> None:
        with self.assertRaises(ValueError):
            admissible_radius(0.0)

    def test_scan_agrees_with_the_analytic_radius(self) -> None:
        scan = scan_admissible_radius(1.0, np.arange(3.0, 5.0, 0.01))

        self.assertIsNotNone(scan.radius)
        assert scan.radius is not None
        self.assertLessEqual(abs(scan.radius - scan.analytic_radius), 0.01)

    def test_scan_without_admissible_radius(self) -> None:
        scan = scan_admissible_radius(1.0, [1.5, 2.0, 2.5])

        self.assertIsNone(scan.radius)
        self.assertFalse(scan.unit_constant_holds)

    def test_check_envelope(self) -> None:
        self.assertTrue(check_envelope(BarrierParams(R=10.0, T=1.0)))
        self.assertFalse(check_envelope(BarrierParams(R=2.0, T=1.0)))


# **************************************************************************************


class TestNumericBarrier(unittest.TestCase):
    def test_boundary_values_and_bounds(self) -> None:
        w = solve_w(BarrierParams(R=3.0, T=0.5, spacing=0.1, steps=50))

        np.testing.assert_array_equal(w.slices[:, 0], 1.0)
        np.testing.assert_array_equal(w.slices[:, -1], 0.0)
        self.assertGreaterEqual(float(np.min(w.slices)), -1e-12)
        self.assertLessEqual(float(np.max(w.slices)), 1.0 + 1e-12)
        self.assertTrue(np.all(np.diff(w.slices[-1]) <= 1e-12))

    def test_relaxes_to_the_linear_profile(self) -> None:
        w = solve_w(BarrierParams(R=2.0, T=50.0, spacing=0.05, steps=500))

        x = w.grid.axes()[0]

        np.testing.assert_allclose(w.slices[-1], 2.0 - x, atol=1e-3)

    def test_early_profile_is_the_half_line_solution(self) -> None:
        w = solve_w(BarrierParams(R=6.0, T=0.1, spacing=0.05, steps=1000))

        x = w.grid.axes()[0]

        near = x <= 2.0

        np.testing.assert_allclose(
            w.slices[-1][near], erfc((x[near] - 1.0) / (2.0 * sqrt(0.1))), atol=1e-2
        )

    def test_flux_bound_holds_for_a_wide_interval(self) -> None:
        p = BarrierParams(R=10.0, T=1.0)

        report = check_flux_bound(solve_w(p), p)

        self.assertTrue(report.passed)
        self.assertIsNone(report.first_failure)
        self.assertEqual(len(report.times), p.steps)

    def test_table(self) -> None:
        p = BarrierParams(R=10.0, T=1.0)

        rows = barrier_table(p)

        self.assertEqual(len(rows), p.steps)
        self.assertAlmostEqual(rows[0][0], p.dt)
        self.assertAlmostEqual(rows[-1][0], p.T)

        for t, numeric, closed_form, bound in rows:
            self.assertGreaterEqual(bound, closed_form)
            self.assertGreaterEqual(numeric, 0.0)

    def test_table_reuses_a_given_solution(self) -> None:
        p = BarrierParams(R=3.0, T=0.5, spacing=0.1, steps=50)

        w = solve_w(p)

        self.assertEqual(barrier_table(p, w), barrier_table(p))

    def test_failing_report(self) -> None:
        times = np.array([0.1, 0.2, 0.3])

        with self.assertLogs(level="WARNING"):
            report = _flux_report(times, np.array([0.0, 2.0, 3.0]), np.ones(3), 0.5)

        self.assertFalse(report.passed)
        self.assertAlmostEqual(report.first_failure, 0.2)


# **************************************************************************************


class TestComparisonCoefficient(unittest.TestCase):
    def test_kinds(self) -> None:
        self.assertEqual(ComparisonCoefficient(kind="unit")(0.3), 1.0)
        self.assertEqual(ComparisonCoefficient(kind="constant", kappa=0.4)(0.3), 0.4)

        oscillatory = ComparisonCoefficient(kind="oscillatory", kappa=0.2, period=0.1)

        values = [oscillatory(t) for t in np.linspace(0.0, 0.3, 61)]

        self.assertGreaterEqual(min(values), 0.2 - 1e-12)
        self.assertLessEqual(max(values), 1.0 + 1e-12)

    def test_kappa_is_bounded_by_one(self) -> None:
        with self.assertRaises(ValueError):
            ComparisonCoefficient(kind="constant", kappa=1.5)


# **************************************************************************************


class TestComparisonProblem(unittest.TestCase):
    def setUp(self) -> None:
        self.grid = Grid.symmetric(2, 2.5, 0.05)
        self.ball = BallDomain(grid=self.grid, radius=2.0)
        self.centres = self.grid.centers()

    def datum(self) -> Field:
        inside = np.sum(self.centres**2, axis=-1) < 0.8**2
        return Field(grid=self.grid, values=inside.astype(float))

    def test_barrier_dominates_for_every_coefficient(self) -> None:
        for kind in ("unit", "constant", "oscillatory"):
            with self.subTest(kind=kind):
                history = solve_comparison_problem(
                    self.datum(),
                    self.ball,
                    ComparisonCoefficient(kind=kind, kappa=0.3),
                    0.01,
                    10,
                )

                report = comparison_h_vs_W(history, self.ball)

                self.assertTrue(report.comparison_passed)
                self.assertTrue(report.passed)

    def test_rotation_of_symmetric_data(self) -> None:
        coefficient = ComparisonCoefficient(kind="unit")

        history = solve_comparison_problem(self.datum(), self.ball, coefficient, 0.01, 5)
        rotated = solve_comparison_problem(
            rotate_field(self.datum()), self.ball, coefficient, 0.01, 5
        )

        report = comparison_h_vs_W(history, self.ball, rotated=rotated)

        assert report.rotation_discrepancy is not None
        self.assertLess(report.rotation_discrepancy, 1e-10)

    def test_data_above_one_beyond_the_half_space_fails(self) -> None:
        x1, x2 = self.centres[..., 0], self.centres[..., 1]

        block = (x1 >= 1.2) & (x1 <= 1.6) & (np.abs(x2) <= 0.2)

        history = solve_comparison_problem(
            Field(grid=self.grid, values=5.0 * block),
            self.ball,
            ComparisonCoefficient(kind="unit"),
            0.01,
            10,
        )

        report = comparison_h_vs_W(history, self.ball)

        self.assertFalse(report.comparison_passed)
        self.assertFalse(report.passed)

    def test_one_dimensional_history_is_rejected(self) -> None:
        grid = Grid.symmetric(1, 2.5, 0.05)
        ball = BallDomain(grid=grid, radius=2.0)

        history = solve_comparison_problem(
            Field(grid=grid, values=np.zeros(grid.shape)),
            ball,
            ComparisonCoefficient(),
            0.01,
            2,
        )

        with self.assertRaises(ValueError):
            comparison_h_vs_W(history, ball)

    def test_restart(self) -> None:
        history = solve_comparison_problem(
            self.datum(), self.ball, ComparisonCoefficient(), 0.01, 10
        )

        report = restart_bound(history.slice(history.n_slices - 1), self.ball, 0.1, 0.2, 10)

        self.assertAlmostEqual(report.T1, 0.1)
        self.assertTrue(report.flux.passed)
        self.assertEqual(len(report.flux.times), 10)
        self.assertAlmostEqual(report.flux.times[-1], 0.2)

    def test_restart_requires_a_later_horizon(self) -> None:
        with self.assertRaises(ValueError):
            restart_bound(self.datum(), self.ball, 0.2, 0.2, 10)


# **************************************************************************************

if __name__ == "__main__":
    unittest.main()
