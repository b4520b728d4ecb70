# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import unittest
from math import log2, pi

import numpy as np
from scipy.integrate import quad

from stefan.grid import BallDomain, Field, Grid, SpaceTimeField
from stefan.nonlinearity import make_linear, make_two_phase
from stefan.representation import (
    GreenIdentityTerms,
    MollifierSpec,
    bump_mass,
    green_residual,
    green_terms,
    mollifier_kernel,
    mollify,
    smooth_values,
)
from stefan.solver import SolveConfig, evolve
from stefan.testfunctions import (
    BallBump,
    SpaceTimeProduct,
    TimeFactor,
    builtin_test_functions,
)

# **************************************************************************************


def forward(spacing: float, dt: float, linear: bool = False) -> SpaceTimeField:
    grid = Grid.symmetric(1, 2.0, spacing)

    x = grid.axes()[0]

    nl = make_linear(1.0) if linear else make_two_phase()

    u0 = Field(grid=grid, values=3.0 * np.exp(-4.0 * x**2) - 0.5)

    return evolve(u0, SolveConfig(grid=grid, horizon=0.2, dt=dt), nl)


# **************************************************************************************


class TestMollifier(unittest.TestCase):
    def test_bump_mass(self) -> None:
        one, _ = quad(lambda z: (1.0 - z * z) ** 4, -1.0, 1.0)

        self.assertAlmostEqual(bump_mass(1), one, places=12)
        self.assertAlmostEqual(bump_mass(2), pi / 5.0, places=12)

    def test_mass_normalized_kernel(self) -> None:
        kernel = mollifier_kernel(MollifierSpec(m=4.0), 0.05, 0.02, 1)

        self.assertEqual(kernel.shape, (25, 11))
        self.assertAlmostEqual(float(np.sum(kernel)), 1.0, places=14)
        np.testing.assert_allclose(kernel, kernel[::-1, ::-1], atol=1e-16)

    def test_unit_continuous_mass_scaling(self) -> None:
        m = 2.0

        kernel = mollifier_kernel(MollifierSpec(m=m, scaling="unit_mass"), 0.01, 0.01, 1)

        self.assertAlmostEqual(float(np.sum(kernel)), 1.0 / m, delta=1e-3)

    def test_m_below_one_is_rejected(self) -> None:
        with self.assertRaises(ValueError):
            MollifierSpec(m=0.5)

    def test_constants_are_preserved(self) -> None:
        kernel = mollifier_kernel(MollifierSpec(m=5.0), 0.1, 0.05, 2)

        values = np.full((12, 9, 10), 2.5)

        np.testing.assert_allclose(smooth_values(values, kernel), 2.5, atol=1e-12)

    def test_mollify_keeps_the_mesh(self) -> None:
        grid = Grid.symmetric(1, 2.0, 0.1)

        u = SpaceTimeField(grid=grid, dt=0.05, slices=np.full((21, *grid.shape), 3.0))

        smoothed, temperature = mollify(u, MollifierSpec(m=4.0), make_two_phase())

        self.assertEqual(smoothed.slices.shape, u.slices.shape)
        np.testing.assert_allclose(smoothed.slices, 3.0, atol=1e-12)
        np.testing.assert_allclose(temperature.slices, 2.0, atol=1e-12)

    def test_margins_are_enforced(self) -> None:
        grid = Grid.symmetric(1, 2.0, 0.1)

        u = SpaceTimeField(grid=grid, dt=0.05, slices=np.zeros((21, *grid.shape)))

        spec = MollifierSpec(m=4.0)

        with self.assertRaises(ValueError):
            mollify(u, spec, make_two_phase(), window=(0.1, 0.9))

        # Reaches five cells at m = 2, past the outermost interior cell at index 3:
        wide = BallDomain(grid=grid, radius=1.7)

        with self.assertRaises(ValueError):
            mollify(u, MollifierSpec(m=2.0), make_two_phase(), ball=wide)

        smoothed, _ = mollify(
            u, spec, make_two_phase(), ball=BallDomain(grid=grid, radius=1.0), window=(0.3, 0.7)
        )

        self.assertEqual(smoothed.n_slices, 21)


# **************************************************************************************


class TestGreenTerms(unittest.TestCase):
    def test_residual_combines_the_terms(self) -> None:
        terms = GreenIdentityTerms(
            lhs=1.0, initial=2.0, boundary=0.5, volume_time=0.25, volume_space=-0.5
        )
        self.assertAlmostEqual(terms.residual, 0.25)

    def test_interval_must_be_ordered(self) -> None:
        u = forward(0.1, 0.02)

        ball = BallDomain(grid=u.grid, radius=1.0)

        phi = builtin_test_functions(1, 0.0, 0.2)[0]

        with self.assertRaises(ValueError):
            green_terms(u, make_two_phase(), phi, ball, 0.2, 0.1)

    def test_test_function_must_vanish_on_the_sphere(self) -> None:
        u = forward(0.1, 0.02)

        ball = BallDomain(grid=u.grid, radius=1.0)

        phi = SpaceTimeProduct(profile=BallBump(center=(0.0,), radius=1.5))

        with self.assertRaises(ValueError):
            green_terms(u, make_two_phase(), phi, ball, 0.0, 0.2)

    def test_profile_is_checked_even_when_the_window_closes_at_both_ends(self) -> None:
        u = forward(0.1, 0.02)

        ball = BallDomain(grid=u.grid, radius=1.0)

        phi = SpaceTimeProduct(
            profile=BallBump(center=(0.0,), radius=1.5),
            time=TimeFactor(window=(0.0, 0.2)),
        )

        self.assertEqual(phi.time.value(0.0), 0.0)
        self.assertEqual(phi.time.value(0.2), 0.0)

        with self.assertRaises(ValueError):
            green_terms(u, make_two_phase(), phi, ball, 0.0, 0.2)

    def test_time_independent_function_is_second_order_in_space(self) -> None:
        phi = SpaceTimeProduct(profile=BallBump(center=(0.0,), radius=0.8, power=4))

        nl = make_linear(1.0)

        residuals = []

        for spacing in (0.05, 0.025):
            u = forward(spacing, 0.01, linear=True)
            ball = BallDomain(grid=u.grid, radius=1.0)
            terms = green_terms(u, nl, phi, ball, 0.0, 0.2)

            self.assertAlmostEqual(terms.boundary, 0.0, places=14)
            self.assertAlmostEqual(terms.volume_time, 0.0, places=14)

            residuals.append(terms.residual)

        self.assertGreater(residuals[0], 0.0)
        self.assertGreaterEqual(log2(residuals[0] / residuals[1]), 1.5)

    def test_builtin_functions_converge_in_time(self) -> None:
        nl = make_two_phase()

        histories = [forward(0.01, dt) for dt in (0.01, 0.005, 0.0025)]

        for phi in builtin_test_functions(1, 0.0, 0.2):
            residuals = []

            for u in histories:
                ball = BallDomain(grid=u.grid, radius=1.0)
                residuals.append(green_residual(u, nl, phi, ball, 0.0, 0.2))

            with self.subTest(name=phi.name):
                self.assertLess(residuals[1], residuals[0])
                self.assertLess(residuals[2], residuals[1])
                self.assertGreaterEqual(log2(residuals[0] / residuals[2]) / 2.0, 0.6)

    def test_window_vanishing_at_both_ends(self) -> None:
        u = forward(0.05, 0.01)

        ball = BallDomain(grid=u.grid, radius=1.0)

        phi = builtin_test_functions(1, 0.0, 0.2)[0]

        terms = green_terms(u, make_two_phase(), phi, ball, 0.0, 0.2)

        self.assertAlmostEqual(terms.lhs, 0.0, places=12)
        self.assertEqual(terms.initial, 0.0)
        self.assertNotEqual(terms.volume_space, 0.0)


# **************************************************************************************

if __name__ == "__main__":
    unittest.main()
