# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import unittest

import numpy as np

from stefan.grid import BallDomain, Grid
from stefan.testfunctions import (
    BallBump,
    SpaceTimeProduct,
    TensorBump,
    TimeFactor,
    amplitude_field,
    builtin_test_functions,
    parse_theta_spec,
    vanishes_on_shell,
)

# **************************************************************************************


def finite_difference_laplacian(profile, x: np.ndarray, d: float = 1e-4) -> np.ndarray:
    total = np.zeros(x.shape[:-1])

    for axis in range(x.shape[-1]):
        step = np.zeros(x.shape[-1])
        step[axis] = d
        second = profile.value(x + step) - 2.0 * profile.value(x) + profile.value(x - step)
        total += second / d**2

    return total


# **************************************************************************************


def finite_difference_gradient(profile, x: np.ndarray, d: float = 1e-6) -> np.ndarray:
    components = []

    for axis in range(x.shape[-1]):
        step = np.zeros(x.shape[-1])
        step[axis] = d
        components.append((profile.value(x + step) - profile.value(x - step)) / (2.0 * d))

    return np.stack(components, axis=-1)


# **************************************************************************************


class TestProfiles(unittest.TestCase):
    def setUp(self) -> None:
        self.points = np.array([[0.1, -0.2], [0.3, 0.25], [-0.4, 0.1], [0.0, 0.0]])

        self.profiles = [
            BallBump(center=(0.1, -0.1), radius=0.9, power=4),
            BallBump(center=(0.0, 0.0), radius=0.8, power=3),
            TensorBump(center=(0.0, 0.1), radius=0.7, power=4),
            TensorBump(center=(0.0, 0.0), radius=0.6, power=3),
        ]

    def test_laplacian_matches_finite_differences(self) -> None:
        for profile in self.profiles:
            with self.subTest(profile=profile):
                np.testing.assert_allclose(
                    profile.laplacian(self.points),
                    finite_difference_laplacian(profile, self.points),
                    atol=1e-5,
                )

    def test_gradient_matches_finite_differences(self) -> None:
        for profile in self.profiles:
            with self.subTest(profile=profile):
                np.testing.assert_allclose(
                    profile.gradient(self.points),
                    finite_difference_gradient(profile, self.points),
                    atol=1e-7,
                )

    def test_vanishes_outside_the_support(self) -> None:
        far = np.array([[2.0, 0.0], [0.0, -2.0], [1.5, 1.5]])

        for profile in self.profiles:
            with self.subTest(profile=profile):
                np.testing.assert_array_equal(profile.value(far), 0.0)
                np.testing.assert_array_equal(profile.laplacian(far), 0.0)
                np.testing.assert_array_equal(profile.gradient(far), 0.0)

    def test_one_dimensional_bump(self) -> None:
        bump = BallBump(center=(0.0,), radius=1.0, power=2)

        x = np.array([[0.0], [0.5], [1.0]])

        np.testing.assert_allclose(bump.value(x), [1.0, 0.5625, 0.0])
        # (1 - x^2)^2 has second derivative 12 x^2 - 4:
        np.testing.assert_allclose(bump.laplacian(x[:2]), [-4.0, -1.0])

    def test_support(self) -> None:
        bump = BallBump(center=(0.3, -0.4), radius=0.5)

        np.testing.assert_allclose(bump.support_box(), [(-0.2, 0.8), (-0.9, 0.1)], atol=1e-15)
        self.assertAlmostEqual(bump.support_radius(), 1.0)
        self.assertAlmostEqual(
            TensorBump(center=(0.0, 0.0), radius=0.5).support_radius(), np.sqrt(0.5)
        )


# **************************************************************************************


class TestTimeFactor(unittest.TestCase):
    def test_polynomial_without_window(self) -> None:
        factor = TimeFactor(coefficients=[1.0, -1.0, 1.0])

        self.assertAlmostEqual(factor.value(2.0), 3.0)
        self.assertAlmostEqual(factor.derivative(2.0), 3.0)

    def test_window_vanishes_outside(self) -> None:
        factor = TimeFactor(coefficients=[2.0], window=(0.2, 0.6))

        for t in (0.0, 0.2, 0.6, 1.0):
            with self.subTest(t=t):
                self.assertEqual(factor.value(t), 0.0)
                self.assertEqual(factor.derivative(t), 0.0)

        self.assertAlmostEqual(factor.value(0.4), 2.0)

    def test_derivative_matches_finite_differences(self) -> None:
        factor = TimeFactor(coefficients=[1.0, 2.0], window=(0.0, 1.0), window_power=3)

        d = 1e-6

        for t in (0.1, 0.35, 0.5, 0.8):
            with self.subTest(t=t):
                self.assertAlmostEqual(
                    factor.derivative(t),
                    (factor.value(t + d) - factor.value(t - d)) / (2.0 * d),
                    delta=1e-6,
                )

    def test_empty_window_is_rejected(self) -> None:
        with self.assertRaises(ValueError):
            TimeFactor(window=(0.5, 0.5))


# **************************************************************************************


class TestSpaceTimeProduct(unittest.TestCase):
    def test_supported_inside(self) -> None:
        grid = Grid.symmetric(1, 2.0, 0.1)

        inside = SpaceTimeProduct(
            profile=BallBump(center=(0.0,), radius=0.9),
            time=TimeFactor(window=(0.1, 0.9)),
        )
        unwindowed = SpaceTimeProduct(profile=BallBump(center=(0.0,), radius=0.9))
        wide = SpaceTimeProduct(
            profile=BallBump(center=(0.0,), radius=2.0),
            time=TimeFactor(window=(0.1, 0.9)),
        )

        self.assertTrue(inside.supported_inside(grid, 0.0, 1.0))
        self.assertFalse(inside.supported_inside(grid, 0.2, 1.0))
        self.assertFalse(unwindowed.supported_inside(grid, 0.0, 1.0))
        self.assertFalse(wide.supported_inside(grid, 0.0, 1.0))

    def test_factors_multiply(self) -> None:
        phi = SpaceTimeProduct(
            profile=BallBump(center=(0.0,), radius=1.0, power=2),
            time=TimeFactor(coefficients=[0.0, 1.0]),
        )

        x = np.array([[0.5]])

        self.assertAlmostEqual(float(phi.value(x, 2.0)[0]), 2.0 * 0.5625)
        self.assertAlmostEqual(float(phi.time_derivative(x, 2.0)[0]), 0.5625)
        self.assertAlmostEqual(float(phi.laplacian(x, 2.0)[0]), -2.0)


# **************************************************************************************


class TestBuiltinTestFunctions(unittest.TestCase):
    def test_five_distinct_functions_in_the_unit_ball(self) -> None:
        for dim in (1, 2):
            with self.subTest(dim=dim):
                functions = builtin_test_functions(dim, 0.0, 0.5)

                self.assertEqual(len(functions), 5)
                self.assertEqual(len({f.name for f in functions}), 5)

                for f in functions:
                    self.assertLess(f.profile.support_radius(), 1.0)
                    self.assertEqual(f.time.window, (0.0, 0.5))

    def test_vanish_on_the_unit_shell(self) -> None:
        ball = BallDomain(grid=Grid.symmetric(2, 1.5, 0.1), radius=1.0)

        for f in builtin_test_functions(2):
            with self.subTest(name=f.name):
                self.assertTrue(vanishes_on_shell(f.profile, ball))

        self.assertFalse(vanishes_on_shell(BallBump(center=(0.0, 0.0), radius=1.3), ball))


# **************************************************************************************


class TestParseThetaSpec(unittest.TestCase):
    def test_ball_bump(self) -> None:
        profile = parse_theta_spec("ball-bump:radius=0.9,power=3", 1)

        self.assertIsInstance(profile, BallBump)
        self.assertEqual(profile.center, (0.0,))
        self.assertEqual(profile.radius, 0.9)
        self.assertEqual(profile.power, 3)

    def test_tensor_bump_with_centre(self) -> None:
        profile = parse_theta_spec("tensor-bump: radius=0.5, power=4, cx=0.1, cy=-0.2", 2)

        self.assertIsInstance(profile, TensorBump)
        self.assertEqual(profile.center, (0.1, -0.2))

    def test_defaults(self) -> None:
        self.assertEqual(parse_theta_spec("ball-bump", 2), BallBump(center=(0.0, 0.0)))

    def test_invalid_specs(self) -> None:
        for spec in (
            "disc:radius=0.5",
            "ball-bump:width=0.5",
            "ball-bump:radius=wide",
            "ball-bump:radius",
            "ball-bump:radius=-1",
        ):
            with self.subTest(spec=spec):
                with self.assertRaises(ValueError):
                    parse_theta_spec(spec, 1)

    def test_amplitude_field(self) -> None:
        grid = Grid.symmetric(1, 1.0, 0.5)

        field = amplitude_field(BallBump(center=(0.0,), radius=1.0, power=2), grid)

        np.testing.assert_allclose(field.values, [0.0, 0.5625, 1.0, 0.5625, 0.0], atol=1e-15)


# **************************************************************************************

if __name__ == "__main__":
    unittest.main()
