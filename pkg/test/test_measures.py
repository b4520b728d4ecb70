# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import unittest
from math import erf, exp, inf, pi, sqrt

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from stefan.grid import Grid
from stefan.measures import (
    Atom,
    DensityBlock,
    SignedMeasure,
    cell_average,
    combine,
    gaussian_moment,
    integrate,
    suggest_half_width,
    total_mass,
)

# **************************************************************************************


class TestDensityBlock(unittest.TestCase):
    def test_value_count_must_match_shape(self) -> None:
        with self.assertRaises(ValueError):
            DensityBlock(box=[(0.0, 1.0), (0.0, 1.0)], values=[1.0, 2.0, 3.0], shape=(2, 2))

    def test_several_values_in_two_dimensions_need_a_shape(self) -> None:
        with self.assertRaises(ValueError):
            DensityBlock(box=[(0.0, 1.0), (0.0, 1.0)], values=[1.0, 2.0])

    def test_empty_box_is_rejected(self) -> None:
        with self.assertRaises(ValueError):
            DensityBlock(box=[(1.0, 1.0)], values=[1.0])

    def test_one_dimensional_shape_is_inferred(self) -> None:
        block = DensityBlock(box=[(0.0, 2.0)], values=[1.0, 2.0, 3.0, 4.0])

        self.assertEqual(block.cell_shape, (4,))
        self.assertAlmostEqual(block.sub_cell_volume(), 0.5)


# **************************************************************************************


class TestSignedMeasure(unittest.TestCase):
    def test_mixed_dimensions_are_rejected(self) -> None:
        with self.assertRaises(ValueError):
            SignedMeasure(
                atoms=[Atom(location=(0.0,), weight=1.0)],
                density=[DensityBlock(box=[(0.0, 1.0), (0.0, 1.0)], values=[1.0])],
            )

    def test_gaussian_exponent_must_be_positive(self) -> None:
        with self.assertRaises(ValueError):
            SignedMeasure(gauss_c=0.0)

    def test_horizon(self) -> None:
        self.assertEqual(SignedMeasure(gauss_c=0.5).horizon, 0.5)
        self.assertEqual(SignedMeasure().horizon, inf)

    def test_support_radius(self) -> None:
        mu = SignedMeasure(
            atoms=[Atom(location=(3.0, 4.0), weight=1.0)],
            density=[DensityBlock(box=[(-1.0, 1.0), (-2.0, 1.0)], values=[1.0])],
        )
        self.assertAlmostEqual(mu.support_radius(), 5.0)

    def test_combine_takes_the_larger_exponent(self) -> None:
        first = SignedMeasure(atoms=[Atom(location=(0.0,), weight=1.0)], gauss_c=0.5)
        second = SignedMeasure(atoms=[Atom(location=(1.0,), weight=-1.0)], gauss_c=2.0)

        both = combine(first, second)

        self.assertEqual(len(both.atoms), 2)
        self.assertEqual(both.gauss_c, 2.0)
        self.assertEqual(total_mass(both), 0.0)


# **************************************************************************************


class TestGaussianMoment(unittest.TestCase):
    def test_atoms(self) -> None:
        mu = SignedMeasure(
            atoms=[
                Atom(location=(0.0,), weight=2.0),
                Atom(location=(1.0,), weight=-1.0),
            ]
        )
        self.assertAlmostEqual(gaussian_moment(mu, 1.0), 2.0 + exp(-1.0), places=14)

    def test_one_dimensional_density_is_exact(self) -> None:
        mu = SignedMeasure(density=[DensityBlock(box=[(-1.0, 1.0)], values=[1.0])])
        self.assertAlmostEqual(gaussian_moment(mu, 1.0), sqrt(pi) * erf(1.0), places=13)

    def test_signed_density_uses_absolute_values(self) -> None:
        mu = SignedMeasure(density=[DensityBlock(box=[(0.0, 2.0)], values=[1.0, -1.0])])

        exact, _ = quad(lambda x: exp(-0.5 * x * x), 0.0, 2.0, epsabs=1e-14)

        self.assertAlmostEqual(gaussian_moment(mu, 0.5), exact, places=12)

    def test_two_dimensional_density_factorises(self) -> None:
        mu = SignedMeasure(
            density=[DensityBlock(box=[(-1.0, 1.0), (0.0, 2.0)], values=[3.0])]
        )

        first, _ = quad(lambda x: exp(-x * x), -1.0, 1.0, epsabs=1e-14)
        second, _ = quad(lambda y: exp(-y * y), 0.0, 2.0, epsabs=1e-14)

        self.assertAlmostEqual(gaussian_moment(mu, 1.0), 3.0 * first * second, places=12)

    def test_nonpositive_exponent_is_rejected(self) -> None:
        with self.assertRaises(ValueError):
            gaussian_moment(SignedMeasure(), 0.0)


# **************************************************************************************


class TestIntegrate(unittest.TestCase):
    def test_atoms_are_point_evaluations(self) -> None:
        mu = SignedMeasure(
            atoms=[
                Atom(location=(2.0,), weight=1.5),
                Atom(location=(-1.0,), weight=-1.0),
            ]
        )

        value = integrate(mu, lambda p: p[..., 0] ** 2)

        self.assertAlmostEqual(value, 1.5 * 4.0 - 1.0, places=14)

    def test_one_dimensional_density(self) -> None:
        mu = SignedMeasure(density=[DensityBlock(box=[(0.0, 1.0)], values=[3.0])])
        self.assertAlmostEqual(integrate(mu, lambda p: p[..., 0] ** 2), 1.0, places=13)

    def test_two_dimensional_density(self) -> None:
        mu = SignedMeasure(
            density=[DensityBlock(box=[(0.0, 1.0), (0.0, 2.0)], values=[1.0])]
        )

        value = integrate(mu, lambda p: p[..., 0] * p[..., 1])

        self.assertAlmostEqual(value, 1.0, places=13)


# **************************************************************************************


class TestCellAverage(unittest.TestCase):
    def test_mass_is_conserved(self) -> None:
        grid = Grid.symmetric(1, 2.0, 0.1)

        mu = SignedMeasure(
            atoms=[Atom(location=(0.3,), weight=2.0)],
            density=[DensityBlock(box=[(-1.0, 0.5)], values=[1.5])],
        )

        field = cell_average(mu, grid)

        self.assertAlmostEqual(
            float(np.sum(field.values)) * grid.cell_volume, 4.25, places=12
        )

    def test_atom_on_a_face_goes_to_the_positive_side(self) -> None:
        grid = Grid(dim=1, origin=(0.0,), spacing=0.5, cells=(4,))

        field = cell_average(SignedMeasure(atoms=[Atom(location=(1.0,), weight=1.0)]), grid)

        np.testing.assert_array_equal(field.values, [0.0, 0.0, 2.0, 0.0])

    def test_aligned_density_is_copied(self) -> None:
        grid = Grid(dim=2, origin=(0.0, 0.0), spacing=0.5, cells=(4, 4))

        mu = SignedMeasure(
            density=[
                DensityBlock(
                    box=[(0.0, 1.0), (0.0, 1.0)], values=[1.0, 2.0, 3.0, 4.0], shape=(2, 2)
                )
            ]
        )

        field = cell_average(mu, grid)

        np.testing.assert_allclose(field.values[:2, :2], [[1.0, 2.0], [3.0, 4.0]])
        self.assertEqual(float(np.sum(field.values[2:, :])), 0.0)
        self.assertEqual(float(np.sum(field.values[:, 2:])), 0.0)

    def test_atom_outside_the_box_is_rejected(self) -> None:
        grid = Grid(dim=1, origin=(0.0,), spacing=0.5, cells=(4,))

        with self.assertRaises(ValueError):
            cell_average(SignedMeasure(atoms=[Atom(location=(2.5,), weight=1.0)]), grid)

    def test_density_outside_the_box_is_rejected(self) -> None:
        grid = Grid(dim=1, origin=(0.0,), spacing=0.5, cells=(4,))

        mu = SignedMeasure(density=[DensityBlock(box=[(-1.0, 1.0)], values=[1.0])])

        with self.assertRaises(ValueError):
            cell_average(mu, grid)

    def test_dimension_mismatch_is_rejected(self) -> None:
        grid = Grid(dim=2, origin=(0.0, 0.0), spacing=0.5, cells=(4, 4))

        with self.assertRaises(ValueError):
            cell_average(SignedMeasure(atoms=[Atom(location=(1.0,), weight=1.0)]), grid)

    @settings(max_examples=50, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.floats(min_value=-1.9, max_value=1.9),
                st.floats(min_value=-5.0, max_value=5.0),
            ),
            min_size=1,
            max_size=10,
        )
    )
    def test_atom_mass_is_conserved(self, atoms: list) -> None:
        grid = Grid.symmetric(1, 2.0, 0.1)

        mu = SignedMeasure(atoms=[Atom(location=(x,), weight=w) for x, w in atoms])

        field = cell_average(mu, grid)

        self.assertAlmostEqual(
            float(np.sum(field.values)) * grid.cell_volume,
            sum(w for _, w in atoms),
            delta=1e-9,
        )


# **************************************************************************************


class TestSuggestHalfWidth(unittest.TestCase):
    def test_support_plus_gaussian_tail(self) -> None:
        mu = SignedMeasure(atoms=[Atom(location=(3.0, 4.0), weight=1.0)])

        width = suggest_half_width(mu, 1.0, tolerance=exp(-4.0))

        self.assertAlmostEqual(width, 7.0, places=12)

    def test_nonpositive_exponent_is_rejected(self) -> None:
        with self.assertRaises(ValueError):
            suggest_half_width(SignedMeasure(), -1.0)


# **************************************************************************************

if __name__ == "__main__":
    unittest.main()
