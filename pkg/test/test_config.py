# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import unittest
from pathlib import Path
from tempfile import TemporaryDirectory

from stefan.config import (
    ConfigTextParser,
    ConfigurationError,
    ConvergenceConfig,
    MeasureConfig,
    NonlinearityConfig,
    build_config,
    parse_config,
)
from stefan.similarity import InterfaceStudyParameters

# **************************************************************************************

FORWARD = {
    "measure": {"atom": [0.0, 1.0], "gauss_c": 1.0},
    "grid": {"spacing": 0.1, "half_width": 2.0},
    "time": {"horizon": 0.2, "dt": 0.01, "store_every": 2},
}

# **************************************************************************************


class TestConfigTextParser(unittest.TestCase):
    def test_basic_parsing(self):
        # Test that basic key-value pairs are converted to their natural types:
        raw = b"key1 = value1\nkey2 = 42\nkey3 = true\nkey4 = 1e-3\n"
        result = ConfigTextParser(raw).parse()
        expected = {"key1": "value1", "key2": 42, "key3": True, "key4": 0.001}
        self.assertEqual(result, expected)

    def test_nested_parsing(self):
        # Test that dot-delimited keys create nested dictionaries:
        raw = "barrier.R = 4\nbarrier.T = 0.5\n"
        result = ConfigTextParser(raw).parse()
        expected = {"barrier": {"R": 4, "T": 0.5}}
        self.assertEqual(result, expected)

    def test_array_parsing(self):
        # Test that keys with array indices produce lists with the correct values:
        raw = b"a.b[0] = 1\na.b[1] = 2\na.c = 3\n"
        result = ConfigTextParser(raw).parse()
        expected = {"a": {"b": [1, 2], "c": 3}}
        self.assertEqual(result, expected)

    def test_comments(self):
        # A "#" inside quotes is part of the value:
        raw = b"# full line\na = 1  # one\nb = 'x # y'\n"
        result = ConfigTextParser(raw).parse()
        self.assertEqual(result, {"a": 1, "b": "x # y"})

    def test_lists_and_inline_tables(self):
        raw = (
            b"measure.atom = [0.5, 2.0]\n"
            b"measure.density = { box = [-1, 1], values = [1.0, 2.0] }\n"
        )
        result = ConfigTextParser(raw).parse()
        expected = {
            "measure": {
                "atom": [0.5, 2.0],
                "density": {"box": [-1, 1], "values": [1.0, 2.0]},
            }
        }
        self.assertEqual(result, expected)

    def test_repeated_keys_accumulate(self):
        raw = b"atom = [0, 1]\natom = [1, 2]\natom = [2, 3]\n"
        result = ConfigTextParser(raw).parse()
        self.assertEqual(result, {"atom": [[0, 1], [1, 2], [2, 3]]})

    def test_incorrect_lines_are_all_reported(self):
        raw = b"incorrect line\nkey = \nkey2 = [1, 2\nkey3 = fine\n"

        with self.assertRaises(ConfigurationError) as context:
            ConfigTextParser(raw).parse()

        violations = context.exception.violations

        self.assertEqual(len(violations), 3)

        for number, violation in enumerate(violations, start=1):
            self.assertTrue(violation.startswith(f"line {number}:"))


# **************************************************************************************


class TestBuildConfig(unittest.TestCase):
    def test_defaults(self) -> None:
        config = build_config({})

        self.assertEqual(config.barrier.R, 10.0)
        self.assertEqual(config.nonlinearity.kind, "two_phase")
        self.assertEqual(config.output.directory, "out")
        self.assertIsNone(config.gauss_c)

    def test_nonlinearity_keyword(self) -> None:
        config = build_config({"nonlinearity": "linear"})

        self.assertEqual(config.nonlinearity.kind, "linear")

    def test_unknown_keys_are_rejected(self) -> None:
        with self.assertRaises(ConfigurationError) as context:
            build_config({"barrier": {"radius": 3.0}})

        self.assertTrue(
            any(v.startswith("barrier.radius") for v in context.exception.violations)
        )

    def test_horizon_beyond_existence_is_rejected(self) -> None:
        data = {**FORWARD, "time": {"horizon": 0.5, "dt": 0.01}}

        with self.assertRaises(ConfigurationError) as context:
            build_config(data, "forward")

        self.assertIn("existence horizon", str(context.exception))

    def test_forward_needs_a_measure(self) -> None:
        data = {key: value for key, value in FORWARD.items() if key != "measure"}

        with self.assertRaises(ConfigurationError) as context:
            build_config(data, "forward")

        self.assertEqual(
            context.exception.violations,
            ["measure: block required by 'forward' is missing"],
        )

    def test_every_violation_is_listed(self) -> None:
        data = {"barrier": {"R": 0.5}, "time": {"horizon": -1.0, "dt": 0.01}}

        with self.assertRaises(ConfigurationError) as context:
            build_config(data, "forward")

        message = str(context.exception)

        for fragment in ("measure:", "grid:", "barrier.R", "time.horizon"):
            with self.subTest(fragment=fragment):
                self.assertIn(fragment, message)

    def test_unknown_subcommand(self) -> None:
        with self.assertRaises(ConfigurationError):
            build_config({}, "backward")

    def test_certify_needs_gauss_c(self) -> None:
        with TemporaryDirectory() as tmp:
            data = {"certify": {"run_a": tmp, "run_b": tmp, "t0": 0.1, "eps": 1e-3}}

            with self.assertRaises(ConfigurationError) as context:
                build_config(data, "dual-certify")

            self.assertIn("gauss_c", str(context.exception))

            data["certify"]["gauss_c"] = 1.0

            self.assertEqual(build_config(data, "dual-certify").gauss_c, 1.0)

    def test_run_directories_are_resolved(self) -> None:
        with TemporaryDirectory() as tmp:
            (Path(tmp) / "runs" / "a").mkdir(parents=True)

            data = {
                "certify": {
                    "run_a": "runs/a",
                    "run_b": "runs/b",
                    "t0": 0.1,
                    "eps": 1e-3,
                    "gauss_c": 1.0,
                }
            }

            with self.assertRaises(ConfigurationError) as context:
                build_config(data, "dual-certify", base=Path(tmp))

            self.assertEqual(len(context.exception.violations), 1)
            self.assertTrue(context.exception.violations[0].startswith("certify.run_b"))

            (Path(tmp) / "runs" / "b").mkdir()

            config = build_config(data, "dual-certify", base=Path(tmp))

            self.assertEqual(config.certify.run_a, str(Path(tmp) / "runs" / "a"))


# **************************************************************************************


class TestParseConfig(unittest.TestCase):
    def test_overrides_replace_file_values(self) -> None:
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / "experiment.cfg"
            path.write_text("# barrier sweep\nbarrier.R = 4\nbarrier.T = 2\n")

            config = parse_config(
                path, "barrier-table", overrides={"barrier.R": 6.0, "barrier.steps": None}
            )

        self.assertEqual(config.barrier.R, 6.0)
        self.assertEqual(config.barrier.T, 2.0)
        self.assertEqual(config.barrier.steps, 100)

    def test_without_a_file(self) -> None:
        config = parse_config(None, overrides={"convergence.levels": 2})

        self.assertEqual(config.convergence.levels, 2)


# **************************************************************************************


class TestBlocks(unittest.TestCase):
    def test_grid_and_solve_config(self) -> None:
        config = build_config(FORWARD, "forward")

        grid = config.build_grid()

        self.assertEqual(grid.cells, (41,))

        solve = config.solve_config()

        self.assertEqual(solve.steps, 20)
        self.assertEqual(solve.store_every, 2)
        self.assertEqual(solve.gauss_c, 1.0)

    def test_half_width_needs_gauss_c(self) -> None:
        config = build_config({"grid": {"spacing": 0.1}})

        with self.assertRaises(ValueError):
            config.build_grid()

    def test_half_width_from_gauss_c(self) -> None:
        data = {**FORWARD, "grid": {"spacing": 0.1}}

        grid = build_config(data).build_grid()

        self.assertEqual(grid.cells[0] % 2, 1)
        self.assertGreater(grid.cells[0], 41)

    def test_measure(self) -> None:
        measure = MeasureConfig(atom=[[0.1, 0.2, 3.0]], gauss_c=2.0).to_measure()

        self.assertEqual(measure.dim, 2)
        self.assertEqual(measure.atoms[0].location, (0.1, 0.2))
        self.assertEqual(measure.atoms[0].weight, 3.0)

        with self.assertRaises(ValueError):
            MeasureConfig(atom=[[0.1, 0.2, 0.3, 3.0]])

    def test_nonlinearity(self) -> None:
        nl = NonlinearityConfig(kind="linear", slope=2.0).to_nonlinearity()

        self.assertAlmostEqual(float(nl.evaluate(1.5)), 3.0)

        with self.assertRaises(ValueError):
            NonlinearityConfig(kind="breakpoints")

    def test_convergence_defaults(self) -> None:
        self.assertEqual(ConvergenceConfig().to_params(), InterfaceStudyParameters())


# **************************************************************************************

if __name__ == "__main__":
    unittest.main()
