# **************************************************************************************

# @package        stefan
# @license        MIT License Copyright (c) 2025 Michael J. Roberts

# **************************************************************************************

import csv
import json
import unittest
from contextlib import redirect_stderr
from io import StringIO
from pathlib import Path
from tempfile import TemporaryDirectory

from stefan.cli import build_parser, main

# **************************************************************************************

EXPERIMENT = """\
# An atom of mass three at the origin:
measure.atom = [0.0, 3.0]
measure.gauss_c = 1.0

nonlinearity = two_phase

grid.dim = 1
grid.spacing = 0.1
grid.half_width = 5.0

time.horizon = 0.2
time.dt = 0.01
"""

# **************************************************************************************


def read_rows(path: Path) -> list:
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


# **************************************************************************************


class TestParser(unittest.TestCase):
    def test_unknown_subcommand_exits_with_usage_error(self) -> None:
        with redirect_stderr(StringIO()):
            with self.assertRaises(SystemExit) as context:
                build_parser().parse_args(["backward"])

        self.assertEqual(context.exception.code, 2)

    def test_dotted_overrides(self) -> None:
        args = build_parser().parse_args(["barrier-table", "--R", "4", "--steps", "20"])

        self.assertEqual(vars(args)["barrier.R"], 4.0)
        self.assertEqual(vars(args)["barrier.steps"], 20)
        self.assertIsNone(vars(args)["barrier.T"])


# **************************************************************************************


class TestBarrierTable(unittest.TestCase):
    def test_envelope_dominates_the_flux(self) -> None:
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / "barrier_table.csv"

            self.assertEqual(main(["barrier-table", "--out", str(path)]), 0)

            rows = read_rows(path)

            manifest = json.loads((Path(tmp) / "barrier-table.manifest.json").read_text())

        self.assertEqual(rows[0], ["t", "numeric_flux", "closed_form_flux", "envelope"])
        self.assertEqual(len(rows), 101)

        for _, _, exact, bound in rows[1:]:
            self.assertLessEqual(float(exact), float(bound))

        self.assertTrue(manifest["passed"])
        self.assertEqual(manifest["defaults"]["barrier"]["R"], 10.0)

    def test_bad_configuration_exits_with_two(self) -> None:
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.cfg"
            path.write_text("barrier.radius = 3\n")

            with self.assertLogs(level="ERROR"):
                self.assertEqual(main(["barrier-table", "--config", str(path)]), 2)

    def test_invalid_barrier_parameters_exit_with_two(self) -> None:
        with TemporaryDirectory() as tmp:
            with self.assertLogs(level="ERROR"):
                code = main(
                    ["barrier-table", "--R", "1.52", "--out", str(Path(tmp) / "t.csv")]
                )

        self.assertEqual(code, 2)


# **************************************************************************************


class TestPipeline(unittest.TestCase):
    def test_forward_then_check_and_certify(self) -> None:
        with TemporaryDirectory() as tmp:
            root = Path(tmp)

            config = root / "experiment.cfg"
            config.write_text(EXPERIMENT)

            run = root / "run"

            self.assertEqual(
                main(["forward", "--config", str(config), "--out", str(run)]), 0
            )

            self.assertEqual(len(sorted(run.glob("slice_*.csv"))), 21)
            self.assertTrue((run / "ledger.csv").is_file())
            self.assertTrue((run / "forward.manifest.json").is_file())

            check = root / "check" / "representation.csv"

            code = main(
                [
                    "represent-check",
                    "--config",
                    str(config),
                    "--run",
                    str(run),
                    "--R",
                    "1.0",
                    "--t1",
                    "0.0",
                    "--t2",
                    "0.2",
                    "--out",
                    str(check),
                ]
            )

            self.assertEqual(code, 0)
            self.assertEqual(len(read_rows(check)), 6)

            report = root / "certify" / "report.csv"

            code = main(
                [
                    "dual-certify",
                    "--config",
                    str(config),
                    "--runA",
                    str(run),
                    "--runB",
                    str(run),
                    "--t0",
                    "0.1",
                    "--eps",
                    "1e-3",
                    "--out",
                    str(report),
                ]
            )

            rows = read_rows(report)

            manifest = json.loads(
                (root / "certify" / "dual-certify.manifest.json").read_text()
            )

        self.assertEqual(code, 0)
        self.assertEqual(rows[-1][0], "certified")
        self.assertEqual(rows[-1][-1], "True")
        self.assertEqual(manifest["extra"]["verdict"], "PASS")

    def test_missing_run_directory_exits_with_two(self) -> None:
        with TemporaryDirectory() as tmp:
            config = Path(tmp) / "experiment.cfg"
            config.write_text(EXPERIMENT)

            with self.assertLogs(level="ERROR") as logs:
                code = main(
                    [
                        "dual-certify",
                        "--config",
                        str(config),
                        "--runA",
                        str(Path(tmp) / "a"),
                        "--runB",
                        str(Path(tmp) / "b"),
                        "--t0",
                        "0.1",
                        "--eps",
                        "1e-3",
                    ]
                )

        self.assertEqual(code, 2)
        self.assertEqual(len(logs.records), 2)


# **************************************************************************************

if __name__ == "__main__":
    unittest.main()
