#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
test_memfold
----------------------------------

Tests for the `memfold` command line.
"""


import pathlib
import sys
import unittest
from click.testing import CliRunner

from memfold import cli

SMALL = """
iterations = 6
load_period = 211
store_period = 1009
multiplex_window = 60000
seed = 7

[object]
name = v
kind = static
size = 1048576

[kernel]
routine = sweep
file = sweep.c
hot_line = 7
duration = 100000
object = v
levels = L1:0.7, DRAM:0.3
latency.DRAM = 350:0.5, 800:0.5

[kernel]
routine = gather
file = gather.c
hot_line = 12
duration = 100000
object = v
pattern = random
"""

REGRESSION = """H|1|0|2500
R|10|1|E
S|20|L|0x10|7|L1|100;100;0;0;0;0|f:f.c:1
S|30|L|0x10|7|L1|50;200;0;0;0;0|f:f.c:1
R|40|1|X
"""

MALFORMED = """H|1|0|2500
R|10|1|E
S|x|L|0x10|7|L1|100;100;0;0;0;0|f:f.c:1
"""


def contents(directory):
    return {path.name: path.read_bytes() for path in sorted(pathlib.Path(directory).iterdir())}


class TestMemfold(unittest.TestCase):

    def setUp(self):
        self.runner = CliRunner()

    def generate(self, out="run.mtf", *args):
        pathlib.Path("small.wl").write_text(SMALL)
        return self.runner.invoke(cli.cli, ["generate", "--spec", "small.wl", "--out", out] + list(args))

    def test_command_line_interface(self):
        help_result = self.runner.invoke(cli.cli, ['--help'])
        assert help_result.exit_code == 0
        assert '--help' in help_result.output
        for command in ("generate", "validate", "analyze", "dump"):
            assert command in help_result.output

    def test_generate(self):
        with self.runner.isolated_filesystem():
            result = self.generate()
            assert result.exit_code == 0, result.output
            names = sorted(path.name for path in pathlib.Path(".").iterdir())
            assert names == [
                "run.mtf", "run_truth_access.csv", "run_truth_patterns.csv", "run_truth_ranking.csv",
                "run_truth_rates.csv", "run_truth_totals.csv", "small.wl"
            ]
            assert pathlib.Path("run.mtf").read_text().startswith("H|1|0|2500\n")

    def test_generate_is_deterministic(self):
        with self.runner.isolated_filesystem():
            assert self.generate("one.mtf").exit_code == 0
            assert self.generate("two.mtf").exit_code == 0
            assert self.generate("three.mtf", "--seed", "8").exit_code == 0
            one = pathlib.Path("one.mtf").read_bytes()
            assert one == pathlib.Path("two.mtf").read_bytes()
            assert one != pathlib.Path("three.mtf").read_bytes()

    def test_generate_bad_spec(self):
        with self.runner.isolated_filesystem():
            pathlib.Path("bad.wl").write_text("iterations = 3\n[kernel]\nroutine = f\nlevels = L1:0.5\n")
            result = self.runner.invoke(cli.cli, ["generate", "--spec", "bad.wl", "--out", "run.mtf"])
            assert result.exit_code == 2
            assert "level shares sum to 0.5" in result.output
            assert not pathlib.Path("run.mtf").exists()

    def test_validate(self):
        with self.runner.isolated_filesystem():
            assert self.generate().exit_code == 0
            result = self.runner.invoke(cli.cli, ["validate", "run.mtf"])
            assert result.exit_code == 0, result.output

    def test_validate_errors(self):
        with self.runner.isolated_filesystem():
            pathlib.Path("regression.mtf").write_text(REGRESSION)
            result = self.runner.invoke(cli.cli, ["validate", "regression.mtf"])
            assert result.exit_code == 3
            assert "error: event 2: counter regression: instructions" in result.output
            result = self.runner.invoke(cli.cli, ["validate", "--diag-format", "csv", "regression.mtf"])
            assert result.exit_code == 3
            assert "severity,index,message" in result.output
            assert "error,2,counter regression: instructions" in result.output

    def test_validate_malformed(self):
        with self.runner.isolated_filesystem():
            pathlib.Path("malformed.mtf").write_text(MALFORMED)
            result = self.runner.invoke(cli.cli, ["validate", "malformed.mtf"])
            assert result.exit_code == 3
            assert "line 3, field timestamp" in result.output

    def test_validate_invalid_utf8(self):
        with self.runner.isolated_filesystem():
            pathlib.Path("binary.mtf").write_bytes(b"H|1|0|2500\nR|5|1|\xff\n")
            result = self.runner.invoke(cli.cli, ["validate", "binary.mtf"])
            assert result.exit_code == 3, result.output
            assert "line 2" in result.output
            result = self.runner.invoke(cli.cli, ["analyze", "binary.mtf"])
            assert result.exit_code == 3, result.output
            result = self.runner.invoke(cli.cli, ["dump", "binary.mtf"])
            assert result.exit_code == 3, result.output

    def test_generate_non_utf8_spec(self):
        with self.runner.isolated_filesystem():
            pathlib.Path("latin.wl").write_bytes(b"# caf\xe9\niterations = 3\n")
            result = self.runner.invoke(cli.cli, ["generate", "--spec", "latin.wl", "--out", "run.mtf"])
            assert result.exit_code == 2, result.output
            assert "not utf-8" in result.output

    def test_analyze(self):
        with self.runner.isolated_filesystem():
            assert self.generate().exit_code == 0
            result = self.runner.invoke(cli.cli, [
                "analyze", "run.mtf", "--out", "report", "--load-period", "211", "--store-period", "1009"
            ])
            assert result.exit_code == 0, result.output
            names = sorted(contents("report"))
            assert names == sorted([
                "report.gp", "source.dat", "loads.dat", "stores.dat", "curves.dat", "objects.dat",
                "access.csv", "ranking.csv", "phases.csv", "folded.prv", "summary.txt"
            ])
            summary = pathlib.Path("report/summary.txt").read_text()
            assert "region 1: 6 instances, 6 retained" in summary
            assert "extrapolated totals" in summary

    def test_analyze_is_deterministic(self):
        with self.runner.isolated_filesystem():
            assert self.generate().exit_code == 0
            for out in ("first", "second"):
                result = self.runner.invoke(cli.cli, ["analyze", "run.mtf", "--out", out])
                assert result.exit_code == 0, result.output
            assert contents("first") == contents("second")

    def test_analyze_usage_errors(self):
        with self.runner.isolated_filesystem():
            assert self.generate().exit_code == 0
            for args in (["--bins", "5"], ["--tolerance", "1.5"], ["--min-phase-width", "0"],
                         ["--threshold", "0"], ["--gap-threshold", "0"]):
                result = self.runner.invoke(cli.cli, ["analyze", "run.mtf"] + args)
                assert result.exit_code == 2, (args, result.output)
            pathlib.Path("blocker").write_text("")
            result = self.runner.invoke(cli.cli, ["analyze", "run.mtf", "--out", "blocker/report"])
            assert result.exit_code == 2
            assert "cannot create output directory" in result.output

    def test_analyze_data_errors(self):
        with self.runner.isolated_filesystem():
            assert self.generate().exit_code == 0
            result = self.runner.invoke(cli.cli, ["analyze", "run.mtf", "--region", "9"])
            assert result.exit_code == 3
            assert "no region markers for region 9" in result.output
            pathlib.Path("regression.mtf").write_text(REGRESSION)
            result = self.runner.invoke(cli.cli, ["analyze", "regression.mtf"])
            assert result.exit_code == 3
            assert "counter regression" in result.output
            assert not pathlib.Path("report").exists()

    def test_dump(self):
        with self.runner.isolated_filesystem():
            assert self.generate().exit_code == 0
            result = self.runner.invoke(cli.cli, ["dump", "run.mtf"])
            assert result.exit_code == 0, result.output
            assert "format: MTF v1" in result.output
            assert "regions: [1]" in result.output
            assert self.runner.invoke(cli.cli, ["analyze", "run.mtf", "--out", "report"]).exit_code == 0
            result = self.runner.invoke(cli.cli, ["dump", "report/folded.prv"])
            assert result.exit_code == 0, result.output
            assert "format: folded Paraver subset" in result.output
            pathlib.Path("notes.txt").write_text("hello\n")
            result = self.runner.invoke(cli.cli, ["dump", "notes.txt"])
            assert result.exit_code == 3
            assert "unknown format" in result.output


if __name__ == '__main__':
    sys.exit(unittest.main())
