# -*- coding: utf-8 -*-
import logging
import pathlib
import sys
import typing
from dataclasses import dataclass

import click
import pandas as pd

import memfold.formats
from memfold import analysis, folding, objects, report, synthgen
from memfold.formats import mtf, prv, workload
from memfold.trace import Diagnostic, validate_trace

logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_DATA = 3


class AddressType(click.ParamType):
    """integers in any base python accepts (0x7ffc00000000, 1048576)"""
    name = "address"

    def convert(self, value, param, ctx):
        if isinstance(value, int):
            return value
        try:
            return int(value, 0)
        except ValueError:
            self.fail("{!r} is not an integer".format(value), param, ctx)


ADDRESS = AddressType()


@dataclass(frozen=True)
class RunConfig:
    threshold: int = objects.DEFAULT_THRESHOLD
    stack_floor: typing.Optional[int] = None
    bins: int = folding.DEFAULT_BINS
    tolerance: float = folding.DEFAULT_TOLERANCE
    min_phase_width: float = folding.DEFAULT_MIN_WIDTH
    gap_threshold: int = report.DEFAULT_GAP_THRESHOLD
    out_dir: pathlib.Path = pathlib.Path("report")
    region_id: int = 1
    load_period: typing.Optional[int] = None
    store_period: typing.Optional[int] = None

    def validate(self):
        if self.threshold <= 0:
            raise ValueError("threshold must be positive, got {}".format(self.threshold))
        if self.bins < folding.MIN_BINS:
            raise ValueError("bins must be at least {}, got {}".format(folding.MIN_BINS, self.bins))
        if not 0 <= self.tolerance < 1:
            raise ValueError("tolerance must be in [0, 1), got {}".format(self.tolerance))
        if not 0 < self.min_phase_width < 1:
            raise ValueError("min phase width must be in (0, 1), got {}".format(self.min_phase_width))
        if self.gap_threshold <= 0:
            raise ValueError("gap threshold must be positive, got {}".format(self.gap_threshold))
        for name in ("load_period", "store_period"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise ValueError("{} must be positive, got {}".format(name.replace("_", " "), value))
        if (self.load_period is None) != (self.store_period is None):
            logger.warning("extrapolation needs both --load-period and --store-period")
        return self


def echo_diagnostics(diagnostics, diag_format="text", err=False):
    if diag_format == "csv":
        frame = pd.DataFrame.from_records(
            [(d.severity, d.index, d.message) for d in diagnostics],
            columns=["severity", "index", "message"]
        )
        click.echo(frame.to_csv(index=False), nl=False, err=err)
        return
    for diagnostic in diagnostics:
        click.echo(str(diagnostic), err=err)


def fail(message, code):
    click.echo("error: {}".format(message), err=True)
    sys.exit(code)


def load_trace(path, diag_format, err):
    """parse and validate, exit with status 3 on errors"""
    try:
        trace = mtf.read_trace(path)
    except mtf.TraceFormatError as e:
        echo_diagnostics([Diagnostic(Diagnostic.ERROR, -1, str(e))], diag_format, err=err)
        sys.exit(EXIT_DATA)
    diagnostics = validate_trace(trace)
    return trace, diagnostics


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="debug logging")
def cli(verbose):
    """Fold sampled memory references of repetitive regions."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True
    )


@cli.command()
@click.option(
    "--spec",
    "spec_path",
    type=click.Path(exists=True, dir_okay=False),
    required=True,
    help="workload specification"
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False),
    required=True,
    help="trace file to write, ground truth goes next to it"
)
@click.option(
    "--seed",
    type=int,
    default=None,
    help="overrides the workload seed"
)
def generate(spec_path, out, seed):
    """Generate a synthetic trace with ground truth."""
    try:
        spec = workload.read_workload(spec_path)
        trace, truth = synthgen.generate(spec, seed)
    except synthgen.SpecError as e:
        fail("{}: {}".format(spec_path, e), EXIT_USAGE)
    try:
        mtf.write_trace(trace, out)
        synthgen.emit_ground_truth(truth, out)
    except OSError as e:
        fail(str(e), EXIT_USAGE)
    logger.info("wrote %s", out)


@cli.command()
@click.argument(
    "trace",
    type=click.Path(exists=True, dir_okay=False)
)
@click.option(
    "--diag-format",
    type=click.Choice(["text", "csv"]),
    default="text"
)
def validate(trace, diag_format):
    """Check a trace, print its diagnostics."""
    _, diagnostics = load_trace(trace, diag_format, err=False)
    echo_diagnostics(diagnostics, diag_format)
    if any(d.severity == Diagnostic.ERROR for d in diagnostics):
        sys.exit(EXIT_DATA)


@cli.command()
@click.argument(
    "trace",
    type=click.Path(exists=True, dir_okay=False)
)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="report", help="report directory")
@click.option("--region", "region_id", type=int, default=1, help="region to fold")
@click.option("--threshold", type=int, default=objects.DEFAULT_THRESHOLD, help="smallest tracked allocation (bytes)")
@click.option("--bins", type=int, default=folding.DEFAULT_BINS)
@click.option("--tolerance", type=float, default=folding.DEFAULT_TOLERANCE, help="instance duration tolerance")
@click.option("--min-phase-width", type=float, default=folding.DEFAULT_MIN_WIDTH)
@click.option("--gap-threshold", type=ADDRESS, default=report.DEFAULT_GAP_THRESHOLD, help="address gap (bytes)")
@click.option("--stack-floor", type=ADDRESS, default=None, help="lowest stack address")
@click.option("--load-period", type=int, default=None, help="effective load sampling period")
@click.option("--store-period", type=int, default=None, help="effective store sampling period")
@click.option("--diag-format", type=click.Choice(["text", "csv"]), default="text")
def analyze(trace, diag_format, out_dir, **kwargs):
    """Fold a region of the trace and write the report."""
    config = RunConfig(out_dir=pathlib.Path(out_dir), **kwargs)
    try:
        config.validate()
    except ValueError as e:
        raise click.UsageError(str(e))

    parsed, diagnostics = load_trace(trace, diag_format, err=True)
    errors = [d for d in diagnostics if d.severity == Diagnostic.ERROR]
    for diagnostic in diagnostics:
        if diagnostic.severity == Diagnostic.WARNING:
            logger.warning("event %s: %s", diagnostic.index, diagnostic.message)
    if errors:
        echo_diagnostics(errors, diag_format, err=True)
        sys.exit(EXIT_DATA)

    try:
        object_map = objects.build_object_map(parsed, config.threshold, config.stack_floor)
        folded = folding.fold_region(
            parsed,
            config.region_id,
            bins=config.bins,
            tolerance=config.tolerance,
            min_width=config.min_phase_width
        )
        result = analysis.analyze_region(
            folded, object_map, parsed, config.load_period, config.store_period)
    except (objects.ObjectMapError, folding.FoldingError, analysis.AnalysisError) as e:
        echo_diagnostics([Diagnostic(Diagnostic.ERROR, -1, str(e))], diag_format, err=True)
        sys.exit(EXIT_DATA)
    try:
        bundle = report.write_report(folded, object_map, result, config.out_dir, config.gap_threshold)
    except report.ReportError as e:
        fail(str(e), EXIT_USAGE)
    logger.info("wrote %s files to %s", len(bundle.paths), config.out_dir)


@cli.command()
@click.argument(
    "path",
    type=click.Path(exists=True, dir_okay=False)
)
def dump(path, **kwargs):
    """show some info about a trace or folded trace"""
    klass = memfold.formats.get_format(path, **kwargs)
    if klass is None:
        fail("{}: unknown format".format(path), EXIT_DATA)
    ds = klass(path, **kwargs)
    try:
        click.echo(ds.dump())
    except (mtf.TraceFormatError, prv.FoldedTraceError) as e:
        fail(str(e), EXIT_DATA)
