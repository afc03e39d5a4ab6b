"""
Folded region report: a three panel gnuplot script with its plain text
data files (source references, address space references, performance
curves), the summary tables, the folded Paraver subset trace and a short
summary text.
"""
import dataclasses
import itertools
import logging
import pathlib
import typing
from dataclasses import dataclass

import mako.template
import numpy as np
import pandas as pd
import tqdm

from . import tables
from .analysis import folded_frame
from .formats.prv import emit_folded_trace
from .objects import STACK_ID

logger = logging.getLogger(__name__)

# 1 MiB
DEFAULT_GAP_THRESHOLD = 1 << 20

SCRIPT = "report.gp"
DATA_FILES = dict(
    source="source.dat",
    loads="loads.dat",
    stores="stores.dat",
    curves="curves.dat",
    objects="objects.dat",
)
TABLE_FILES = dict(
    access="access.csv",
    ranking="ranking.csv",
    phases="phases.csv",
)
FOLDED_TRACE = "folded.prv"
SUMMARY = "summary.txt"

ROUTINE_COLORS = ("#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#a65628", "#f781bf", "#999999")


class ReportError(OSError):
    pass


@dataclass(frozen=True)
class ReportBundle:
    script: pathlib.Path
    data: typing.Dict[str, pathlib.Path]
    tables: typing.Dict[str, pathlib.Path]
    folded_trace: typing.Optional[pathlib.Path] = None
    summary: typing.Optional[pathlib.Path] = None

    @property
    def paths(self):
        paths = [self.script] + list(self.data.values()) + list(self.tables.values())
        return paths + [path for path in (self.folded_trace, self.summary) if path is not None]


def _merge(intervals):
    merged = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    return merged


class AddressAxis(object):
    """Order preserving address axis with compressed gaps.

    Occupied intervals keep their extent, gaps between them wider than
    ``gap_threshold`` shrink to ``gap_threshold``.
    """

    def __init__(self, intervals, gap_threshold=DEFAULT_GAP_THRESHOLD):
        if gap_threshold <= 0:
            raise ValueError("gap threshold must be positive")
        self.gap_threshold = gap_threshold
        self.intervals = _merge((int(lo), int(hi)) for lo, hi in intervals)
        offsets = []
        position = 0
        previous = None
        for lo, hi in self.intervals:
            if previous is not None:
                position += min(lo - previous, gap_threshold)
            offsets.append(position)
            position += hi - lo
            previous = hi
        self.offsets = offsets
        self.extent = position

    def compress(self, addresses):
        """compressed positions of an array of addresses"""
        addresses = [int(address) for address in np.atleast_1d(addresses)]
        if not self.intervals:
            return np.zeros(len(addresses), dtype=np.int64)
        los = [lo for lo, _ in self.intervals]
        positions = []
        for address in addresses:
            i = max(np.searchsorted(los, address, side="right") - 1, 0)
            lo, hi = self.intervals[i]
            if address < lo:
                positions.append(self.offsets[i] - min(lo - address, self.gap_threshold))
            elif address < hi:
                positions.append(self.offsets[i] + address - lo)
            else:
                positions.append(self.offsets[i] + (hi - lo) + min(address - hi, self.gap_threshold))
        return np.array(positions, dtype=np.int64)


def object_bands(frame, object_map):
    """(id, label, size, lo, hi) address bands of the referenced objects plus the stack"""
    bands = []
    for object_id in sorted(set(int(i) for i in frame["object_id"].values if i > 0)):
        obj = object_map[object_id]
        bands.append((obj.id, obj.label, obj.size, obj.base, obj.end))
    stack = frame[frame["object_id"] == STACK_ID]["address"].values
    if len(stack):
        lo, hi = int(stack.min()), int(stack.max()) + 1
        bands.append((STACK_ID, "stack", hi - lo, lo, hi))
    return bands


def _routine_bands(profile):
    """(routine, start, stop) runs of the per bin dominant routine"""
    runs = []
    routines = [frame.routine if frame is not None else None for frame in profile.dominant]
    position = 0
    for routine, group in itertools.groupby(routines):
        width = len(list(group))
        if routine is not None:
            runs.append((routine, position / profile.bins, (position + width) / profile.bins))
        position += width
    return runs


def _quote(text):
    return str(text).replace("\\", "\\\\").replace('"', '\\"')


def write_data(frame, path, float_format="%.6g"):
    """whitespace separated data file with a commented header line"""
    with open(str(path), "w", encoding="utf-8") as f:
        f.write("# " + " ".join(frame.columns) + "\n")
        frame.to_csv(f, sep=" ", index=False, header=False, na_rep="NaN", float_format=float_format)
    return path


plot_tmpl = """\
# folded report of region ${region_id}, run with: gnuplot ${script}
set terminal pngcairo size 1200,1500 enhanced font ",9"
set output "report.png"
set multiplot layout 3,1
set xrange [0:1]
set xlabel "normalized time"

# source code references
unset key
set ylabel "code line"
% for i, (routine, start, stop) in enumerate(bands):
set object ${i + 1} rect from ${start}, graph 0 to ${stop}, graph 1 fc rgb "${colors[routines.index(routine) % len(colors)]}" fs solid 0.15 noborder behind
% endfor
% for i, phase in enumerate(phases):
set label ${i + 1} "${quote(phase.label)} [${phase.mocl[1]}]" at ${'%.6g' % (phase.start_frac + phase.width / 2)}, graph 0.95 center front
% endfor
% if has_source:
plot "${files['source']}" using 1:2:3 with points pt 7 ps 0.3 lc variable
% else:
plot 1/0 notitle
% endif
unset object
unset label

# address space references, loads by latency (green to blue), stores black
set ylabel "address space"
% if ticks:
set ytics (${", ".join('"%s" %d' % (quote(label), position) for label, position in ticks)})
% endif
% for i, (object_id, label, size, lo, hi) in enumerate(object_rows):
set object ${i + 1} rect from graph 0, first ${lo} to graph 1, first ${hi} fc rgb "gray" fs transparent solid 0.1 noborder behind
% endfor
set palette defined (0 "green", 1 "blue")
set cblabel "latency (cycles)"
% if has_loads and has_stores:
plot "${files['loads']}" using 1:2:3 with points pt 7 ps 0.3 palette, \\
     "${files['stores']}" using 1:2 with points pt 7 ps 0.3 lc rgb "black"
% elif has_loads:
plot "${files['loads']}" using 1:2:3 with points pt 7 ps 0.3 palette
% elif has_stores:
plot "${files['stores']}" using 1:2 with points pt 7 ps 0.3 lc rgb "black"
% else:
plot 1/0 notitle
% endif
unset object
unset colorbox
set ytics auto

# performance metrics
set key top left
set ylabel "misses per instruction"
set y2label "MIPS"
set ytics nomirror
set y2tics
plot "${files['curves']}" using 1:3 with lines lw 2 lc rgb "red" title "L1D misses", \\
     "${files['curves']}" using 1:4 with lines lw 2 lc rgb "orange" title "L2 misses", \\
     "${files['curves']}" using 1:5 with lines lw 2 lc rgb "yellow" title "L3 misses", \\
     "${files['curves']}" using 1:2 axes x1y2 with lines lw 2 lc rgb "black" title "MIPS"
unset multiplot
"""


summary_tmpl = """\
region ${result.region_id}: ${instances} instances, ${retained} retained, median duration ${'%.0f' % result.median_duration} ns
samples: ${loads} loads, ${stores} stores
references: ${result.references['objects']} objects, ${result.references['stack']} stack, ${result.references['unnamed']} unnamed

phases:
% for phase in result.phases:
 - ${phase.label} [${'%.2f' % phase.start_frac}, ${'%.2f' % phase.end_frac}) ${phase.dominant_routine} ${phase.mocl[0]}:${phase.mocl[1]}\\
% if result.store_hits.get(phase.label) is not None:
 store L1 hit ${'%.3f' % result.store_hits[phase.label]}\\
% endif

% endfor

patterns:
% for pattern in patterns:
 - ${pattern.phase} ${labels.get(pattern.object_id, pattern.object_id)}: ${pattern.pattern.value} (r2 ${'%.3f' % pattern.fit_r2}, coverage ${'%.3f' % pattern.coverage}, ${pattern.count} samples)
% endfor

bandwidth:
% for estimate in result.bandwidths:
 - ${estimate.phase} ${labels.get(estimate.object_id, estimate.object_id)}: ${'%.0f' % estimate.bandwidth} MB/s
% endfor
% if result.extrapolated is not None:

extrapolated totals: ${'%.0f' % result.extrapolated[0]} loads, ${'%.0f' % result.extrapolated[1]} stores
% endif
"""


def emit_summary_tables(result, out_dir):
    """write the access, ranking and phase tables, return their paths by name"""
    out_dir = pathlib.Path(out_dir)
    frames = dict(
        access=tables.access_frame(result.access),
        ranking=tables.ranking_frame(result.ranking),
        phases=tables.phase_frame(result.phases, result.median_duration),
    )
    paths = {}
    try:
        for name, filename in TABLE_FILES.items():
            paths[name] = tables.write_csv(frames[name], out_dir / filename)
    except OSError as e:
        raise ReportError("cannot write tables to {}: {}".format(out_dir, e))
    return paths


def _prepare(out_dir):
    out_dir = pathlib.Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ReportError("cannot create output directory {}: {}".format(out_dir, e))
    return out_dir


def render_report(folded, object_map, result, out_dir, gap_threshold=DEFAULT_GAP_THRESHOLD):
    """write the plot script, data files, tables and summary of a folded region"""
    out_dir = _prepare(out_dir)
    frame = folded_frame(folded, object_map)
    if frame.empty:
        logger.warning("region %s has no memory samples, the scatters are empty", folded.region_id)

    bands = object_bands(frame, object_map)
    intervals = [(lo, hi) for _, _, _, lo, hi in bands]
    intervals += [(int(address), int(address) + 1) for address in frame["address"].values]
    axis = AddressAxis(intervals, gap_threshold)
    frame["position"] = axis.compress(frame["address"].values)

    routines = sorted(set(frame["routine"]) | {routine for routine, _, _ in _routine_bands(folded.profile)})
    index = {routine: i + 1 for i, routine in enumerate(routines)}
    frame["routine_index"] = [index.get(routine, 0) for routine in frame["routine"]]
    frame["address_hex"] = ["{:#x}".format(int(address)) for address in frame["address"].values]
    loads = frame[frame["kind"] == "load"]
    stores = frame[frame["kind"] == "store"]

    object_rows = []
    for object_id, label, size, lo, hi in bands:
        lo_pos, hi_pos = axis.compress([lo, hi - 1])
        object_rows.append((object_id, label, size, int(lo_pos), int(hi_pos) + 1))
    objects = pd.DataFrame.from_records(object_rows, columns=["object_id", "label", "size_bytes", "lo", "hi"])

    datasets = dict(
        source=frame[["norm_time", "line", "routine_index", "kind"]],
        loads=loads[["norm_time", "position", "latency", "level", "object_id", "address_hex"]],
        stores=stores[["norm_time", "position", "hit", "object_id", "address_hex"]].assign(
            hit=stores["hit"].astype(int)),
        curves=folded.curves.frame(),
        objects=objects,
    )
    data = {}
    try:
        for name, filename in tqdm.tqdm(DATA_FILES.items(), desc="report"):
            data[name] = write_data(datasets[name], out_dir / filename)

        ticks = [
            ("{} ({} B)".format(label, size), (lo + hi) // 2)
            for _, label, size, lo, hi in object_rows
        ]
        tmpl = mako.template.Template(plot_tmpl)
        script = out_dir / SCRIPT
        script.write_text(tmpl.render(
            region_id=folded.region_id,
            script=SCRIPT,
            files=DATA_FILES,
            bands=_routine_bands(folded.profile),
            routines=routines,
            colors=ROUTINE_COLORS,
            phases=folded.phases,
            ticks=ticks,
            object_rows=object_rows,
            has_source=not frame.empty,
            has_loads=not loads.empty,
            has_stores=not stores.empty,
            quote=_quote
        ))

        summary = out_dir / SUMMARY
        tmpl = mako.template.Template(summary_tmpl)
        summary.write_text(tmpl.render(
            result=result,
            instances=len(folded.instances),
            retained=len(folded.retained),
            loads=len(loads),
            stores=len(stores),
            patterns=[pattern for pattern in result.patterns if pattern.phase],
            labels={obj.id: obj.label for obj in object_map.objects}
        ))
    except OSError as e:
        raise ReportError("cannot write report to {}: {}".format(out_dir, e))

    bundle = ReportBundle(script, data, emit_summary_tables(result, out_dir), summary=summary)
    logger.info("report of region %s written to %s", folded.region_id, out_dir)
    return bundle


def write_report(folded, object_map, result, out_dir, gap_threshold=DEFAULT_GAP_THRESHOLD):
    """render_report plus the folded trace"""
    bundle = render_report(folded, object_map, result, out_dir, gap_threshold)
    path = pathlib.Path(out_dir) / FOLDED_TRACE
    try:
        emit_folded_trace(folded, path, object_map)
    except OSError as e:
        raise ReportError("cannot write folded trace {}: {}".format(path, e))
    return dataclasses.replace(bundle, folded_trace=path)
