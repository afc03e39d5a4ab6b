"""
Folded region as a small Paraver subset: one header line and event records
``2:0:1:1:1:<time>:<type>:<value>`` where time is the normalized folded
time scaled to [0, 10^9].
"""
import collections
import logging
import pathlib

import mako.template
import numpy as np

from ..objects import UNNAMED_ID
from ..trace import Kind

logger = logging.getLogger(__name__)

TIME_SCALE = 10 ** 9
HEADER = "#Paraver (01/01/00 at 00:00):{}:1:1:1(1:1)".format(TIME_SCALE)
RECORD = "2:0:1:1:1:{}:{}:{}"

LINE = 70000001
OBJECT = 70000002
LATENCY = 70000003
LEVEL = 70000004
KIND = 70000005
STORE_HIT = 70000006

TYPE_NAMES = {
    LINE: "code line",
    OBJECT: "object id",
    LATENCY: "latency cycles",
    LEVEL: "hierarchy level",
    KIND: "sample kind",
    STORE_HIT: "store L1 hit",
}


class FoldedTraceError(ValueError):
    pass


def scaled_time(norm_time):
    return int(np.floor(norm_time * TIME_SCALE + 0.5))


def folded_records(folded, object_map=None):
    """(time, type, value) records of the folded memory samples, time sorted"""
    samples = folded.memory_samples
    object_ids = [None] * len(samples)
    if object_map is not None and samples:
        ids, _ = object_map.resolve_samples(
            [sample.payload.address for sample in samples],
            [sample.timestamp for sample in samples]
        )
        object_ids = [None if i == UNNAMED_ID else int(i) for i in ids]

    records = []
    for sample, object_id in zip(samples, object_ids):
        time = scaled_time(sample.norm_time)
        payload = sample.payload
        group = []
        if payload.frame is not None:
            group.append((LINE, payload.frame.line))
        if object_id is not None:
            group.append((OBJECT, object_id))
        if payload.kind is Kind.LOAD:
            group.append((LATENCY, payload.latency_cycles))
            group.append((LEVEL, payload.level.value))
            group.append((KIND, 0))
        else:
            group.append((KIND, 1))
            group.append((STORE_HIT, int(payload.store_l1_hit)))
        records.extend((time, type_, value) for type_, value in group)
    # stable, samples are already in folded order
    records.sort(key=lambda record: record[0])
    return records


def emit_folded_trace(folded, out_path, object_map=None):
    """write the folded region as a Paraver subset trace (header only for an empty region)"""
    records = folded_records(folded, object_map)
    if not records:
        logger.warning("folded region %s has no memory samples", folded.region_id)
    with open(str(out_path), "w", encoding="utf-8") as f:
        f.write(HEADER + "\n")
        for record in records:
            f.write(RECORD.format(*record) + "\n")
    logger.info("wrote %s records to %s", len(records), out_path)
    return out_path


def read_folded_trace(path):
    """read back (time, type, value) records of a folded trace"""
    records = []
    with open(str(path), encoding="utf-8") as f:
        header = f.readline().rstrip("\n")
        if header != HEADER:
            raise FoldedTraceError("{}: unexpected header {!r}".format(path, header))
        for lineno, line in enumerate(f, start=2):
            record = line.strip().split(":")
            if record[0] != "2":
                logger.warning("skipping record of unknown type %r on line %s", record[0], lineno)
                continue
            if len(record) != 8 or record[1:5] != ["0", "1", "1", "1"]:
                raise FoldedTraceError("{}: malformed event record on line {}".format(path, lineno))
            _, _, _, _, _, time, type_, value = record
            records.append((int(time), int(type_), int(value)))
    times = [record[0] for record in records]
    if times != sorted(times):
        raise FoldedTraceError("{}: records not sorted by time".format(path))
    return records


dump_tmpl = """
file: ${path}
format: folded Paraver subset
records: ${len(records)}
samples: ${samples}
% for name, count in counts:
${name}
 - records: ${count}
% endfor
"""


class FoldedTrace(object):
    """folded Paraver subset file"""

    def __init__(self, path, **kwargs):
        self.path = path
        self.options = kwargs

    def validate(self):
        path = pathlib.Path(self.path)
        if not path.is_file():
            return False
        with path.open(encoding="utf-8", errors="replace") as f:
            return f.readline().startswith("#Paraver")

    def load(self):
        return read_folded_trace(self.path)

    def dump(self):
        records = self.load()
        counts = collections.Counter(TYPE_NAMES.get(type_, str(type_)) for _, type_, _ in records)
        tmpl = mako.template.Template(dump_tmpl)
        return tmpl.render(
            path=self.path,
            records=records,
            samples=sum(1 for _, type_, _ in records if type_ == KIND),
            counts=sorted(counts.items())
        )
