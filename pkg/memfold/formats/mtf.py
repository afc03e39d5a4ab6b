"""
Memory Trace Format (MTF v1).

Line oriented text, ``|`` separated fields, one record per line::

    H|<version>|<process_id>|<freq_mhz>
    O|<name>|<base_hex>|<size>
    A|<ts>|<base_hex>|<size>|<callsite>
    F|<ts>|<base_hex>
    W|<ts>|<begin_hex>|<end_hex>|<label>
    R|<ts>|<region_id>|E|X
    M|<ts>|L|S
    S|<ts>|L|<addr_hex>|<lat>|<level>|<counters>|<frames>
    S|<ts>|S|<addr_hex>|<hit>|<counters>|<frames>

Counters are ``instructions;cycles;l1d;l2;l3;branch``, frames are
``routine:file:line`` joined by ``,`` (innermost first). Lines starting
with ``#`` are comments.
"""
import io
import logging
import pathlib

import mako.template

from .. import trace as model
from ..trace import (
    AllocEvent, CounterSet, Edge, Frame, FreeEvent, Kind, Level,
    MemorySample, MultiplexWindow, RegionMarker, StaticObjectDecl, Trace,
    TraceEvent, TraceHeader, WrappedRegionEvent
)

logger = logging.getLogger(__name__)


class TraceFormatError(ValueError):
    """malformed trace text, positioned by line number and field"""
    def __init__(self, message, lineno=None, field=None):
        self.lineno = lineno
        self.field = field
        self.message = message
        location = []
        if lineno is not None:
            location.append("line {}".format(lineno))
        if field is not None:
            location.append("field {}".format(field))
        if location:
            message = "{}: {}".format(", ".join(location), message)
        super().__init__(message)


# record tag -> number of fields (tag included)
FIELD_COUNTS = {
    "H": 4,
    "O": 4,
    "A": 5,
    "F": 3,
    "W": 5,
    "R": 4,
    "M": 3,
}


def _int(value, name, lineno):
    try:
        result = int(value, 10)
    except ValueError:
        raise TraceFormatError("expected integer, got {!r}".format(value), lineno, name)
    return result


def _hex(value, name, lineno):
    if not value.lower().startswith("0x"):
        raise TraceFormatError("expected 0x prefixed address, got {!r}".format(value), lineno, name)
    try:
        result = int(value, 16)
    except ValueError:
        raise TraceFormatError("expected hexadecimal address, got {!r}".format(value), lineno, name)
    if result < 0 or result >= 2 ** 64:
        raise TraceFormatError("address out of range: {!r}".format(value), lineno, name)
    return result


def _kind(value, name, lineno):
    try:
        return Kind(value)
    except ValueError:
        raise TraceFormatError("expected L or S, got {!r}".format(value), lineno, name)


def _counters(value, lineno):
    parts = value.split(";")
    if len(parts) != len(CounterSet._fields):
        raise TraceFormatError(
            "expected {} counters, got {}".format(len(CounterSet._fields), len(parts)),
            lineno,
            "counters"
        )
    return CounterSet(*(
        _int(part, "counters." + name, lineno)
        for part, name in zip(parts, CounterSet._fields)
    ))


def _frames(value, lineno):
    if not value:
        return ()
    frames = []
    for text in value.split(","):
        parts = text.rsplit(":", 2)
        if len(parts) != 3:
            raise TraceFormatError("expected routine:file:line, got {!r}".format(text), lineno, "frames")
        routine, file_, line = parts
        try:
            frames.append(Frame(routine, file_, _int(line, "frames.line", lineno)))
        except ValueError as e:
            if isinstance(e, TraceFormatError):
                raise
            raise TraceFormatError(str(e), lineno, "frames")
    return tuple(frames)


def _sample(fields, lineno):
    kind = _kind(fields[2], "kind", lineno)
    expected = 8 if kind is Kind.LOAD else 7
    if len(fields) != expected:
        raise TraceFormatError(
            "{} sample expects {} fields, got {}".format(kind.name.lower(), expected, len(fields)),
            lineno
        )
    address = _hex(fields[3], "address", lineno)
    if kind is Kind.LOAD:
        latency = _int(fields[4], "latency", lineno)
        if latency < 0:
            raise TraceFormatError("negative latency {}".format(latency), lineno, "latency")
        try:
            level = Level[fields[5]]
        except KeyError:
            raise TraceFormatError("unknown level {!r}".format(fields[5]), lineno, "level")
        return MemorySample(
            kind=kind,
            address=address,
            counters=_counters(fields[6], lineno),
            callstack=_frames(fields[7], lineno),
            latency_cycles=latency,
            level=level
        )
    if fields[4] not in ("0", "1"):
        raise TraceFormatError("expected hit flag 0 or 1, got {!r}".format(fields[4]), lineno, "hit")
    return MemorySample(
        kind=kind,
        address=address,
        counters=_counters(fields[5], lineno),
        callstack=_frames(fields[6], lineno),
        store_l1_hit=fields[4] == "1"
    )


def parse_record(line, lineno):
    """parse one non-header line into a TraceEvent"""
    fields = line.split("|")
    tag = fields[0]
    if tag == "S":
        if len(fields) < 3:
            raise TraceFormatError("truncated sample record", lineno)
        ts = _int(fields[1], "timestamp", lineno)
        return TraceEvent(ts, _sample(fields, lineno))
    if tag not in FIELD_COUNTS:
        raise TraceFormatError("unknown record tag {!r}".format(tag), lineno, "tag")
    if len(fields) != FIELD_COUNTS[tag]:
        raise TraceFormatError(
            "{} record expects {} fields, got {}".format(tag, FIELD_COUNTS[tag], len(fields)),
            lineno
        )
    if tag == "H":
        raise TraceFormatError("multiple processes: a trace holds exactly one header", lineno, "tag")
    if tag == "O":
        size = _int(fields[3], "size", lineno)
        if size <= 0:
            raise TraceFormatError("size must be positive, got {}".format(size), lineno, "size")
        return TraceEvent(0, StaticObjectDecl(fields[1], _hex(fields[2], "base", lineno), size))

    ts = _int(fields[1], "timestamp", lineno)
    if ts < 0:
        raise TraceFormatError("negative timestamp {}".format(ts), lineno, "timestamp")
    if tag == "A":
        size = _int(fields[3], "size", lineno)
        if size <= 0:
            raise TraceFormatError("size must be positive, got {}".format(size), lineno, "size")
        payload = AllocEvent(_hex(fields[2], "base", lineno), size, fields[4])
    elif tag == "F":
        payload = FreeEvent(_hex(fields[2], "base", lineno))
    elif tag == "W":
        begin = _hex(fields[2], "begin", lineno)
        end = _hex(fields[3], "end", lineno)
        if begin >= end:
            raise TraceFormatError("begin {:#x} not below end {:#x}".format(begin, end), lineno, "end")
        payload = WrappedRegionEvent(begin, end, fields[4])
    elif tag == "R":
        try:
            edge = Edge(fields[3])
        except ValueError:
            raise TraceFormatError("expected E or X, got {!r}".format(fields[3]), lineno, "edge")
        payload = RegionMarker(_int(fields[2], "region", lineno), edge)
    else:
        payload = MultiplexWindow(_kind(fields[2], "kind", lineno))
    return TraceEvent(ts, payload)


def parse_header(line, lineno):
    fields = line.split("|")
    if fields[0] != "H":
        raise TraceFormatError("expected header record first, got {!r}".format(fields[0]), lineno, "tag")
    if len(fields) != FIELD_COUNTS["H"]:
        raise TraceFormatError("header expects 4 fields, got {}".format(len(fields)), lineno)
    version = _int(fields[1], "version", lineno)
    if version != model.TRACE_VERSION:
        raise TraceFormatError(
            "version mismatch: expected {}, got {}".format(model.TRACE_VERSION, version),
            lineno,
            "version"
        )
    freq = _int(fields[3], "freq_mhz", lineno)
    if freq <= 0:
        raise TraceFormatError("frequency must be positive, got {}".format(freq), lineno, "freq_mhz")
    return TraceHeader(version, _int(fields[2], "process_id", lineno), freq)


def parse_trace(stream):
    """parse an MTF text stream (any iterable of str or utf-8 bytes lines) into a Trace"""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    elif isinstance(stream, bytes):
        stream = io.BytesIO(stream)
    header = None
    events = []
    previous_ts = 0
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as e:
                raise TraceFormatError("invalid utf-8 at byte {}".format(e.start), lineno)
        line = line.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        if header is None:
            header = parse_header(line, lineno)
            continue
        try:
            event = parse_record(line, lineno)
        except TraceFormatError:
            raise
        except ValueError as e:
            # invariants checked by the model types
            raise TraceFormatError(str(e), lineno)
        if event.timestamp < previous_ts:
            raise TraceFormatError(
                "timestamp {} out of order (previous {})".format(event.timestamp, previous_ts),
                lineno,
                "timestamp"
            )
        previous_ts = event.timestamp
        events.append(event)
    if header is None:
        raise TraceFormatError("missing header record", 1, "tag")
    logger.debug("parsed %s events", len(events))
    return Trace(header, tuple(events))


def format_frames(callstack):
    return ",".join(str(frame) for frame in callstack)


def format_counters(counters):
    return ";".join(str(value) for value in counters)


def format_event(event):
    ts = event.timestamp
    payload = event.payload
    if isinstance(payload, MemorySample):
        if payload.kind is Kind.LOAD:
            cost = "{}|{}".format(payload.latency_cycles, payload.level.name)
        else:
            cost = "1" if payload.store_l1_hit else "0"
        return "S|{}|{}|{:#x}|{}|{}|{}".format(
            ts,
            payload.kind.value,
            payload.address,
            cost,
            format_counters(payload.counters),
            format_frames(payload.callstack)
        )
    if isinstance(payload, StaticObjectDecl):
        return "O|{}|{:#x}|{}".format(payload.name, payload.base_address, payload.size)
    if isinstance(payload, AllocEvent):
        return "A|{}|{:#x}|{}|{}".format(ts, payload.base_address, payload.size, payload.callsite)
    if isinstance(payload, FreeEvent):
        return "F|{}|{:#x}".format(ts, payload.base_address)
    if isinstance(payload, WrappedRegionEvent):
        return "W|{}|{:#x}|{:#x}|{}".format(ts, payload.begin_address, payload.end_address, payload.label)
    if isinstance(payload, RegionMarker):
        return "R|{}|{}|{}".format(ts, payload.region_id, payload.edge.value)
    if isinstance(payload, MultiplexWindow):
        return "M|{}|{}".format(ts, payload.kind.value)
    raise TypeError("not a trace payload: {!r}".format(payload))


def iter_lines(trace):
    header = trace.header
    yield "H|{}|{}|{}\n".format(header.version, header.process_id, header.nominal_freq_mhz)
    for event in trace.events:
        yield format_event(event) + "\n"


def emit_trace(trace):
    """serialize a trace to MTF text"""
    return "".join(iter_lines(trace))


def write_trace(trace, path):
    with open(str(path), "w", encoding="utf-8") as f:
        f.writelines(iter_lines(trace))


def read_trace(path):
    with open(str(path), "rb") as f:
        return parse_trace(f)


dump_tmpl = """
file: ${path}
format: ${format}
process: ${trace.header.process_id}
frequency: ${trace.header.nominal_freq_mhz} MHz
span: ${trace.span[0]} - ${trace.span[1]} ns
% for name, count in counts:
${name}
 - records: ${count}
% endfor
regions: ${trace.region_ids()}
"""


class MemoryTrace(object):
    """MTF trace file"""

    def __init__(self, path, **kwargs):
        self.path = path
        self.options = kwargs

    def validate(self):
        """does the file start with an MTF header"""
        path = pathlib.Path(self.path)
        if not path.is_file():
            return False
        with path.open(encoding="utf-8", errors="replace") as f:
            for line in f:
                if line.startswith("#") or not line.strip():
                    continue
                return line.startswith("H|")
        return False

    def load(self):
        return read_trace(self.path)

    def dump(self):
        trace = self.load()
        counts = {}
        for event in trace.events:
            payload = event.payload
            name = type(payload).__name__
            if isinstance(payload, MemorySample):
                name = "pseudo sample" if payload.is_pseudo else payload.kind.name.lower() + " sample"
            counts[name] = counts.get(name, 0) + 1
        tmpl = mako.template.Template(dump_tmpl)
        return tmpl.render(
            path=self.path,
            format="MTF v{}".format(trace.header.version),
            trace=trace,
            counts=sorted(counts.items())
        )
