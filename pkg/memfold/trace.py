# -*- coding: utf-8 -*-
"""
Event trace data model.

A trace holds the records of one process: region markers, allocation
lifecycle, static object declarations, multiplex windows and sampled
memory references. Timestamps are integer nanoseconds since trace start.
"""
import enum
import logging
import typing
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

TRACE_VERSION = 1
TIME_UNIT = "ns"

# characters that would break the line format
RESERVED = ("|", "\n", "\r")


class Kind(enum.Enum):
    LOAD = "L"
    STORE = "S"


class Level(enum.Enum):
    """memory hierarchy level that served a load, valued by its trace code"""
    L1 = 1
    LFB = 2
    L2 = 3
    L3 = 4
    DRAM = 5


class Edge(enum.Enum):
    ENTER = "E"
    EXIT = "X"


def _check_text(value, name, forbidden=RESERVED):
    for char in forbidden:
        if char in value:
            raise ValueError("{} may not contain {!r}: {!r}".format(name, char, value))


@dataclass(frozen=True)
class TraceHeader:
    version: int = TRACE_VERSION
    process_id: int = 0
    # core cycles per microsecond
    nominal_freq_mhz: int = 2500
    time_unit: str = field(default=TIME_UNIT, init=False)


class CounterSet(typing.NamedTuple):
    """cumulative hardware counter readings"""
    instructions: int = 0
    cycles: int = 0
    l1d_misses: int = 0
    l2_misses: int = 0
    l3_misses: int = 0
    branch_instructions: int = 0

    def delta(self, previous):
        return CounterSet(*(a - b for a, b in zip(self, previous)))

    def regressed(self, previous):
        """names of the counters that went down since previous"""
        return [
            name
            for name, a, b in zip(self._fields, self, previous)
            if a < b
        ]


@dataclass(frozen=True)
class Frame:
    routine: str
    file: str
    line: int

    def __post_init__(self):
        _check_text(self.routine, "routine", RESERVED + (",",))
        _check_text(self.file, "file", RESERVED + (",", ":"))

    def __str__(self):
        return "{}:{}:{}".format(self.routine, self.file, self.line)


@dataclass(frozen=True)
class RegionMarker:
    region_id: int
    edge: Edge


@dataclass(frozen=True)
class AllocEvent:
    base_address: int
    size: int
    callsite: str

    def __post_init__(self):
        _check_text(self.callsite, "callsite")


@dataclass(frozen=True)
class FreeEvent:
    base_address: int


@dataclass(frozen=True)
class WrappedRegionEvent:
    begin_address: int
    end_address: int
    label: str

    def __post_init__(self):
        _check_text(self.label, "label")


@dataclass(frozen=True)
class StaticObjectDecl:
    name: str
    base_address: int
    size: int

    def __post_init__(self):
        _check_text(self.name, "name")


@dataclass(frozen=True)
class MultiplexWindow:
    kind: Kind


@dataclass(frozen=True)
class MemorySample:
    """One sampled memory reference.

    Loads carry ``latency_cycles`` and ``level``, stores carry only
    ``store_l1_hit``. A load at address 0x0 is a pseudo-sample that only
    snapshots the counters (emitted at region enter).
    """
    kind: Kind
    address: int
    counters: CounterSet = CounterSet()
    callstack: typing.Tuple[Frame, ...] = ()
    latency_cycles: typing.Optional[int] = None
    level: typing.Optional[Level] = None
    store_l1_hit: typing.Optional[bool] = None

    def __post_init__(self):
        if self.kind is Kind.LOAD:
            if self.latency_cycles is None or self.level is None:
                raise ValueError("load samples need latency and level")
            if self.store_l1_hit is not None:
                raise ValueError("load samples carry no store hit flag")
            if self.latency_cycles < 0:
                raise ValueError("negative latency {}".format(self.latency_cycles))
        else:
            if self.latency_cycles is not None or self.level is not None:
                raise ValueError("store samples carry no latency or level")
            if self.store_l1_hit is None:
                raise ValueError("store samples need the L1 hit flag")

    @property
    def is_pseudo(self):
        return self.address == 0

    @property
    def frame(self):
        """innermost frame, if any"""
        return self.callstack[0] if self.callstack else None


PAYLOAD_TYPES = (
    RegionMarker, AllocEvent, FreeEvent, WrappedRegionEvent,
    StaticObjectDecl, MultiplexWindow, MemorySample
)


@dataclass(frozen=True)
class TraceEvent:
    timestamp: int
    payload: typing.Any


@dataclass(frozen=True)
class Trace:
    header: TraceHeader
    events: typing.Tuple[TraceEvent, ...] = ()

    def of_type(self, klass):
        """(timestamp, payload) pairs of one payload type"""
        return [
            (event.timestamp, event.payload)
            for event in self.events
            if isinstance(event.payload, klass)
        ]

    def samples(self):
        return self.of_type(MemorySample)

    def region_ids(self):
        return sorted({marker.region_id for _, marker in self.of_type(RegionMarker)})

    @property
    def span(self):
        if not self.events:
            return (0, 0)
        return (self.events[0].timestamp, self.events[-1].timestamp)


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    index: int
    message: str

    ERROR = "error"
    WARNING = "warning"

    def __str__(self):
        return "{}: event {}: {}".format(self.severity, self.index, self.message)


def validate_trace(trace):
    """check the trace invariants, return a list of diagnostics (empty if valid)"""
    diagnostics = []

    def error(index, message):
        diagnostics.append(Diagnostic(Diagnostic.ERROR, index, message))

    def warning(index, message):
        diagnostics.append(Diagnostic(Diagnostic.WARNING, index, message))

    header = trace.header
    if header.version != TRACE_VERSION:
        error(-1, "unsupported version {}".format(header.version))
    if header.nominal_freq_mhz <= 0:
        error(-1, "nominal frequency must be positive, got {}".format(header.nominal_freq_mhz))

    previous_ts = 0
    # region id -> index of the open enter marker
    open_regions = {}
    live_allocations = set()
    window = None
    previous_counters = None

    for i, event in enumerate(trace.events):
        ts = event.timestamp
        payload = event.payload
        if ts < 0:
            error(i, "negative timestamp {}".format(ts))
        if ts < previous_ts:
            error(i, "timestamp {} out of order (previous {})".format(ts, previous_ts))
        previous_ts = max(previous_ts, ts)

        if isinstance(payload, StaticObjectDecl):
            if ts != 0:
                error(i, "static object {} declared at {} instead of 0".format(payload.name, ts))
            if payload.size <= 0:
                error(i, "static object {} has size {}".format(payload.name, payload.size))
        elif isinstance(payload, AllocEvent):
            if payload.size <= 0:
                error(i, "allocation at {:#x} has size {}".format(payload.base_address, payload.size))
            live_allocations.add(payload.base_address)
        elif isinstance(payload, FreeEvent):
            if payload.base_address in live_allocations:
                live_allocations.remove(payload.base_address)
            else:
                warning(i, "free of {:#x} without live allocation".format(payload.base_address))
        elif isinstance(payload, WrappedRegionEvent):
            if payload.begin_address >= payload.end_address:
                error(i, "wrapped region {} is empty ({:#x} >= {:#x})".format(
                    payload.label, payload.begin_address, payload.end_address))
        elif isinstance(payload, RegionMarker):
            region = payload.region_id
            if payload.edge is Edge.ENTER:
                if region in open_regions:
                    error(i, "unbalanced region marker: enter of region {} while open".format(region))
                open_regions[region] = i
            else:
                if region not in open_regions:
                    error(i, "unbalanced region marker: exit of region {} without enter".format(region))
                open_regions.pop(region, None)
        elif isinstance(payload, MultiplexWindow):
            if window is payload.kind:
                error(i, "consecutive multiplex windows of kind {}".format(payload.kind.name.lower()))
            window = payload.kind
        elif isinstance(payload, MemorySample):
            if previous_counters is not None:
                regressed = payload.counters.regressed(previous_counters)
                if regressed:
                    error(i, "counter regression: {}".format(", ".join(regressed)))
            previous_counters = payload.counters
            if not payload.is_pseudo and window is not None and window is not payload.kind:
                warning(i, "{} sample inside a {} window".format(
                    payload.kind.name.lower(), window.name.lower()))
        else:
            error(i, "unknown payload {!r}".format(payload))

    for region, index in sorted(open_regions.items()):
        error(index, "unbalanced region marker: region {} never exits".format(region))

    for diagnostic in diagnostics:
        logger.debug("%s", diagnostic)
    return diagnostics
