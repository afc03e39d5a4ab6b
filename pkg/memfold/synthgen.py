"""
Synthetic memory traces with exact ground truth.

A workload declares kernels (routine, hot line, duration, referenced
objects, access pattern, hierarchy level and latency distributions,
counter rates) and data objects with their allocation lifecycle. The
generator runs a global sampling clock per kind over the loads and
stores of every kernel instance, draws levels, latencies and addresses
from a deterministic SplitMix64 stream and writes the samples that fall
in an active multiplex window.
"""
import bisect
import itertools
import logging
import pathlib
import typing
from dataclasses import dataclass, field

import pandas as pd
import tqdm

from . import tables
from .analysis import AccessRow
from .folding import phase_labels
from .objects import RankRow
from .trace import (
    AllocEvent, CounterSet, Edge, Frame, FreeEvent, Kind, Level, MemorySample,
    MultiplexWindow, RegionMarker, StaticObjectDecl, Trace, TraceEvent,
    TraceHeader, WrappedRegionEvent
)

logger = logging.getLogger(__name__)

# desk scale periods, snapped to 1367 and 82307
LOAD_PERIOD = 1370
STORE_PERIOD = 82310
# 5 ms
MULTIPLEX_WINDOW = 5000000
STACK_FLOOR = 0x7ffc00000000
STACK_SPAN = 1 << 16
STATIC_BASE = 0x601000
HEAP_BASE = 0x2aaaab000000
HEAP_GAP = 1 << 22
PAGE = 0x1000
ELEMENT = 8

PATTERNS = ("ascending", "descending", "random")
OBJECT_KINDS = ("static", "dynamic", "wrapped")
MULTIPLEX_MODES = ("both", "load", "store")
SHARE_TOLERANCE = 1e-9
# latency values with at least this weight are reported as true modes
MODE_WEIGHT = 0.15

DEFAULT_LATENCIES = {
    Level.L1: ((7, 1.0),),
    Level.LFB: ((40, 1.0),),
    Level.L2: ((14, 1.0),),
    Level.L3: ((45, 1.0),),
    Level.DRAM: ((250, 1.0),),
}

MASK64 = (1 << 64) - 1

# event order at equal timestamps
EXIT, FREE, DECLARE, ALLOC, WINDOW, ENTER, PSEUDO, SAMPLE = range(8)


class SpecError(ValueError):
    pass


class SplitMix64(object):
    """SplitMix64 stream, identical in every implementation"""
    GOLDEN = 0x9E3779B97F4A7C15
    MIX1 = 0xBF58476D1CE4E5B9
    MIX2 = 0x94D049BB133111EB

    def __init__(self, seed):
        self.state = seed & MASK64

    def next(self):
        self.state = (self.state + self.GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * self.MIX1) & MASK64
        z = ((z ^ (z >> 27)) * self.MIX2) & MASK64
        return z ^ (z >> 31)

    def random(self):
        """uniform float in [0, 1) from the top 53 bits"""
        return (self.next() >> 11) * 2.0 ** -53

    def randbelow(self, n):
        """uniform integer in [0, n)"""
        return (self.next() * n) >> 64

    def pick(self, cumulative):
        """index drawn from a cumulative weight table ending in 1"""
        index = bisect.bisect_right(cumulative, self.random())
        return min(index, len(cumulative) - 1)


def is_prime(n):
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    i = 3
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


def snap_to_prime(n):
    """nearest prime, the smaller one on ties"""
    if n <= 2:
        return 2
    for distance in itertools.count():
        if is_prime(n - distance):
            return n - distance
        if is_prime(n + distance):
            return n + distance


def snap_periods(load_period, store_period):
    snapped = snap_to_prime(load_period), snap_to_prime(store_period)
    logger.info(
        "sampling periods snapped to primes: loads %s -> %s, stores %s -> %s",
        load_period, snapped[0], store_period, snapped[1]
    )
    return snapped


def _cumulative(weights):
    total = float(sum(weights))
    cumulative = list(itertools.accumulate(weight / total for weight in weights))
    cumulative[-1] = 1.0
    return cumulative


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    kind: str = "dynamic"
    size: int = 0
    base: typing.Optional[int] = None
    callsite: typing.Optional[str] = None
    alloc_iteration: typing.Optional[int] = None
    free_iteration: typing.Optional[int] = None
    # split in chunk allocations of chunk_size bytes
    chunks: int = 0
    chunk_size: int = 0

    @property
    def label(self):
        """label the object map gives the object"""
        if self.kind == "dynamic":
            return self.callsite or self.name
        return self.name

    def live(self, iteration):
        if self.kind == "static":
            return True
        if self.alloc_iteration is not None and iteration < self.alloc_iteration:
            return False
        if self.free_iteration is not None and iteration > self.free_iteration:
            return False
        return True


@dataclass(frozen=True)
class KernelSpec:
    routine: str
    file: str = "kernel.c"
    hot_line: int = 1
    # ns per iteration
    duration: int = 1000000
    objects: typing.Tuple[str, ...] = ()
    object_weights: typing.Tuple[float, ...] = ()
    pattern: str = "ascending"
    store_object: typing.Optional[str] = None
    store_pattern: typing.Optional[str] = None
    levels: typing.Mapping[Level, float] = field(default_factory=lambda: {Level.L1: 1.0})
    latencies: typing.Mapping[Level, typing.Tuple[typing.Tuple[int, float], ...]] = field(
        default_factory=dict)
    latency_jitter: int = 0
    # instructions per microsecond
    mips: float = 1000.0
    l1d_miss: float = 0.0
    l2_miss: float = 0.0
    l3_miss: float = 0.0
    branch: float = 0.0
    load_fraction: float = 0.3
    store_fraction: float = 0.1
    stack_fraction: float = 0.0
    store_hit: float = 1.0

    @property
    def frame(self):
        return Frame(self.routine, self.file, self.hot_line)

    @property
    def instructions(self):
        return int(round(self.mips * self.duration / 1000))

    @property
    def loads(self):
        return int(round(self.instructions * self.load_fraction))

    @property
    def stores(self):
        return int(round(self.instructions * self.store_fraction))

    def latency_distribution(self, level):
        return tuple(self.latencies.get(level, DEFAULT_LATENCIES[level]))

    def mean_latency(self, level):
        return sum(value * weight for value, weight in self.latency_distribution(level))

    def validate(self, names):
        where = "kernel {}".format(self.routine)
        if not self.routine:
            raise SpecError("kernel without routine")
        if self.duration <= 0:
            raise SpecError("{}: duration must be positive".format(where))
        for pattern in (self.pattern, self.store_pattern or self.pattern):
            if pattern not in PATTERNS:
                raise SpecError("{}: unknown pattern {!r}".format(where, pattern))
        for name in self.objects + ((self.store_object,) if self.store_object else ()):
            if name not in names:
                raise SpecError("{}: unknown object {!r}".format(where, name))
        if self.object_weights:
            if len(self.object_weights) != len(self.objects):
                raise SpecError("{}: {} object weights for {} objects".format(
                    where, len(self.object_weights), len(self.objects)))
            if any(weight <= 0 for weight in self.object_weights):
                raise SpecError("{}: object weights must be positive".format(where))
        if any(share < 0 for share in self.levels.values()):
            raise SpecError("{}: negative level share".format(where))
        total = sum(self.levels.values())
        if abs(total - 1.0) > SHARE_TOLERANCE:
            raise SpecError("{}: level shares sum to {:.6g}, not 1".format(where, total))
        for level, distribution in self.latencies.items():
            weights = sum(weight for _, weight in distribution)
            if abs(weights - 1.0) > SHARE_TOLERANCE:
                raise SpecError("{}: {} latency weights sum to {:.6g}, not 1".format(
                    where, level.name, weights))
            if any(value < 0 or weight < 0 for value, weight in distribution):
                raise SpecError("{}: negative {} latency or weight".format(where, level.name))
        if self.latency_jitter < 0:
            raise SpecError("{}: negative latency jitter".format(where))
        if self.mips <= 0:
            raise SpecError("{}: mips must be positive".format(where))
        fractions = dict(
            l1d_miss=self.l1d_miss, l2_miss=self.l2_miss, l3_miss=self.l3_miss,
            branch=self.branch, load_fraction=self.load_fraction,
            store_fraction=self.store_fraction, stack_fraction=self.stack_fraction,
            store_hit=self.store_hit
        )
        for name, value in fractions.items():
            if not 0 <= value <= 1:
                raise SpecError("{}: {} must be in [0, 1], got {}".format(where, name, value))
        if self.load_fraction + self.store_fraction > 1:
            raise SpecError("{}: load and store fractions exceed 1".format(where))


@dataclass(frozen=True)
class WorkloadSpec:
    kernels: typing.Tuple[KernelSpec, ...]
    objects: typing.Tuple[ObjectSpec, ...] = ()
    iterations: int = 10
    load_period: int = LOAD_PERIOD
    store_period: int = STORE_PERIOD
    multiplex_window: int = MULTIPLEX_WINDOW
    multiplex: str = "both"
    freq_mhz: int = 2500
    seed: int = 0
    process_id: int = 0
    stack_floor: int = STACK_FLOOR
    snap_periods: bool = True
    region_id: int = 1
    start: int = 1000

    @property
    def iteration_duration(self):
        return sum(kernel.duration for kernel in self.kernels)

    @property
    def end(self):
        return self.start + self.iterations * self.iteration_duration

    def object(self, name):
        for obj in self.objects:
            if obj.name == name:
                return obj
        raise KeyError(name)

    def periods(self):
        if self.snap_periods:
            return snap_periods(self.load_period, self.store_period)
        return self.load_period, self.store_period

    def validate(self):
        if not self.kernels:
            raise SpecError("workload needs at least one kernel")
        if self.iterations < 1:
            raise SpecError("iterations must be at least 1, got {}".format(self.iterations))
        if self.load_period <= 0 or self.store_period <= 0:
            raise SpecError("sampling periods must be positive")
        if self.multiplex_window <= 0:
            raise SpecError("multiplex window must be positive")
        if self.multiplex not in MULTIPLEX_MODES:
            raise SpecError("multiplex must be one of {}, got {!r}".format(
                ", ".join(MULTIPLEX_MODES), self.multiplex))
        if self.freq_mhz <= 0:
            raise SpecError("frequency must be positive")
        if not 0 <= self.seed <= MASK64:
            raise SpecError("seed must be an unsigned 64 bit integer")
        if self.start < 0:
            raise SpecError("start must not be negative")
        names = [obj.name for obj in self.objects]
        if len(set(names)) != len(names):
            raise SpecError("duplicate object names")
        for obj in self.objects:
            self._validate_object(obj)
        for kernel in self.kernels:
            kernel.validate(set(names))

    def _validate_object(self, obj):
        where = "object {}".format(obj.name)
        if obj.kind not in OBJECT_KINDS:
            raise SpecError("{}: unknown kind {!r}".format(where, obj.kind))
        if obj.size <= 0:
            raise SpecError("{}: size must be positive".format(where))
        if obj.chunks:
            if obj.kind == "static":
                raise SpecError("{}: static objects have no chunks".format(where))
            if obj.chunks < 0 or obj.chunk_size <= 0:
                raise SpecError("{}: chunks and chunk_size must be positive".format(where))
            if obj.chunk_size > obj.size // obj.chunks:
                raise SpecError("{}: {} chunks of {} bytes exceed {} bytes".format(
                    where, obj.chunks, obj.chunk_size, obj.size))
        for key in ("alloc_iteration", "free_iteration"):
            value = getattr(obj, key)
            if value is not None and not 0 <= value < self.iterations:
                raise SpecError("{}: {} {} outside [0, {})".format(where, key, value, self.iterations))
        if (obj.alloc_iteration is not None and obj.free_iteration is not None and
                obj.free_iteration < obj.alloc_iteration):
            raise SpecError("{}: freed before allocated".format(where))


def _align(value, alignment=PAGE):
    return -(-value // alignment) * alignment


def layout(spec):
    """base address of every object, explicit bases win"""
    bases = {}
    static_next, heap_next = STATIC_BASE, HEAP_BASE
    for obj in spec.objects:
        if obj.base is not None:
            bases[obj.name] = obj.base
        elif obj.kind == "static":
            bases[obj.name] = static_next
            static_next = _align(static_next + obj.size)
        else:
            bases[obj.name] = heap_next
            heap_next = _align(heap_next + obj.size) + HEAP_GAP
    return bases


def kernel_phases(kernels):
    """phase label of every kernel, by the labelling rule of detect_phases"""
    groups = [list(group) for _, group in itertools.groupby(kernels, key=lambda k: k.routine)]
    labels = []
    for label, group in zip(phase_labels(len(groups)), groups):
        lines = [len(list(run)) for _, run in itertools.groupby(group, key=lambda k: (k.file, k.hot_line))]
        if len(lines) == 1:
            labels.extend([label] * len(group))
            continue
        for j, count in enumerate(lines, start=1):
            labels.extend(["{}{}".format(label.lower(), j)] * count)
    return labels


@dataclass(frozen=True)
class PatternTruth:
    phase: str
    routine: str
    object: str
    kind: str
    pattern: str


@dataclass(frozen=True)
class RateTruth:
    phase: str
    routine: str
    mips: float
    l1d_per_instruction: float
    l2_per_instruction: float
    l3_per_instruction: float
    branch_per_instruction: float
    ipc: float
    duration_ms: float


@dataclass(eq=False)
class GroundTruth:
    access: typing.List[AccessRow]
    patterns: typing.List[PatternTruth]
    totals: typing.Dict[str, int]
    rates: typing.List[RateTruth]
    ranking: typing.List[RankRow]
    kernel_labels: typing.List[str]


class _Generator(object):
    def __init__(self, spec, seed):
        self.spec = spec
        self.rng = SplitMix64(seed)
        self.bases = layout(spec)
        self.objects = {obj.name: obj for obj in spec.objects}
        self.load_period, self.store_period = spec.periods()
        # (timestamp, order, sequence, payload)
        self.events = []
        self.references = {}
        self.sample_counts = {Kind.LOAD: 0, Kind.STORE: 0}

    def push(self, ts, order, payload):
        self.events.append((ts, order, len(self.events), payload))

    def window_kind(self, ts):
        if self.spec.multiplex == "load":
            return Kind.LOAD
        if self.spec.multiplex == "store":
            return Kind.STORE
        return Kind.LOAD if (ts // self.spec.multiplex_window) % 2 == 0 else Kind.STORE

    def push_windows(self):
        spec = self.spec
        if spec.multiplex != "both":
            self.push(0, WINDOW, MultiplexWindow(self.window_kind(0)))
            return
        for m in itertools.count():
            ts = m * spec.multiplex_window
            if ts >= spec.end:
                break
            self.push(ts, WINDOW, MultiplexWindow(self.window_kind(ts)))

    def push_allocation(self, ts, obj):
        base = self.bases[obj.name]
        if obj.kind == "static":
            self.push(0, DECLARE, StaticObjectDecl(obj.name, base, obj.size))
            return
        if obj.kind == "wrapped":
            self.push(ts, DECLARE, WrappedRegionEvent(base, base + obj.size, obj.name))
            if not obj.chunks:
                return
        callsite = obj.callsite or obj.name
        for chunk_base, chunk_size in self.chunks(obj):
            self.push(ts, ALLOC, AllocEvent(chunk_base, chunk_size, callsite))

    def push_free(self, ts, obj):
        if obj.kind == "static" or (obj.kind == "wrapped" and not obj.chunks):
            return
        for chunk_base, _ in self.chunks(obj):
            self.push(ts, FREE, FreeEvent(chunk_base))

    def chunks(self, obj):
        base = self.bases[obj.name]
        if not obj.chunks:
            return [(base, obj.size)]
        stride = obj.size // obj.chunks
        return [(base + i * stride, obj.chunk_size) for i in range(obj.chunks)]

    def offset(self, pattern, size, elapsed, duration):
        element = ELEMENT if size >= ELEMENT else 1
        elements = size // element
        if pattern == "random":
            index = self.rng.randbelow(elements)
        else:
            index = min(elapsed * elements // duration, elements - 1)
            if pattern == "descending":
                index = elements - 1 - index
        return index * element

    def address(self, kernel, names, weights, pattern, elapsed):
        """sampled address and the label it refers to"""
        if not names or (kernel.stack_fraction and self.rng.random() < kernel.stack_fraction):
            slot = self.rng.randbelow(STACK_SPAN // ELEMENT)
            return self.spec.stack_floor + slot * ELEMENT, "stack"
        name = names[self.rng.pick(weights)] if len(names) > 1 else names[0]
        obj = self.objects[name]
        offset = self.offset(pattern, obj.size, elapsed, kernel.duration)
        return self.bases[name] + offset, name

    def record(self, name):
        self.references[name] = self.references.get(name, 0) + 1

    def run(self):
        spec = self.spec
        counters = [0] * len(CounterSet._fields)
        clocks = {Kind.LOAD: 0, Kind.STORE: 0}
        thresholds = {Kind.LOAD: self.load_period, Kind.STORE: self.store_period}
        periods = dict(thresholds)
        level_tables = [
            (tuple(kernel.levels), _cumulative(list(kernel.levels.values())))
            for kernel in spec.kernels
        ]

        for obj in spec.objects:
            if obj.kind == "static" or obj.alloc_iteration is None:
                self.push_allocation(0, obj)
        self.push_windows()

        t = spec.start
        for iteration in tqdm.tqdm(range(spec.iterations), desc="generating"):
            for obj in spec.objects:
                if obj.kind != "static" and obj.alloc_iteration == iteration:
                    self.push_allocation(t, obj)
            self.push(t, ENTER, RegionMarker(spec.region_id, Edge.ENTER))
            self.push(t, PSEUDO, MemorySample(
                Kind.LOAD, 0, CounterSet(*counters), (), latency_cycles=0, level=Level.L1))

            for kernel, (levels, cumulative) in zip(spec.kernels, level_tables):
                live = [name for name in kernel.objects if self.objects[name].live(iteration)]
                weights = None
                if len(live) > 1:
                    all_weights = kernel.object_weights or (1.0,) * len(kernel.objects)
                    weights = _cumulative([
                        weight for name, weight in zip(kernel.objects, all_weights) if name in live
                    ])
                store_name = kernel.store_object or (kernel.objects[0] if kernel.objects else None)
                store_live = [store_name] if store_name and self.objects[store_name].live(iteration) else []
                totals = (
                    kernel.instructions,
                    int(round(spec.freq_mhz * kernel.duration / 1000)),
                    int(round(kernel.instructions * kernel.l1d_miss)),
                    int(round(kernel.instructions * kernel.l2_miss)),
                    int(round(kernel.instructions * kernel.l3_miss)),
                    int(round(kernel.instructions * kernel.branch)),
                )
                counts = {Kind.LOAD: kernel.loads, Kind.STORE: kernel.stores}

                for kind in (Kind.LOAD, Kind.STORE):
                    count = counts[kind]
                    while count and thresholds[kind] <= clocks[kind] + count:
                        # the reference that overflows the counter, strictly inside the kernel
                        elapsed = ((thresholds[kind] - clocks[kind]) * kernel.duration - 1) // count
                        thresholds[kind] += periods[kind]
                        ts = t + elapsed
                        if self.window_kind(ts) is not kind:
                            continue
                        snapshot = CounterSet(*(
                            base + total * elapsed // kernel.duration
                            for base, total in zip(counters, totals)
                        ))
                        if kind is Kind.LOAD:
                            sample = self.load_sample(
                                kernel, live, weights, levels, cumulative, elapsed, snapshot)
                        else:
                            sample = self.store_sample(kernel, store_live, elapsed, snapshot)
                        self.push(ts, SAMPLE, sample)
                        self.sample_counts[kind] += 1
                    clocks[kind] += count

                counters = [base + total for base, total in zip(counters, totals)]
                t += kernel.duration

            self.push(t, EXIT, RegionMarker(spec.region_id, Edge.EXIT))
            for obj in spec.objects:
                if obj.free_iteration == iteration:
                    self.push_free(t, obj)

        self.events.sort(key=lambda event: event[:3])
        header = TraceHeader(process_id=spec.process_id, nominal_freq_mhz=spec.freq_mhz)
        trace = Trace(header, tuple(TraceEvent(ts, payload) for ts, _, _, payload in self.events))
        logger.info(
            "generated %s events, %s load and %s store samples",
            len(trace.events), self.sample_counts[Kind.LOAD], self.sample_counts[Kind.STORE]
        )
        return trace

    def load_sample(self, kernel, live, weights, levels, cumulative, elapsed, counters):
        address, name = self.address(kernel, live, weights, kernel.pattern, elapsed)
        level = levels[self.rng.pick(cumulative)]
        distribution = kernel.latency_distribution(level)
        if len(distribution) > 1:
            latency = distribution[self.rng.pick(_cumulative([w for _, w in distribution]))][0]
        else:
            latency = distribution[0][0]
        if kernel.latency_jitter:
            latency = max(0, latency + self.rng.randbelow(2 * kernel.latency_jitter + 1) - kernel.latency_jitter)
        self.record(name)
        return MemorySample(
            Kind.LOAD, address, counters, (kernel.frame,), latency_cycles=latency, level=level)

    def store_sample(self, kernel, live, elapsed, counters):
        pattern = kernel.store_pattern or kernel.pattern
        address, name = self.address(kernel, live, None, pattern, elapsed)
        hit = kernel.store_hit >= 1.0 or self.rng.random() < kernel.store_hit
        self.record(name)
        return MemorySample(Kind.STORE, address, counters, (kernel.frame,), store_l1_hit=hit)

    def truth(self):
        spec = self.spec
        labels = kernel_phases(spec.kernels)
        phases = [label for label, _ in itertools.groupby(labels)]
        by_phase = {label: [k for k, l in zip(spec.kernels, labels) if l == label] for label in phases}

        access = []
        rates = []
        for label in phases:
            kernels = by_phase[label]
            loads = sum(kernel.loads for kernel in kernels) or 1
            for level in Level:
                weight = sum(kernel.loads * kernel.levels.get(level, 0.0) for kernel in kernels)
                if weight == 0:
                    access.append(AccessRow(label, level, 0.0, None))
                    continue
                mean = sum(
                    kernel.loads * kernel.levels.get(level, 0.0) * kernel.mean_latency(level)
                    for kernel in kernels
                ) / weight
                modes = sorted({
                    value
                    for kernel in kernels if kernel.levels.get(level, 0.0) > 0
                    for value, w in kernel.latency_distribution(level) if w >= MODE_WEIGHT
                })
                access.append(AccessRow(label, level, weight / loads, mean, tuple(modes)))

            instructions = sum(kernel.instructions for kernel in kernels)
            duration = sum(kernel.duration for kernel in kernels)
            cycles = sum(int(round(spec.freq_mhz * kernel.duration / 1000)) for kernel in kernels)

            def per_instruction(key):
                total = sum(int(round(kernel.instructions * getattr(kernel, key))) for kernel in kernels)
                return total / instructions if instructions else 0.0

            rates.append(RateTruth(
                label, kernels[0].routine,
                instructions / duration * 1000,
                per_instruction("l1d_miss"),
                per_instruction("l2_miss"),
                per_instruction("l3_miss"),
                per_instruction("branch"),
                instructions / cycles if cycles else 0.0,
                duration / 1e6
            ))

        patterns = []
        for kernel, label in zip(spec.kernels, labels):
            for name in kernel.objects:
                patterns.append(PatternTruth(label, kernel.routine, self.objects[name].label, "load", kernel.pattern))
            store_name = kernel.store_object or (kernel.objects[0] if kernel.objects else None)
            if store_name and kernel.stores:
                patterns.append(PatternTruth(
                    label, kernel.routine, self.objects[store_name].label, "store",
                    kernel.store_pattern or kernel.pattern
                ))

        totals = dict(
            iterations=spec.iterations,
            instructions=sum(kernel.instructions for kernel in spec.kernels) * spec.iterations,
            loads=sum(kernel.loads for kernel in spec.kernels) * spec.iterations,
            stores=sum(kernel.stores for kernel in spec.kernels) * spec.iterations,
            load_samples=self.sample_counts[Kind.LOAD],
            store_samples=self.sample_counts[Kind.STORE],
            load_period=self.load_period,
            store_period=self.store_period,
        )

        total = sum(self.references.values())
        ranking = []
        ordered = sorted(
            ((count, name) for name, count in self.references.items() if name != "stack"),
            key=lambda item: (-item[0], item[1])
        )
        for rank, (count, name) in enumerate(ordered, start=1):
            obj = self.objects[name]
            ranking.append(RankRow(rank, obj.label, obj.size, count / total, count))
        if self.references.get("stack"):
            count = self.references["stack"]
            ranking.append(RankRow(None, "stack", None, count / total, count))

        return GroundTruth(access, patterns, totals, rates, ranking, labels)


def generate(spec, seed=None):
    """generate (trace, ground truth), deterministic in (spec, seed); seed defaults to the spec seed"""
    spec.validate()
    seed = spec.seed if seed is None else seed
    if not 0 <= seed <= MASK64:
        raise SpecError("seed must be an unsigned 64 bit integer")
    generator = _Generator(spec, seed)
    trace = generator.run()
    return trace, generator.truth()


TRUTH_TOPICS = ("access", "patterns", "totals", "rates", "ranking")


def truth_name(path, topic):
    """<stem>_truth_<topic>.csv next to path"""
    path = pathlib.Path(path)
    return path.with_name(path.stem + "_truth_" + topic).with_suffix(".csv")


def truth_frames(gt):
    return dict(
        access=tables.access_frame(gt.access),
        patterns=pd.DataFrame.from_records(
            [vars(row) for row in gt.patterns],
            columns=["phase", "routine", "object", "kind", "pattern"]
        ),
        totals=pd.DataFrame.from_records(
            list(gt.totals.items()), columns=["quantity", "value"]
        ),
        rates=pd.DataFrame.from_records(
            [vars(row) for row in gt.rates],
            columns=list(RateTruth.__dataclass_fields__)
        ),
        ranking=tables.ranking_frame(gt.ranking),
    )


def emit_ground_truth(gt, path):
    """write the ground truth tables next to the trace at path, return the written paths"""
    paths = []
    frames = truth_frames(gt)
    for topic in TRUTH_TOPICS:
        target = truth_name(path, topic)
        tables.write_csv(frames[topic], target)
        paths.append(target)
    logger.info("ground truth written to %s", ", ".join(str(p) for p in paths))
    return paths
