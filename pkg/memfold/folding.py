"""
Folding of samples from the instances of an instrumented region into one
synthetic iteration.

Every sample inside a (retained) instance gets a normalized time in
[0, 1]. Counter deltas between consecutive samples of an instance are
binned into metric curves, innermost frames into a source profile, and
the profile is cut into phases.
"""
import bisect
import collections
import logging
import string
import typing
from dataclasses import dataclass

import numpy as np
import pandas as pd
import tqdm

from .trace import CounterSet, Edge, RegionMarker

logger = logging.getLogger(__name__)

DEFAULT_BINS = 100
DEFAULT_TOLERANCE = 0.2
DEFAULT_MIN_WIDTH = 0.03
DEFAULT_WINDOW = 5
MIN_BINS = 10


class FoldingError(ValueError):
    pass


@dataclass(frozen=True)
class RegionInstance:
    index: int
    enter_ts: int
    exit_ts: int

    @property
    def duration(self):
        return self.exit_ts - self.enter_ts


@dataclass(frozen=True)
class FoldedSample:
    norm_time: float
    source_instance: int
    timestamp: int
    payload: typing.Any
    # None when the instance has no counter snapshot at its enter
    counter_deltas: typing.Optional[CounterSet] = None
    delta_time: typing.Optional[int] = None


@dataclass(frozen=True, eq=False)
class MetricCurves:
    bins: int
    mips: np.ndarray
    l1d_per_instruction: np.ndarray
    l2_per_instruction: np.ndarray
    l3_per_instruction: np.ndarray
    branch_per_instruction: np.ndarray
    ipc: np.ndarray
    support: np.ndarray

    RATES = (
        "mips", "l1d_per_instruction", "l2_per_instruction",
        "l3_per_instruction", "branch_per_instruction", "ipc"
    )

    @property
    def empty(self):
        return self.support == 0

    @property
    def centers(self):
        return (np.arange(self.bins) + 0.5) / self.bins

    def frame(self):
        data = collections.OrderedDict(norm_time=self.centers)
        for name in self.RATES:
            data[name] = getattr(self, name)
        data["support"] = self.support
        return pd.DataFrame(data)


@dataclass(frozen=True, eq=False)
class SourceProfile:
    bins: int
    # modal innermost frame per bin, None for bins without samples
    dominant: typing.Tuple[typing.Any, ...]
    norm_times: np.ndarray
    frames: typing.Tuple[typing.Any, ...]


@dataclass(frozen=True)
class Phase:
    label: str
    start_frac: float
    end_frac: float
    dominant_routine: str
    mocl: typing.Tuple[str, int]
    # top level label (A, B, ...); equals label unless the phase was split
    group: str = ""

    @property
    def width(self):
        return self.end_frac - self.start_frac

    def contains(self, norm_time):
        if self.end_frac >= 1.0:
            return self.start_frac <= norm_time <= 1.0
        return self.start_frac <= norm_time < self.end_frac


@dataclass(frozen=True)
class FoldedRegion:
    region_id: int
    instances: typing.Tuple[RegionInstance, ...]
    retained: typing.Tuple[RegionInstance, ...]
    samples: typing.Tuple[FoldedSample, ...]
    curves: MetricCurves
    profile: SourceProfile
    phases: typing.Tuple[Phase, ...]

    @property
    def median_duration(self):
        return float(np.median([instance.duration for instance in self.retained]))

    @property
    def memory_samples(self):
        """folded samples without counter pseudo samples"""
        return [sample for sample in self.samples if not sample.payload.is_pseudo]

    def phase_of(self, norm_time):
        for phase in self.phases:
            if phase.contains(norm_time):
                return phase
        return None


def detect_instances(trace, region_id):
    """pair the enter/exit markers of a region into instances"""
    instances = []
    enter = None
    for ts, marker in trace.of_type(RegionMarker):
        if marker.region_id != region_id:
            continue
        if marker.edge is Edge.ENTER:
            if enter is not None:
                raise FoldingError("unmatched enter of region {} at timestamp {}".format(region_id, enter))
            enter = ts
        else:
            if enter is None:
                raise FoldingError("unmatched exit of region {} at timestamp {}".format(region_id, ts))
            if ts > enter:
                instances.append(RegionInstance(len(instances), enter, ts))
            else:
                logger.warning("skipping empty instance of region %s at %s", region_id, ts)
            enter = None
    if enter is not None:
        raise FoldingError("unmatched enter of region {} at timestamp {}".format(region_id, enter))
    logger.debug("region %s: %s instances", region_id, len(instances))
    return instances


def filter_instances(instances, tolerance=DEFAULT_TOLERANCE):
    """keep the instances whose duration is within tolerance of the median"""
    if not instances:
        raise FoldingError("no instances to filter")
    durations = np.array([instance.duration for instance in instances], dtype=float)
    median = np.median(durations)
    lower, upper = (1 - tolerance) * median, (1 + tolerance) * median
    retained = [
        instance
        for instance, duration in zip(instances, durations)
        if lower <= duration <= upper
    ]
    if not retained:
        closest = int(np.argmin(np.abs(durations - median)))
        retained = [instances[closest]]
    dropped = len(instances) - len(retained)
    if dropped:
        logger.info(
            "dropped %s of %s instances outside [%.1f, %.1f] ns",
            dropped, len(instances), lower, upper
        )
    return retained


def fold_samples(retained, samples):
    """project (timestamp, MemorySample) pairs on the normalized time of their instance"""
    enters = [instance.enter_ts for instance in retained]
    previous = {}
    folded = []
    for order, (ts, sample) in enumerate(tqdm.tqdm(samples, desc="folding")):
        i = bisect.bisect_right(enters, ts) - 1
        if i < 0 or ts > retained[i].exit_ts:
            continue
        instance = retained[i]
        last = previous.get(instance.index)
        if last is not None:
            last_ts, last_counters = last
            deltas = sample.counters.delta(last_counters)
            if any(value < 0 for value in deltas):
                raise FoldingError("counter regression at timestamp {}".format(ts))
            delta_time = ts - last_ts
        elif ts == instance.enter_ts:
            deltas = CounterSet()
            delta_time = 0
        else:
            deltas = None
            delta_time = None
        previous[instance.index] = (ts, sample.counters)
        norm_time = (ts - instance.enter_ts) / instance.duration
        folded.append((norm_time, instance.index, order, FoldedSample(
            norm_time, instance.index, ts, sample, deltas, delta_time
        )))
    folded.sort(key=lambda item: item[:3])
    return [item[3] for item in folded]


def bin_index(norm_times, bins):
    """bin of each normalized time, 1.0 falls in the last bin"""
    index = np.floor(np.asarray(norm_times, dtype=float) * bins).astype(int)
    return np.clip(index, 0, bins - 1)


def smooth(values, empty, window=DEFAULT_WINDOW):
    """centered moving average over the non empty bins of the window"""
    half = window // 2
    result = np.full(values.shape, np.nan)
    for i in np.flatnonzero(~empty):
        lo, hi = max(i - half, 0), min(i + half + 1, len(values))
        neighbours = values[lo:hi][~empty[lo:hi]]
        result[i] = neighbours.mean()
    return result


def _ratio(numerator, denominator):
    out = np.zeros(numerator.shape)
    np.divide(numerator, denominator, out=out, where=denominator > 0)
    return out


def fold_counters(folded, bins=DEFAULT_BINS, window=DEFAULT_WINDOW):
    """reconstruct metric rate curves from the folded counter deltas"""
    if bins < MIN_BINS:
        raise FoldingError("need at least {} bins, got {}".format(MIN_BINS, bins))
    usable = [
        sample for sample in folded
        if sample.counter_deltas is not None and sample.delta_time
    ]
    index = bin_index([sample.norm_time for sample in usable], bins)
    deltas = np.array([sample.counter_deltas for sample in usable], dtype=float).reshape(-1, 6)
    delta_time = np.array([sample.delta_time for sample in usable], dtype=float)

    sums = np.zeros((bins, 6))
    np.add.at(sums, index, deltas)
    time = np.zeros(bins)
    np.add.at(time, index, delta_time)
    support = np.bincount(index, minlength=bins)
    empty = support == 0

    instructions, cycles, l1d, l2, l3, branch = sums.T
    raw = dict(
        # instructions per microsecond
        mips=_ratio(instructions * 1000.0, time),
        l1d_per_instruction=_ratio(l1d, instructions),
        l2_per_instruction=_ratio(l2, instructions),
        l3_per_instruction=_ratio(l3, instructions),
        branch_per_instruction=_ratio(branch, instructions),
        ipc=_ratio(instructions, cycles)
    )
    curves = {name: smooth(values, empty, window) for name, values in raw.items()}
    if empty.any():
        logger.debug("%s of %s bins without counter support", int(empty.sum()), bins)
    return MetricCurves(bins=bins, support=support, **curves)


def _modal(counter):
    """most common frame, ties to the smallest (file, line, routine)"""
    frame, _ = min(
        counter.items(),
        key=lambda item: (-item[1], item[0].file, item[0].line, item[0].routine)
    )
    return frame


def fold_source_profile(folded, bins=DEFAULT_BINS):
    """per bin modal innermost frame plus the (norm_time, frame) scatter"""
    scatter = [
        sample for sample in folded
        if not sample.payload.is_pseudo and sample.payload.callstack
    ]
    norm_times = np.array([sample.norm_time for sample in scatter], dtype=float)
    frames = tuple(sample.payload.frame for sample in scatter)
    counters = [collections.Counter() for _ in range(bins)]
    for i, frame in zip(bin_index(norm_times, bins), frames):
        counters[i][frame] += 1
    dominant = tuple(_modal(counter) if counter else None for counter in counters)
    return SourceProfile(bins, dominant, norm_times, frames)


def phase_labels(count):
    """A, B, ..., Z, AA, AB, ..."""
    labels = []
    for i in range(count):
        label = ""
        i += 1
        while i:
            i, rem = divmod(i - 1, 26)
            label = string.ascii_uppercase[rem] + label
        labels.append(label)
    return labels


def _runs(keys):
    """[key, start, stop) runs of equal consecutive keys"""
    runs = []
    for i, key in enumerate(keys):
        if runs and runs[-1][0] == key:
            runs[-1][2] = i + 1
        else:
            runs.append([key, i, i + 1])
    return runs


def _merge_narrow(runs, min_bins):
    """merge runs narrower than min_bins into their predecessor (the first into its successor)"""
    runs = [list(run) for run in runs]
    while len(runs) > 1:
        narrow = [i for i, run in enumerate(runs) if run[2] - run[1] < min_bins]
        if not narrow:
            break
        i = narrow[0]
        if i == 0:
            runs[1][1] = runs[0][1]
        else:
            runs[i - 1][2] = runs[i][2]
        del runs[i]
        # coalesce neighbours that now share a key
        merged = [runs[0]]
        for run in runs[1:]:
            if run[0] == merged[-1][0]:
                merged[-1][2] = run[2]
            else:
                merged.append(run)
        runs = merged
    return runs


def _fill(keys):
    """replace None by the previous key (leading None by the first key)"""
    filled = []
    last = next((key for key in keys if key is not None), None)
    for key in keys:
        if key is not None:
            last = key
        filled.append(last)
    return filled


def _mocl(profile, routine, start, stop):
    lo, hi = start / profile.bins, stop / profile.bins
    counter = collections.Counter()
    for norm_time, frame in zip(profile.norm_times, profile.frames):
        inside = lo <= norm_time < hi or (hi >= 1.0 and norm_time == 1.0)
        if inside and frame.routine == routine:
            counter[(frame.file, frame.line)] += 1
    if not counter:
        frames = [frame for frame in profile.dominant[start:stop] if frame is not None]
        counter.update((frame.file, frame.line) for frame in frames if frame.routine == routine)
    if not counter:
        return ("", 0)
    return min(counter.items(), key=lambda item: (-item[1], item[0]))[0]


def detect_phases(profile, min_width=DEFAULT_MIN_WIDTH):
    """cut the source profile in phases of one dominant routine, split on hot line changes"""
    bins = profile.bins
    routines = _fill([frame.routine if frame else None for frame in profile.dominant])
    if not routines or routines[0] is None:
        logger.warning("source profile has no samples, no phases")
        return []
    min_bins = min_width * bins - 1e-9
    runs = _merge_narrow(_runs(routines), min_bins)

    phases = []
    for label, (routine, start, stop) in zip(phase_labels(len(runs)), runs):
        lines = _fill([
            (frame.file, frame.line) if frame is not None and frame.routine == routine else None
            for frame in profile.dominant[start:stop]
        ])
        sub_runs = _runs(lines) if lines[0] is not None else [[None, 0, stop - start]]
        sub_runs = _merge_narrow(sub_runs, min_bins)
        if len(sub_runs) == 1:
            phases.append(Phase(
                label, start / bins, stop / bins, routine,
                _mocl(profile, routine, start, stop), group=label
            ))
            continue
        for j, (_, sub_start, sub_stop) in enumerate(sub_runs, start=1):
            lo, hi = start + sub_start, start + sub_stop
            phases.append(Phase(
                "{}{}".format(label.lower(), j), lo / bins, hi / bins, routine,
                _mocl(profile, routine, lo, hi), group=label
            ))
    logger.info("detected %s phases: %s", len(phases), ", ".join(phase.label for phase in phases))
    return phases


def fold_region(
        trace,
        region_id,
        bins=DEFAULT_BINS,
        tolerance=DEFAULT_TOLERANCE,
        min_width=DEFAULT_MIN_WIDTH,
        window=DEFAULT_WINDOW
):
    """run the folding stages for one region of the trace"""
    instances = detect_instances(trace, region_id)
    if not instances:
        raise FoldingError("no region markers for region {}".format(region_id))
    retained = filter_instances(instances, tolerance)
    folded = fold_samples(retained, trace.samples())
    if not any(not sample.payload.is_pseudo for sample in folded):
        logger.warning("region %s has no memory samples", region_id)
    curves = fold_counters(folded, bins, window)
    profile = fold_source_profile(folded, bins)
    phases = detect_phases(profile, min_width)
    logger.info(
        "region %s: folded %s samples from %s of %s instances",
        region_id, len(folded), len(retained), len(instances)
    )
    return FoldedRegion(
        region_id,
        tuple(instances),
        tuple(retained),
        tuple(folded),
        curves,
        profile,
        tuple(phases)
    )
