"""
Quantitative products of a folded region: per phase classification of the
load references over the memory hierarchy (shares, mean costs, latency
modes), access patterns per (object, phase), bandwidth of linear
traversals and multiplex aware extrapolation of the sampled counts.
"""
import bisect
import enum
import logging
import typing
from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.stats

from .objects import STACK_ID, UNNAMED_ID, rank_resolved
from .trace import Kind, Level, MultiplexWindow

logger = logging.getLogger(__name__)

LEVELS = tuple(Level)


class AnalysisError(ValueError):
    pass


class PatternClass(enum.Enum):
    ASCENDING = "ascending"
    DESCENDING = "descending"
    RANDOM = "random"
    INSUFFICIENT = "insufficient"


@dataclass(frozen=True)
class AccessRow:
    phase: str
    level: Level
    share: float
    mean_cost: typing.Optional[float]
    modes: typing.Tuple[int, ...] = ()
    count: int = 0


@dataclass(frozen=True)
class PatternResult:
    object_id: typing.Optional[int]
    phase: typing.Optional[str]
    pattern: PatternClass
    # bytes per unit of normalized time
    slope: float
    fit_r2: float
    coverage: float
    count: int = 0


@dataclass(frozen=True)
class BandwidthEstimate:
    object_id: typing.Optional[int]
    phase: typing.Optional[str]
    bytes_traversed: int
    duration: float
    # MB/s, 1 MB = 10^6 bytes
    bandwidth: float


def folded_frame(folded, object_map=None):
    """one row per memory sample of the folded region (pseudo samples excluded)"""
    samples = folded.memory_samples
    frames = [sample.payload.frame for sample in samples]
    frame = pd.DataFrame(dict(
        norm_time=np.array([sample.norm_time for sample in samples], dtype=float),
        instance=np.array([sample.source_instance for sample in samples], dtype=np.int64),
        timestamp=np.array([sample.timestamp for sample in samples], dtype=np.int64),
        kind=[sample.payload.kind.name.lower() for sample in samples],
        address=np.array([sample.payload.address for sample in samples], dtype=np.uint64),
        latency=np.array([
            np.nan if sample.payload.latency_cycles is None else sample.payload.latency_cycles
            for sample in samples
        ], dtype=float),
        level=[sample.payload.level.name if sample.payload.level else "" for sample in samples],
        hit=[bool(sample.payload.store_l1_hit) for sample in samples],
        routine=[frame.routine if frame else "" for frame in frames],
        file=[frame.file if frame else "" for frame in frames],
        line=np.array([frame.line if frame else 0 for frame in frames], dtype=np.int64),
    ))
    labels = [phase.label for phase in folded.phases]
    if labels:
        starts = np.array([phase.start_frac for phase in folded.phases])
        index = np.searchsorted(starts, frame["norm_time"].values, side="right") - 1
        frame["phase"] = [labels[i] if i >= 0 else "" for i in index]
    else:
        frame["phase"] = ""
    if object_map is not None:
        ids, offsets = object_map.resolve_samples(frame["address"].values, frame["timestamp"].values)
        frame["object_id"] = ids
        frame["offset"] = offsets
    else:
        frame["object_id"] = UNNAMED_ID
        frame["offset"] = np.zeros(len(frame), dtype=np.uint64)
    return frame


def detect_latency_modes(latencies, bin_width=10, peak_share=0.15):
    """modes of a latency population from the peaks of a fixed width histogram"""
    latencies = np.asarray(latencies, dtype=float)
    if latencies.size == 0:
        raise AnalysisError("no latencies to detect modes from")
    lo = np.floor(latencies.min() / bin_width) * bin_width
    index = ((latencies - lo) // bin_width).astype(int)
    counts = np.bincount(index)
    n_bins = len(counts)

    def is_peak(i):
        left = counts[i - 1] if i > 0 else -1
        right = counts[i + 1] if i + 1 < n_bins else -1
        return counts[i] > 0 and counts[i] >= left and counts[i] >= right

    candidates = sorted(
        (i for i in range(n_bins) if is_peak(i)),
        key=lambda i: (-counts[i], i)
    )
    claimed = np.zeros(n_bins, dtype=bool)
    modes = set()
    for i in candidates:
        if claimed[i]:
            continue
        lo_bin, hi_bin = max(i - 2, 0), min(i + 3, n_bins)
        merged = np.zeros(n_bins, dtype=bool)
        merged[lo_bin:hi_bin] = True
        merged &= ~claimed
        if counts[merged].sum() < peak_share * latencies.size:
            continue
        claimed |= merged
        inside = latencies[merged[index]]
        modes.add(int(np.floor(inside.mean() + 0.5)))
    return sorted(modes)


def classify_accesses(folded, object_map=None, object_id=None):
    """per phase share, mean cost and latency modes of the load references per hierarchy level"""
    frame = folded_frame(folded, object_map)
    loads = frame[frame["kind"] == "load"]
    if object_id is not None:
        if object_map is None:
            raise AnalysisError("selecting an object needs the object map")
        loads = loads[loads["object_id"] == object_id]
    rows = []
    for phase in folded.phases:
        selected = loads[loads["phase"] == phase.label]
        total = len(selected)
        if total == 0:
            logger.warning("phase %s has no load samples", phase.label)
            rows.extend(AccessRow(phase.label, level, 0.0, None) for level in LEVELS)
            continue
        by_level = dict(tuple(selected.groupby("level")["latency"]))
        for level in LEVELS:
            latencies = by_level.get(level.name)
            if latencies is None or latencies.empty:
                rows.append(AccessRow(phase.label, level, 0.0, None))
                continue
            rows.append(AccessRow(
                phase.label,
                level,
                len(latencies) / total,
                float(latencies.mean()),
                tuple(detect_latency_modes(latencies.values)),
                len(latencies)
            ))
    return rows


def store_hit_ratios(folded):
    """fraction of store samples per phase that hit L1"""
    frame = folded_frame(folded)
    stores = frame[frame["kind"] == "store"]
    ratios = {}
    for phase in folded.phases:
        selected = stores[stores["phase"] == phase.label]
        ratios[phase.label] = float(selected["hit"].mean()) if len(selected) else None
    return ratios


def detect_access_pattern(norm_times, offsets, size, object_id=None, phase=None, min_samples=30):
    """classify the byte offsets of one object against normalized time by a least squares fit"""
    x = np.asarray(norm_times, dtype=float)
    y = np.asarray(offsets, dtype=float)
    count = len(x)
    coverage = float((y.max() - y.min()) / size) if count and size else 0.0
    insufficient = PatternResult(object_id, phase, PatternClass.INSUFFICIENT, 0.0, 0.0, coverage, count)
    if count < min_samples or np.ptp(x) == 0 or np.ptp(y) == 0:
        return insufficient
    fit = scipy.stats.linregress(x, y)
    r2 = float(fit.rvalue ** 2)
    slope = float(fit.slope)
    if r2 >= 0.8 and slope > 0:
        pattern = PatternClass.ASCENDING
    elif r2 >= 0.8 and slope < 0:
        pattern = PatternClass.DESCENDING
    elif r2 < 0.3:
        pattern = PatternClass.RANDOM
    else:
        pattern = PatternClass.INSUFFICIENT
    return PatternResult(object_id, phase, pattern, slope, r2, coverage, count)


def detect_patterns(folded, object_map, min_samples=30):
    """access pattern of every referenced object in every phase"""
    frame = folded_frame(folded, object_map)
    frame = frame[frame["object_id"] > 0]
    results = []
    for (phase, object_id), group in frame.groupby(["phase", "object_id"], sort=True):
        obj = object_map[int(object_id)]
        results.append(detect_access_pattern(
            group["norm_time"].values,
            group["offset"].values.astype(float),
            obj.size,
            object_id=int(object_id),
            phase=phase,
            min_samples=min_samples
        ))
    return results


def estimate_bandwidth(pattern, size, duration, min_coverage=0.9):
    """bandwidth of a linear traversal, assuming the whole object is traversed; None if not applicable"""
    if pattern.pattern not in (PatternClass.ASCENDING, PatternClass.DESCENDING):
        return None
    if pattern.coverage < min_coverage or duration <= 0:
        return None
    size = getattr(size, "size", size)
    # bytes per ns to MB/s
    bandwidth = size * 1e3 / duration
    return BandwidthEstimate(pattern.object_id, pattern.phase, size, duration, bandwidth)


def estimate_bandwidths(folded, object_map, patterns):
    """bandwidth estimates for the linear patterns, with phase duration = width x median instance"""
    phases = {phase.label: phase for phase in folded.phases}
    median = folded.median_duration
    estimates = []
    for pattern in patterns:
        phase = phases.get(pattern.phase)
        if phase is None or pattern.object_id is None:
            continue
        estimate = estimate_bandwidth(pattern, object_map[pattern.object_id].size, phase.width * median)
        if estimate is not None:
            estimates.append(estimate)
    return estimates


def _spans(spans):
    spans = list(spans)
    if spans and not isinstance(spans[0], (tuple, list)):
        spans = [tuple(spans)]
    return [(int(start), int(end)) for start, end in spans]


def _windows(windows):
    result = []
    for ts, window in windows:
        result.append((ts, getattr(window, "kind", window)))
    return result


def duty_cycle(windows, spans, kind):
    """fraction of the span time in which windows of kind were active"""
    windows = _windows(windows)
    spans = _spans(spans)
    total = sum(end - start for start, end in spans)
    if total <= 0:
        raise AnalysisError("empty region span")
    active = 0
    for i, (ts, window_kind) in enumerate(windows):
        if window_kind is not kind:
            continue
        stop = windows[i + 1][0] if i + 1 < len(windows) else float("inf")
        for start, end in spans:
            active += max(0, min(stop, end) - max(ts, start))
    return active / total


def extrapolate_counts(samples, load_period, store_period, windows, spans):
    """estimate the true load and store counts from sample counts, periods and window duty cycles"""
    windows = _windows(windows)
    spans = _spans(spans)
    window_ts = [ts for ts, _ in windows]
    starts = [start for start, _ in spans]
    counts = {Kind.LOAD: 0, Kind.STORE: 0}
    for ts, sample in samples:
        if sample.is_pseudo:
            continue
        i = bisect.bisect_right(starts, ts) - 1
        if i < 0 or ts > spans[i][1]:
            continue
        j = bisect.bisect_right(window_ts, ts) - 1
        if j < 0:
            raise AnalysisError("{} sample at {} before any multiplex window".format(
                sample.kind.name.lower(), ts))
        if windows[j][1] is not sample.kind:
            raise AnalysisError("inconsistent windows: {} sample at {} inside a {} window".format(
                sample.kind.name.lower(), ts, windows[j][1].name.lower()))
        counts[sample.kind] += 1

    estimates = []
    for kind, period in ((Kind.LOAD, load_period), (Kind.STORE, store_period)):
        duty = duty_cycle(windows, spans, kind)
        if duty == 0:
            if counts[kind]:
                raise AnalysisError("{} samples present but no active {} window".format(
                    kind.name.lower(), kind.name.lower()))
            estimates.append(0.0)
            continue
        estimates.append(counts[kind] * period / duty)
        logger.debug("%s: %s samples, duty %.3f", kind.name.lower(), counts[kind], duty)
    return tuple(estimates)


def summarize_ids(ids):
    """count of object, stack and unnamed references"""
    ids = np.asarray(ids)
    return dict(
        objects=int((ids > 0).sum()),
        stack=int((ids == STACK_ID).sum()),
        unnamed=int((ids == UNNAMED_ID).sum())
    )


@dataclass(eq=False)
class RegionAnalysis:
    """everything the report needs about one folded region"""
    region_id: int
    phases: tuple
    median_duration: float
    access: typing.List[AccessRow]
    ranking: list
    patterns: typing.List[PatternResult]
    bandwidths: typing.List[BandwidthEstimate]
    store_hits: typing.Dict[str, typing.Optional[float]]
    references: typing.Dict[str, int]
    # (loads, stores), None without sampling periods
    extrapolated: typing.Optional[typing.Tuple[float, float]] = None


def analyze_region(folded, object_map, trace=None, load_period=None, store_period=None):
    """run the analyses of a folded region; extrapolates when the trace and both periods are given"""
    frame = folded_frame(folded, object_map)
    ranking = rank_resolved(object_map, frame["object_id"].values)
    patterns = detect_patterns(folded, object_map)
    extrapolated = None
    if trace is not None and load_period and store_period:
        windows = trace.of_type(MultiplexWindow)
        if windows:
            spans = [(instance.enter_ts, instance.exit_ts) for instance in folded.instances]
            extrapolated = extrapolate_counts(trace.samples(), load_period, store_period, windows, spans)
        else:
            logger.warning("trace has no multiplex windows, no extrapolation")
    return RegionAnalysis(
        folded.region_id,
        tuple(folded.phases),
        folded.median_duration,
        classify_accesses(folded, object_map),
        ranking,
        patterns,
        estimate_bandwidths(folded, object_map, patterns),
        store_hit_ratios(folded),
        summarize_ids(frame["object_id"].values),
        extrapolated
    )
