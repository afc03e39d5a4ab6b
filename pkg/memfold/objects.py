"""
Time aware map of the process address space.

Static declarations, allocations above the size threshold and analyst
wrapped regions become data objects with a lifetime. Sampled addresses
resolve to the object that was live at the sample time, to the stack
(addresses above the stack floor) or stay unnamed.
"""
import enum
import logging
import typing
from dataclasses import dataclass, field

import numpy as np

from .trace import AllocEvent, FreeEvent, StaticObjectDecl, WrappedRegionEvent

logger = logging.getLogger(__name__)

# 32 KByte, the threshold of the reference experiments (1 MB is the collector default)
DEFAULT_THRESHOLD = 32768
# open ended lifetimes
FOREVER = np.iinfo(np.int64).max

# resolved id codes used in vectorised resolution
UNNAMED_ID = -1
STACK_ID = 0


class ObjectMapError(ValueError):
    pass


class ObjectKind(enum.Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"
    WRAPPED = "wrapped"
    STACK = "stack"


class RefKind(enum.Enum):
    OBJECT = "object"
    STACK = "stack"
    UNNAMED = "unnamed"


@dataclass(frozen=True)
class DataObject:
    id: int
    kind: ObjectKind
    label: str
    base: int
    size: int
    t_start: int = 0
    t_end: int = FOREVER

    @property
    def end(self):
        return self.base + self.size

    def contains(self, address, timestamp):
        return self.base <= address < self.end and self.t_start <= timestamp < self.t_end

    def overlaps(self, other):
        return (
            self.base < other.end and other.base < self.end and
            self.t_start < other.t_end and other.t_start < self.t_end
        )

    def __str__(self):
        return "{} {} [{:#x}, {:#x}) @ [{}, {})".format(
            self.kind.value, self.label, self.base, self.end, self.t_start,
            "inf" if self.t_end == FOREVER else self.t_end
        )


@dataclass(frozen=True)
class ObjectRef:
    kind: RefKind
    object_id: typing.Optional[int] = None
    offset: typing.Optional[int] = None


STACK_REF = ObjectRef(RefKind.STACK)
UNNAMED_REF = ObjectRef(RefKind.UNNAMED)


@dataclass(frozen=True)
class ObjectMap:
    objects: typing.Tuple[DataObject, ...]
    threshold: int = DEFAULT_THRESHOLD
    stack_floor: typing.Optional[int] = None
    # lookup arrays, derived from objects
    _arrays: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arrays = dict(
            ids=np.array([obj.id for obj in self.objects], dtype=np.int64),
            bases=np.array([obj.base for obj in self.objects], dtype=np.uint64),
            ends=np.array([obj.end for obj in self.objects], dtype=np.uint64),
            starts=np.array([obj.t_start for obj in self.objects], dtype=np.int64),
            stops=np.array([obj.t_end for obj in self.objects], dtype=np.int64),
            by_id={obj.id: obj for obj in self.objects}
        )
        object.__setattr__(self, "_arrays", arrays)

    def __getitem__(self, object_id):
        return self._arrays["by_id"][object_id]

    def __len__(self):
        return len(self.objects)

    def resolve(self, address, timestamp):
        return resolve(self, address, timestamp)

    def resolve_samples(self, addresses, timestamps):
        """Vectorised resolve.

        Returns (ids, offsets): ids hold the object id, ``STACK_ID`` or
        ``UNNAMED_ID``; offsets are zero outside objects.
        """
        addresses = np.asarray(addresses, dtype=np.uint64)
        timestamps = np.asarray(timestamps, dtype=np.int64)
        ids = np.full(addresses.shape, UNNAMED_ID, dtype=np.int64)
        offsets = np.zeros(addresses.shape, dtype=np.uint64)
        arrays = self._arrays
        for i in range(len(self.objects)):
            base = arrays["bases"][i]
            mask = (
                (addresses >= base) &
                (addresses < arrays["ends"][i]) &
                (timestamps >= arrays["starts"][i]) &
                (timestamps < arrays["stops"][i])
            )
            ids[mask] = arrays["ids"][i]
            offsets[mask] = addresses[mask] - base
        if self.stack_floor is not None:
            stack = (ids == UNNAMED_ID) & (addresses >= np.uint64(self.stack_floor))
            ids[stack] = STACK_ID
        return ids, offsets


def resolve(object_map, address, timestamp):
    """resolve one (address, timestamp) to an object reference"""
    arrays = object_map._arrays
    a = np.uint64(address)
    mask = (
        (arrays["bases"] <= a) &
        (a < arrays["ends"]) &
        (arrays["starts"] <= timestamp) &
        (timestamp < arrays["stops"])
    )
    hits = np.flatnonzero(mask)
    if len(hits):
        obj = object_map.objects[hits[0]]
        return ObjectRef(RefKind.OBJECT, obj.id, address - obj.base)
    if object_map.stack_floor is not None and address >= object_map.stack_floor:
        return STACK_REF
    return UNNAMED_REF


def _check_overlaps(objects):
    ordered = sorted(objects, key=lambda obj: (obj.base, obj.t_start))
    for i, obj in enumerate(ordered):
        for other in ordered[i + 1:]:
            if other.base >= obj.end:
                break
            if obj.overlaps(other):
                raise ObjectMapError("overlapping live objects: {} and {}".format(obj, other))


def build_object_map(trace, threshold=DEFAULT_THRESHOLD, stack_floor=None):
    """build the time aware object map of a trace"""
    if threshold <= 0:
        raise ObjectMapError("threshold must be positive, got {}".format(threshold))

    statics = []
    wraps = []
    # allocation records [ts, base, size, callsite, t_end]
    allocations = []
    live = {}
    for ts, payload in ((event.timestamp, event.payload) for event in trace.events):
        if isinstance(payload, StaticObjectDecl):
            statics.append(payload)
        elif isinstance(payload, WrappedRegionEvent):
            wraps.append((ts, payload))
        elif isinstance(payload, AllocEvent):
            record = [ts, payload.base_address, payload.size, payload.callsite, FOREVER]
            allocations.append(record)
            live[payload.base_address] = record
        elif isinstance(payload, FreeEvent):
            record = live.pop(payload.base_address, None)
            if record is not None:
                record[4] = ts
                continue
            for other in live.values():
                if other[1] < payload.base_address < other[1] + other[2] and other[2] >= threshold:
                    raise ObjectMapError(
                        "partial free of {:#x} inside allocation at {:#x} ({})".format(
                            payload.base_address, other[1], other[3])
                    )
            logger.debug("free of untracked address %#x at %s", payload.base_address, ts)

    ordered_wraps = sorted(wraps, key=lambda item: item[1].begin_address)
    for (_, a), (_, b) in zip(ordered_wraps, ordered_wraps[1:]):
        if b.begin_address < a.end_address:
            raise ObjectMapError("overlapping wrapped regions: {} and {}".format(a.label, b.label))

    objects = []
    next_id = 1
    for decl in statics:
        objects.append(DataObject(next_id, ObjectKind.STATIC, decl.name, decl.base_address, decl.size))
        next_id += 1

    # dynamic and wrapped objects in timestamp order
    pending = [(ts, 0, wrap) for ts, wrap in wraps]
    absorbed = filtered = 0
    for ts, base, size, callsite, t_end in allocations:
        end = base + size
        enclosing = None
        # a wrap absorbs any allocation inside it still live when the wrap
        # starts; references to it before the wrap resolve as unnamed
        for wrap_ts, wrap in wraps:
            if wrap_ts >= t_end:
                continue
            if wrap.begin_address <= base and end <= wrap.end_address:
                enclosing = wrap
                break
            if base < wrap.end_address and wrap.begin_address < end:
                raise ObjectMapError(
                    "allocation at {:#x} ({}) partially overlaps wrapped region {}".format(
                        base, callsite, wrap.label)
                )
        if enclosing is not None:
            absorbed += 1
            continue
        if size < threshold:
            filtered += 1
            continue
        pending.append((ts, 1, (base, size, callsite, t_end)))

    for ts, order, item in sorted(pending, key=lambda entry: (entry[0], entry[1])):
        if order == 0:
            objects.append(DataObject(
                next_id, ObjectKind.WRAPPED, item.label, item.begin_address,
                item.end_address - item.begin_address, ts, FOREVER
            ))
        else:
            base, size, callsite, t_end = item
            objects.append(DataObject(next_id, ObjectKind.DYNAMIC, callsite, base, size, ts, t_end))
        next_id += 1

    _check_overlaps(objects)
    logger.info(
        "object map: %s objects, %s allocations below %s bytes ignored, %s absorbed by wrapped regions",
        len(objects), filtered, threshold, absorbed
    )
    return ObjectMap(tuple(objects), threshold, stack_floor)


@dataclass(frozen=True)
class RankRow:
    rank: typing.Optional[int]
    label: str
    size_bytes: typing.Optional[int]
    share: float
    count: int
    object_id: typing.Optional[int] = None


def rank_resolved(object_map, ids):
    """rank objects by their share of the resolved ids (see resolve_samples)"""
    ids = np.asarray(ids, dtype=np.int64)
    total = len(ids)
    if total == 0:
        return []
    values, counts = np.unique(ids, return_counts=True)
    tally = dict(zip(values.tolist(), counts.tolist()))
    object_rows = sorted(
        ((count, object_id) for object_id, count in tally.items() if object_id > 0),
        key=lambda item: (-item[0], item[1])
    )
    rows = []
    for rank, (count, object_id) in enumerate(object_rows, start=1):
        obj = object_map[object_id]
        rows.append(RankRow(rank, obj.label, obj.size, count / total, count, object_id))
    for code, label in ((STACK_ID, "stack"), (UNNAMED_ID, "unnamed")):
        if tally.get(code):
            rows.append(RankRow(None, label, None, tally[code] / total, tally[code]))
    return rows


def rank_objects(object_map, samples):
    """rank objects by share of (timestamp, MemorySample) references, pseudo samples excluded"""
    samples = [(ts, sample) for ts, sample in samples if not sample.is_pseudo]
    if not samples:
        return []
    addresses = np.array([sample.address for _, sample in samples], dtype=np.uint64)
    timestamps = np.array([ts for ts, _ in samples], dtype=np.int64)
    ids, _ = object_map.resolve_samples(addresses, timestamps)
    return rank_resolved(object_map, ids)
