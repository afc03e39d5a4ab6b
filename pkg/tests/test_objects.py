#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
test_objects
----------------------------------

Tests for the time aware object map and object ranking.
"""

import sys
import unittest

import numpy as np

from memfold import objects, synthgen
from memfold.objects import (
    STACK_ID, STACK_REF, UNNAMED_ID, UNNAMED_REF, ObjectKind, ObjectMapError,
    RefKind, build_object_map, rank_objects, rank_resolved
)
from memfold.trace import (
    AllocEvent, FreeEvent, Level, StaticObjectDecl, Trace, TraceEvent,
    TraceHeader, WrappedRegionEvent
)

HEAP = 0x2aaaab000000
GRID = 0x2aaaac000000
STACK = 0x7ffc00000000

# (alloc ts, free ts, base, size, callsite)
REUSE = [
    (0, 1000, HEAP, 65536, "first.c 1"),
    (2000, 3000, HEAP, 65536, "second.c 2"),
    (4000, None, HEAP, 131072, "third.c 3"),
]


def trace_of(events):
    return Trace(TraceHeader(), tuple(TraceEvent(ts, payload) for ts, payload in events))


def reuse_trace():
    events = [(0, StaticObjectDecl("s", 0x601000, 4096))]
    for alloc, free, base, size, callsite in REUSE:
        events.append((alloc, AllocEvent(base, size, callsite)))
        if free is not None:
            events.append((free, FreeEvent(base)))
    events.sort(key=lambda event: event[0])
    return trace_of(events)


def oracle(address, timestamp):
    """object id by scanning the allocation records, ids in declaration order"""
    if 0x601000 <= address < 0x601000 + 4096:
        return 1
    for object_id, (alloc, free, base, size, _) in enumerate(REUSE, start=2):
        if free is None:
            free = objects.FOREVER
        if base <= address < base + size and alloc <= timestamp < free:
            return object_id
    if address >= STACK:
        return STACK_ID
    return UNNAMED_ID


class TestObjectMap(unittest.TestCase):

    def test_objects_in_order(self):
        object_map = build_object_map(reuse_trace())
        assert [obj.label for obj in object_map.objects] == ["s", "first.c 1", "second.c 2", "third.c 3"]
        assert object_map[1].kind is ObjectKind.STATIC
        assert object_map[2].t_end == 1000
        assert object_map[4].t_end == objects.FOREVER

    def test_reused_address_against_oracle(self):
        object_map = build_object_map(reuse_trace(), stack_floor=STACK)
        rng = np.random.default_rng(7)
        count = 10000
        addresses = rng.integers(HEAP - 4096, HEAP + 200000, size=count)
        # a share of the queries hits the static object and the stack
        addresses[:500] = rng.integers(0x601000 - 64, 0x601000 + 4200, size=500)
        addresses[500:800] = rng.integers(STACK, STACK + 65536, size=300)
        timestamps = rng.integers(0, 5000, size=count)
        ids, offsets = object_map.resolve_samples(addresses, timestamps)
        expected = [oracle(int(a), int(t)) for a, t in zip(addresses, timestamps)]
        assert ids.tolist() == expected
        for a, t, object_id, offset in zip(addresses[:1000], timestamps[:1000], ids, offsets):
            ref = object_map.resolve(int(a), int(t))
            if object_id > 0:
                assert ref.kind is RefKind.OBJECT
                assert ref.object_id == object_id
                assert ref.offset == int(offset) == int(a) - object_map[int(object_id)].base
            elif object_id == STACK_ID:
                assert ref == STACK_REF
            else:
                assert ref == UNNAMED_REF

    def test_freed_boundary_is_exclusive(self):
        object_map = build_object_map(reuse_trace())
        assert object_map.resolve(HEAP + 8, 999).object_id == 2
        assert object_map.resolve(HEAP + 8, 1000) == UNNAMED_REF
        assert object_map.resolve(HEAP + 8, 2000).object_id == 3
        assert object_map.resolve(HEAP + 100000, 3500) == UNNAMED_REF
        assert object_map.resolve(HEAP + 100000, 4500).object_id == 4

    def test_threshold(self):
        trace = trace_of([(0, AllocEvent(HEAP, 16384, "small.c 9"))])
        assert build_object_map(trace).resolve(HEAP + 8, 10) == UNNAMED_REF
        assert build_object_map(trace, threshold=8192).resolve(HEAP + 8, 10).object_id == 1
        with self.assertRaises(ObjectMapError):
            build_object_map(trace, threshold=0)

    def test_wrapped_region_absorbs_chunks(self):
        events = [(0, WrappedRegionEvent(GRID, GRID + (1 << 20), "grid"))]
        events += [(0, AllocEvent(GRID + i * 8192, 4096, "chunk.c 4")) for i in range(64)]
        object_map = build_object_map(trace_of(events))
        assert len(object_map) == 1
        assert object_map[1].kind is ObjectKind.WRAPPED
        for address in (GRID, GRID + 4096 + 8, GRID + 63 * 8192 + 16):
            ref = object_map.resolve(address, 10)
            assert ref.object_id == 1
            assert ref.offset == address - GRID

    def test_wrap_absorbs_earlier_live_allocation(self):
        events = [
            (0, AllocEvent(GRID, 65536, "early.c 3")),
            (100, WrappedRegionEvent(GRID, GRID + (1 << 20), "grid")),
        ]
        object_map = build_object_map(trace_of(events))
        assert len(object_map) == 1
        assert object_map[1].kind is ObjectKind.WRAPPED
        assert object_map.resolve(GRID + 8, 50) == UNNAMED_REF
        assert object_map.resolve(GRID + 8, 150).object_id == 1

    def test_partial_overlap_with_wrap(self):
        events = [
            (0, WrappedRegionEvent(GRID, GRID + 65536, "grid")),
            (5, AllocEvent(GRID + 32768, 65536, "straddle.c 1")),
        ]
        with self.assertRaises(ObjectMapError) as context:
            build_object_map(trace_of(events))
        assert "partially overlaps" in str(context.exception)

    def test_overlapping_wraps(self):
        events = [
            (0, WrappedRegionEvent(GRID, GRID + 65536, "a")),
            (0, WrappedRegionEvent(GRID + 4096, GRID + 8192, "b")),
        ]
        with self.assertRaises(ObjectMapError):
            build_object_map(trace_of(events))

    def test_partial_free(self):
        events = [
            (0, AllocEvent(HEAP, 65536, "big.c 1")),
            (10, FreeEvent(HEAP + 4096)),
        ]
        with self.assertRaises(ObjectMapError) as context:
            build_object_map(trace_of(events))
        assert "partial free" in str(context.exception)

    def test_stack_needs_floor(self):
        trace = reuse_trace()
        assert build_object_map(trace).resolve(STACK + 64, 10) == UNNAMED_REF
        assert build_object_map(trace, stack_floor=STACK).resolve(STACK + 64, 10) == STACK_REF


class TestRanking(unittest.TestCase):

    def test_rank_resolved(self):
        object_map = build_object_map(reuse_trace())
        rows = rank_resolved(object_map, [2, 2, 2, 1, 3, 3, STACK_ID, UNNAMED_ID])
        assert [row.label for row in rows] == ["first.c 1", "second.c 2", "s", "stack", "unnamed"]
        assert [row.rank for row in rows] == [1, 2, 3, None, None]
        assert rows[0].share == 3 / 8
        assert rows[0].size_bytes == 65536
        assert rows[3].size_bytes is None
        assert abs(sum(row.share for row in rows) - 1.0) < 1e-12

    def test_ties_rank_by_id(self):
        object_map = build_object_map(reuse_trace())
        rows = rank_resolved(object_map, [3, 2])
        assert [row.object_id for row in rows] == [2, 3]

    def test_empty(self):
        object_map = build_object_map(reuse_trace())
        assert rank_resolved(object_map, []) == []

    def test_ranking_matches_generated_references(self):
        spec = synthgen.WorkloadSpec(
            kernels=(synthgen.KernelSpec(
                routine="ComputeSPMV_ref",
                file="ComputeSPMV_ref.cpp",
                hot_line=68,
                duration=5000000,
                objects=("matrix", "x", "b"),
                object_weights=(0.4621, 0.3, 0.2379),
                pattern="random",
                levels={Level.L1: 0.9, Level.L2: 0.1},
            ),),
            objects=(
                synthgen.ObjectSpec("matrix", "wrapped", 8 << 20),
                synthgen.ObjectSpec("x", "dynamic", 1 << 20, callsite="GenerateProblem_ref.cpp 205"),
                synthgen.ObjectSpec("b", "static", 2 << 20),
            ),
            iterations=10,
            multiplex="load",
            seed=11
        )
        trace, truth = synthgen.generate(spec)
        object_map = build_object_map(trace)
        rows = rank_objects(object_map, trace.samples())
        assert rows[0].label == "matrix"
        assert abs(rows[0].share - 0.4621) < 0.02
        assert [(row.label, row.count) for row in rows] == [(row.label, row.count) for row in truth.ranking]


if __name__ == '__main__':
    sys.exit(unittest.main())
