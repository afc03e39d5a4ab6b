#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""
test_synthgen
----------------------------------

Tests for the synthetic trace generator, its ground truth and the
workload specification files.
"""

import dataclasses
import pathlib
import sys
import tempfile
import unittest

from memfold import synthgen, tables
from memfold.formats import workload
from memfold.objects import ObjectKind, build_object_map
from memfold.synthgen import KernelSpec, ObjectSpec, SpecError, SplitMix64, WorkloadSpec
from memfold.trace import (
    AllocEvent, Edge, FreeEvent, Kind, Level, MultiplexWindow, RegionMarker,
    WrappedRegionEvent, validate_trace
)

WORKLOADS = pathlib.Path(__file__).parent.parent / "workloads"


def simple_spec(**kwargs):
    settings = dict(
        kernels=(KernelSpec(routine="sweep", file="sweep.c", hot_line=7, duration=200000, objects=("v",)),),
        objects=(ObjectSpec("v", "static", 1 << 20),),
        iterations=5,
        multiplex="load",
        seed=1
    )
    settings.update(kwargs)
    return WorkloadSpec(**settings)


def instances(trace):
    markers = trace.of_type(RegionMarker)
    enters = [ts for ts, marker in markers if marker.edge is Edge.ENTER]
    exits = [ts for ts, marker in markers if marker.edge is Edge.EXIT]
    return list(zip(enters, exits))


class TestSplitMix64(unittest.TestCase):

    def test_reference_stream(self):
        rng = SplitMix64(0)
        assert [rng.next() for _ in range(3)] == [
            0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F
        ]

    def test_ranges(self):
        rng = SplitMix64(12345)
        for _ in range(1000):
            assert 0.0 <= rng.random() < 1.0
            assert 0 <= rng.randbelow(10) < 10

    def test_pick_skips_zero_weights(self):
        rng = SplitMix64(3)
        cumulative = synthgen._cumulative([0.5, 0.0, 0.5])
        picks = {rng.pick(cumulative) for _ in range(1000)}
        assert picks == {0, 2}


class TestPrimes(unittest.TestCase):

    def test_snap(self):
        assert synthgen.snap_to_prime(1370) == 1367
        assert synthgen.snap_to_prime(13) == 13
        # 7 and 11 are both two away
        assert synthgen.snap_to_prime(9) == 7
        assert synthgen.snap_to_prime(1) == 2

    def test_is_prime(self):
        assert [n for n in range(20) if synthgen.is_prime(n)] == [2, 3, 5, 7, 11, 13, 17, 19]

    def test_spec_periods(self):
        assert simple_spec().periods() == (1367, synthgen.snap_to_prime(82310))
        assert simple_spec(load_period=1000, snap_periods=False).periods() == (1000, 82310)


class TestSpecValidation(unittest.TestCase):

    def check(self, message, **kwargs):
        with self.assertRaises(SpecError) as context:
            synthgen.generate(simple_spec(**kwargs))
        assert message in str(context.exception), str(context.exception)

    def kernel(self, **kwargs):
        return (dataclasses.replace(simple_spec().kernels[0], **kwargs),)

    def test_level_shares(self):
        self.check("level shares sum to 0.9, not 1", kernels=self.kernel(levels={Level.L1: 0.9}))

    def test_latency_weights(self):
        self.check("DRAM latency weights", kernels=self.kernel(
            levels={Level.DRAM: 1.0}, latencies={Level.DRAM: ((350, 0.5), (800, 0.4))}))

    def test_unknown_object(self):
        self.check("unknown object 'w'", kernels=self.kernel(objects=("w",)))

    def test_unknown_pattern(self):
        self.check("unknown pattern", kernels=self.kernel(pattern="strided"))

    def test_fractions(self):
        self.check("load and store fractions exceed 1", kernels=self.kernel(load_fraction=0.7, store_fraction=0.5))
        self.check("stack_fraction must be in [0, 1]", kernels=self.kernel(stack_fraction=1.5))

    def test_workload_settings(self):
        self.check("at least one kernel", kernels=())
        self.check("iterations must be at least 1", iterations=0)
        self.check("multiplex must be one of", multiplex="never")
        self.check("duplicate object names", objects=(ObjectSpec("v", "static", 8), ObjectSpec("v", "static", 8)))

    def test_object_settings(self):
        self.check("exceed", objects=(ObjectSpec("v", "wrapped", 4096, chunks=4, chunk_size=2048),))
        self.check("freed before allocated", objects=(
            ObjectSpec("v", "dynamic", 4096, alloc_iteration=3, free_iteration=1),))
        self.check("outside [0, 5)", objects=(ObjectSpec("v", "dynamic", 4096, alloc_iteration=5),))

    def test_seed(self):
        with self.assertRaises(SpecError):
            synthgen.generate(simple_spec(), seed=-1)


class TestGenerate(unittest.TestCase):

    def test_deterministic(self):
        spec = simple_spec(multiplex="both", multiplex_window=150000, kernels=(
            KernelSpec(routine="sweep", duration=200000, objects=("v",), pattern="random",
                       levels={Level.L1: 0.5, Level.L2: 0.5}, latency_jitter=2, stack_fraction=0.1),))
        first, first_truth = synthgen.generate(spec)
        second, second_truth = synthgen.generate(spec)
        assert first == second
        assert first_truth.totals == second_truth.totals
        assert synthgen.generate(spec, seed=2)[0] != first

    def test_all_l1_ascending(self):
        trace, truth = synthgen.generate(simple_spec())
        assert validate_trace(trace) == []
        spans = instances(trace)
        assert len(spans) == 5
        samples = [(ts, s) for ts, s in trace.samples() if not s.is_pseudo]
        assert samples
        assert {s.latency_cycles for _, s in samples} == {7}
        assert {s.level for _, s in samples} == {Level.L1}
        for enter, exit_ in spans:
            inside = [s.address for ts, s in samples if enter <= ts < exit_]
            assert inside == sorted(inside)
            assert inside[0] >= synthgen.STATIC_BASE
            assert inside[-1] < synthgen.STATIC_BASE + (1 << 20)
        assert all(any(enter <= ts < exit_ for enter, exit_ in spans) for ts, _ in samples)

    def test_descending(self):
        kernels = (KernelSpec(routine="sweep", duration=200000, objects=("v",), pattern="descending"),)
        trace, _ = synthgen.generate(simple_spec(kernels=kernels))
        enter, exit_ = instances(trace)[0]
        inside = [s.address for ts, s in trace.samples() if enter <= ts < exit_ and not s.is_pseudo]
        assert inside == sorted(inside, reverse=True)

    def test_sample_count_follows_period(self):
        spec = simple_spec(load_period=1000, snap_periods=False)
        trace, truth = synthgen.generate(spec)
        loads = spec.kernels[0].loads * spec.iterations
        assert truth.totals["loads"] == loads
        assert truth.totals["load_samples"] == loads // 1000
        assert truth.totals["store_samples"] == 0
        assert len([s for _, s in trace.samples() if not s.is_pseudo]) == loads // 1000

    def test_counter_snapshots(self):
        spec = simple_spec()
        trace, _ = synthgen.generate(spec)
        kernel = spec.kernels[0]
        pseudo = [s for _, s in trace.samples() if s.is_pseudo]
        assert len(pseudo) == spec.iterations
        assert [s.counters.instructions for s in pseudo] == [i * kernel.instructions for i in range(5)]
        assert pseudo[1].counters.cycles == 2500 * kernel.duration // 1000

    def test_multiplex_windows_alternate(self):
        spec = simple_spec(multiplex="both", multiplex_window=50000, kernels=(
            KernelSpec(routine="sweep", duration=200000, objects=("v",), store_fraction=0.3),),
            store_period=101, snap_periods=False)
        trace, truth = synthgen.generate(spec)
        windows = trace.of_type(MultiplexWindow)
        assert [ts for ts, _ in windows[:3]] == [0, 50000, 100000]
        assert [w.kind for _, w in windows[:3]] == [Kind.LOAD, Kind.STORE, Kind.LOAD]
        assert windows[-1][0] < spec.end
        assert truth.totals["store_samples"] > 0
        assert validate_trace(trace) == []

    def test_stack_references(self):
        kernels = (KernelSpec(routine="sweep", duration=200000, objects=("v",), stack_fraction=0.5),)
        trace, truth = synthgen.generate(simple_spec(kernels=kernels))
        stack = [s.address for _, s in trace.samples() if s.address >= synthgen.STACK_FLOOR]
        assert stack
        assert all(a < synthgen.STACK_FLOOR + synthgen.STACK_SPAN for a in stack)
        assert truth.ranking[-1].label == "stack"
        assert truth.ranking[-1].rank is None
        assert abs(truth.ranking[-1].share - 0.5) < 0.1

    def test_lifecycle_events(self):
        objects = (
            ObjectSpec("grid", "wrapped", 1 << 22, chunks=64, chunk_size=4096),
            ObjectSpec("tmp", "dynamic", 1 << 20, callsite="hydro.cc 1320", alloc_iteration=1, free_iteration=2),
        )
        kernels = (KernelSpec(routine="sweep", duration=200000, objects=("grid", "tmp")),)
        spec = simple_spec(objects=objects, kernels=kernels)
        trace, truth = synthgen.generate(spec)
        assert len(trace.of_type(WrappedRegionEvent)) == 1
        allocs = trace.of_type(AllocEvent)
        assert len(allocs) == 65
        tmp_ts = [ts for ts, a in allocs if a.callsite == "hydro.cc 1320"]
        assert tmp_ts == [spec.start + spec.iteration_duration]
        frees = trace.of_type(FreeEvent)
        assert [ts for ts, _ in frees] == [spec.start + 3 * spec.iteration_duration]
        assert validate_trace(trace) == []
        object_map = build_object_map(trace)
        assert [(obj.kind, obj.label) for obj in object_map.objects] == [
            (ObjectKind.WRAPPED, "grid"), (ObjectKind.DYNAMIC, "hydro.cc 1320")
        ]
        # tmp is not referenced outside its lifetime
        spans = instances(trace)
        base = synthgen.layout(spec)["tmp"]
        for ts, s in trace.samples():
            if base <= s.address < base + (1 << 20):
                assert spans[1][0] <= ts < spans[2][1]


class TestGroundTruth(unittest.TestCase):

    def test_truth_tables(self):
        kernels = (
            KernelSpec(routine="sweep", hot_line=7, duration=200000, objects=("v",), mips=2000,
                       levels={Level.L1: 0.75, Level.DRAM: 0.25},
                       latencies={Level.DRAM: ((350, 0.5), (800, 0.4), (900, 0.1))}),
            KernelSpec(routine="sweep", hot_line=9, duration=200000, objects=("v",), pattern="random"),
        )
        trace, truth = synthgen.generate(simple_spec(kernels=kernels))
        assert truth.kernel_labels == ["a1", "a2"]
        assert [(p.phase, p.kind, p.pattern) for p in truth.patterns] == [
            ("a1", "load", "ascending"), ("a1", "store", "ascending"),
            ("a2", "load", "random"), ("a2", "store", "random")
        ]
        dram = [row for row in truth.access if row.phase == "a1" and row.level is Level.DRAM][0]
        assert dram.share == 0.25
        assert abs(dram.mean_cost - (175 + 320 + 90)) < 1e-9
        assert dram.modes == (350, 800)
        assert [row.mips for row in truth.rates] == [2000.0, 1000.0]
        assert truth.totals["iterations"] == 5

    def test_emit_ground_truth(self):
        trace, truth = synthgen.generate(simple_spec())
        with tempfile.TemporaryDirectory() as tmp:
            paths = synthgen.emit_ground_truth(truth, pathlib.Path(tmp) / "run.mtf")
            assert [p.name for p in paths] == [
                "run_truth_access.csv", "run_truth_patterns.csv", "run_truth_totals.csv",
                "run_truth_rates.csv", "run_truth_ranking.csv"
            ]
            access = tables.read_csv(paths[0])
            assert list(access.columns) == tables.ACCESS_COLUMNS
            assert access["share"].tolist()[:5] == ["1.0000", "0.0000", "0.0000", "0.0000", "0.0000"]
            assert access["mean_cost"].tolist()[:2] == ["7.0", ""]
            totals = tables.read_csv(paths[2])
            assert list(totals.columns) == ["quantity", "value"]
            assert dict(zip(totals["quantity"], totals["value"]))["load_period"] == "1367"
            assert list(tables.read_csv(paths[1]).columns) == ["phase", "routine", "object", "kind", "pattern"]
            assert list(tables.read_csv(paths[4]).columns) == tables.RANKING_COLUMNS


class TestWorkloadFiles(unittest.TestCase):

    def test_parse(self):
        spec = workload.parse_workload("""
            iterations = 3   # short
            multiplex = load
            stack_floor = 0x7ffc00000000

            [object]
            name = v
            kind = dynamic
            size = 1_048_576
            callsite = main.c 12

            [kernel]
            routine = sweep
            hot_line = 7
            duration = 200000
            object = v
            levels = L1:0.5, dram:0.5
            latency.DRAM = 350:0.5, 800:0.5
        """)
        assert spec.iterations == 3
        assert spec.stack_floor == 0x7ffc00000000
        assert spec.objects[0].size == 1 << 20
        assert spec.objects[0].label == "main.c 12"
        kernel = spec.kernels[0]
        assert kernel.objects == ("v",)
        assert kernel.levels == {Level.L1: 0.5, Level.DRAM: 0.5}
        assert kernel.latencies == {Level.DRAM: ((350, 0.5), (800, 0.5))}

    def check(self, text, message):
        with self.assertRaises(SpecError) as context:
            workload.parse_workload(text)
        assert message in str(context.exception), str(context.exception)

    def test_errors(self):
        self.check("iterations = 3\nperiod = 5\n", "line 2: unknown workload key 'period'")
        self.check("iterations = 3\niterations = 4\n", "line 2: duplicate key")
        self.check("iterations = three\n", "line 1: bad value for iterations")
        self.check("[loop]\n", "line 1: unknown section [loop]")
        self.check("[kernel]\nfile = a.c\n", "kernel without routine")
        self.check("[kernel]\nroutine = f\nlatency.L9 = 3:1\n", "line 3: unknown level")
        self.check("iterations 3\n", "expected key = value")
        self.check("iterations = 3\n", "at least one kernel")

    def test_shipped_workloads(self):
        names = sorted(path.name for path in WORKLOADS.glob("*.wl"))
        assert names == ["hpcg.wl", "lulesh.wl", "stream.wl"]
        for path in WORKLOADS.glob("*.wl"):
            spec = workload.read_workload(path)
            assert spec.kernels

    def test_missing_file(self):
        with self.assertRaises(SpecError):
            workload.read_workload(WORKLOADS / "missing.wl")


if __name__ == '__main__':
    sys.exit(unittest.main())
