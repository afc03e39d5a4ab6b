"""
Workload specification files.

Flat ``key = value`` lines for the run settings followed by repeated
``[kernel]`` and ``[object]`` sections::

    iterations = 20
    load_period = 1370

    [object]
    name = a
    kind = static
    size = 160000000

    [kernel]
    routine = Copy
    file = stream.c
    hot_line = 310
    duration = 4000000
    object = a
    levels = L1:0.758, LFB:0.227, L2:0.01, DRAM:0.005
    latency.DRAM = 350:0.5, 800:0.5
"""
import logging
import pathlib

from ..synthgen import KernelSpec, ObjectSpec, SpecError, WorkloadSpec
from ..trace import Level

logger = logging.getLogger(__name__)

SECTIONS = ("kernel", "object")


def _int(value):
    # accepts 0x.. and 160_000_000
    return int(value, 0)


def _bool(value):
    value = value.lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError("not a boolean: {!r}".format(value))


def _names(value):
    return tuple(item.strip() for item in value.split(",") if item.strip())


def _floats(value):
    return tuple(float(item) for item in _names(value))


def _pairs(value):
    pairs = []
    for item in _names(value):
        key, sep, weight = item.partition(":")
        if not sep:
            raise ValueError("expected key:value, got {!r}".format(item))
        pairs.append((key.strip(), float(weight)))
    return pairs


def _levels(value):
    return {Level[key.upper()]: share for key, share in _pairs(value)}


def _latencies(value):
    return tuple((int(key, 0), weight) for key, weight in _pairs(value))


GLOBAL_KEYS = dict(
    iterations=_int,
    load_period=_int,
    store_period=_int,
    multiplex_window=_int,
    multiplex=str,
    freq_mhz=_int,
    seed=_int,
    process_id=_int,
    stack_floor=_int,
    snap_periods=_bool,
    region_id=_int,
    start=_int,
)

KERNEL_KEYS = dict(
    routine=str,
    file=str,
    hot_line=_int,
    duration=_int,
    object=_names,
    object_weights=_floats,
    pattern=str,
    store_object=str,
    store_pattern=str,
    levels=_levels,
    latency_jitter=_int,
    mips=float,
    l1d_miss=float,
    l2_miss=float,
    l3_miss=float,
    branch=float,
    load_fraction=float,
    store_fraction=float,
    stack_fraction=float,
    store_hit=float,
)

OBJECT_KEYS = dict(
    name=str,
    kind=str,
    size=_int,
    base=_int,
    callsite=str,
    alloc_iteration=_int,
    free_iteration=_int,
    chunks=_int,
    chunk_size=_int,
)

# workload keys that differ from the field names
RENAMES = {"object": "objects"}


def _convert(section, key, value, lineno):
    if section == "kernel" and key.startswith("latency."):
        level_name = key.split(".", 1)[1].upper()
        if level_name not in Level.__members__:
            raise SpecError("line {}: unknown level {!r}".format(lineno, level_name))
        try:
            return (Level[level_name], _latencies(value))
        except ValueError as e:
            raise SpecError("line {}: {}: {}".format(lineno, key, e))
    keys = dict(kernel=KERNEL_KEYS, object=OBJECT_KEYS).get(section, GLOBAL_KEYS)
    if key not in keys:
        raise SpecError("line {}: unknown {} key {!r}".format(lineno, section or "workload", key))
    try:
        return keys[key](value)
    except (KeyError, ValueError) as e:
        raise SpecError("line {}: bad value for {}: {!r} ({})".format(lineno, key, value, e))


def _kernel(fields, lineno):
    latencies = {}
    settings = {}
    for key, value in fields.items():
        if key.startswith("latency."):
            level, distribution = value
            latencies[level] = distribution
        else:
            settings[RENAMES.get(key, key)] = value
    if "routine" not in settings:
        raise SpecError("line {}: kernel without routine".format(lineno))
    if latencies:
        settings["latencies"] = latencies
    return KernelSpec(**settings)


def _object(fields, lineno):
    if "name" not in fields:
        raise SpecError("line {}: object without name".format(lineno))
    return ObjectSpec(**fields)


def parse_workload(text):
    """parse workload text into a validated WorkloadSpec"""
    settings = {}
    kernels, objects = [], []
    section, fields, started = None, None, 0

    def close():
        if section == "kernel":
            kernels.append(_kernel(fields, started))
        elif section == "object":
            objects.append(_object(fields, started))

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in SECTIONS:
                raise SpecError("line {}: unknown section [{}]".format(lineno, name))
            close()
            section, fields, started = name, {}, lineno
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SpecError("line {}: expected key = value".format(lineno))
        key, value = key.strip().lower(), value.strip()
        target = settings if section is None else fields
        if key in target:
            raise SpecError("line {}: duplicate key {!r}".format(lineno, key))
        target[key] = _convert(section, key, value, lineno)
    close()

    spec = WorkloadSpec(kernels=tuple(kernels), objects=tuple(objects), **settings)
    spec.validate()
    logger.debug("workload: %s kernels, %s objects, %s iterations", len(kernels), len(objects), spec.iterations)
    return spec


def read_workload(path):
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise SpecError("workload {} is not utf-8 text (byte {})".format(path, e.start))
    except OSError as e:
        raise SpecError("cannot read workload {}: {}".format(path, e))
    return parse_workload(text)
