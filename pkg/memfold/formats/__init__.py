from .mtf import MemoryTrace, TraceFormatError, read_trace, write_trace
from .prv import FoldedTrace, FoldedTraceError, emit_folded_trace, read_folded_trace
from .formats import get_format

__all__ = [
    "MemoryTrace", "FoldedTrace", "TraceFormatError", "FoldedTraceError",
    "read_trace", "write_trace", "emit_folded_trace", "read_folded_trace",
    "get_format"
]
