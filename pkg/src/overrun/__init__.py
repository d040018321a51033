"""overrun: a desk-scale laboratory for buffer-overflow detection and recovery.

The package models tracked allocations in a byte-addressable arena, answers
"how many bytes remain to the right of this pointer" through interchangeable
metadata backends (a bounds table, shadow memory with redzones, or nothing),
and executes libc-style string and memory operations under configurable
recovery policies: abort on the first violation, discard and manufacture
obliviously, clamp inside the operations that know their buffers, or both.
A small scenario language reproduces five public CVEs and a benchmark
harness measures introspection cost in deterministic counter units.
"""

from .arena import (
    AccessKind,
    Allocation,
    Arena,
    ConfigError,
    InvalidFree,
    OffsetOverflow,
    Ref,
    Region,
    SIZE_MAX,
)
from .backends import (
    AccessVerdict,
    BackendKind,
    BoundsTableBackend,
    Counters,
    EstimateKind,
    MetadataBackend,
    NullBackend,
    ShadowRedzoneBackend,
    SizeEstimate,
    make_backend,
)
from .bench import BenchResult, bench_size_right
from .libc import BadCall, InputStream, LibcCall, OverlapError
from .policy import Event, EventKind, Policy, RunAborted, Runtime, execute
from .scenario import (
    Interpreter,
    Outcome,
    ParseError,
    RunReport,
    Scenario,
    corpus,
    corpus_scenario,
    parse,
    run,
    run_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "AccessKind",
    "AccessVerdict",
    "Allocation",
    "Arena",
    "BackendKind",
    "BadCall",
    "BenchResult",
    "BoundsTableBackend",
    "ConfigError",
    "Counters",
    "EstimateKind",
    "Event",
    "EventKind",
    "InputStream",
    "Interpreter",
    "InvalidFree",
    "LibcCall",
    "MetadataBackend",
    "NullBackend",
    "OffsetOverflow",
    "Outcome",
    "OverlapError",
    "ParseError",
    "Policy",
    "Ref",
    "Region",
    "RunAborted",
    "RunReport",
    "Runtime",
    "Scenario",
    "ShadowRedzoneBackend",
    "SizeEstimate",
    "SIZE_MAX",
    "bench_size_right",
    "corpus",
    "corpus_scenario",
    "execute",
    "make_backend",
    "parse",
    "run",
    "run_matrix",
    "__version__",
]
