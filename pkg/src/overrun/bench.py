"""Deterministic cost measurement for the introspection query.

The interesting quantity is not wall time but the operation counters:
how many metadata touches one ``strlen`` interception costs on each
backend. The bounds table answers in one lookup regardless of string
length; the shadow walk touches one cell per byte plus the stopping
cell, so its cost grows linearly. Wall time is recorded as a curiosity
and never asserted on.
"""

import time
from dataclasses import dataclass

from .arena import Region
from .libc import cs_strlen
from .policy import Policy, Runtime

BENCH_OPS = ("strlen",)
DEFAULT_LENGTHS = (10, 100, 500, 1000)


@dataclass
class BenchResult:
    """Per-call counter deltas for one (backend, length) point."""

    function: str
    backend: str
    string_length: int
    shadow_reads: int
    metadata_lookups: int
    wall_time: float  # mean seconds per call, informational only

    def as_dict(self) -> dict:
        return {
            "function": self.function,
            "backend": self.backend,
            "string_length": self.string_length,
            "shadow_reads": self.shadow_reads,
            "metadata_lookups": self.metadata_lookups,
            "wall_time": self.wall_time,
        }


def bench_size_right(backend, lengths=DEFAULT_LENGTHS, reps: int = 5, redzone: int = 16):
    """Measure per-call counter deltas for cs_strlen over given lengths.

    Each length L gets a fresh (L+1)-byte buffer holding an L-byte
    terminated string. Counter deltas must be identical across
    repetitions; any drift means hidden state and raises.
    """
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")
    results = []
    for length in lengths:
        if length < 1:
            raise ValueError(f"string length must be >= 1, got {length}")
        rt = Runtime(backend, Policy.CONTEXT_AWARE, redzone=redzone)
        ref = rt.arena.alloc(length + 1, Region.HEAP, tag=f"s{length}")
        rt.arena.raw_write(ref, b"x" * length)  # NUL terminator from zero-init
        deltas = set()
        t0 = time.perf_counter()
        for _ in range(reps):
            before = rt.counters.snapshot()
            n = cs_strlen(rt, ref)
            after = rt.counters.snapshot()
            if n != length:
                raise AssertionError(f"cs_strlen returned {n} for length {length}")
            deltas.add((after[0] - before[0], after[1] - before[1]))
        elapsed = time.perf_counter() - t0
        if len(deltas) != 1:
            raise AssertionError(f"counter deltas varied across repetitions: {deltas}")
        d_shadow, d_lookup = deltas.pop()
        results.append(
            BenchResult(
                function="strlen",
                backend=rt.backend.kind.value,
                string_length=length,
                shadow_reads=d_shadow,
                metadata_lookups=d_lookup,
                wall_time=elapsed / reps,
            )
        )
    return results
