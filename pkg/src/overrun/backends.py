"""Interchangeable bounds-metadata backends behind one introspection query.

``size_right(ref)`` answers "how many allocated bytes sit at and to the
right of this address", the single primitive the context-aware interceptors
need. Three backends model the real metadata organisations:

* bounds table: per-allocation base/bound records, constant-time lookup
  (SoftBound/MPX-style; both reduce to size minus offset here, so they
  collapse into one backend);
* shadow redzones: a 1:1 shadow map walked cell by cell (ASan-style);
* null: no metadata at all; every query answers Unknown and every access
  is waved through.

Counter discipline: only ``size_right`` moves the introspection counters.
``check_access`` models the tool's normal checking and is free, so the
counters isolate what the *query* costs on each organisation.
"""

import enum
from dataclasses import dataclass

from .arena import SIZE_MAX, AccessKind, Ref


class EstimateKind(enum.Enum):
    EXACT = "exact"
    CONSERVATIVE = "conservative"
    INVALID = "invalid"
    UNKNOWN = "unknown"


@dataclass(frozen=True, slots=True)
class SizeEstimate:
    """Answer to size_right: a kind plus a byte count.

    Invalid estimates are always 0; Unknown is always SIZE_MAX, which makes
    downstream clamping degenerate to a no-op.
    """

    kind: EstimateKind
    value: int

    def __post_init__(self):
        if self.kind is EstimateKind.INVALID and self.value != 0:
            raise ValueError("invalid estimates carry value 0")
        if self.kind is EstimateKind.UNKNOWN and self.value != SIZE_MAX:
            raise ValueError("unknown estimates carry SIZE_MAX")

    @classmethod
    def exact(cls, value: int) -> "SizeEstimate":
        return cls(EstimateKind.EXACT, value)

    @classmethod
    def invalid(cls) -> "SizeEstimate":
        return cls(EstimateKind.INVALID, 0)

    @classmethod
    def unknown(cls) -> "SizeEstimate":
        return cls(EstimateKind.UNKNOWN, SIZE_MAX)


class AccessVerdict(enum.Enum):
    ALLOWED = "allowed"
    OUT_OF_BOUNDS = "out_of_bounds"
    USE_AFTER_FREE = "use_after_free"


class BackendKind(str, enum.Enum):
    BOUNDS = "bounds"
    SHADOW = "shadow"
    NULL = "none"


@dataclass
class Counters:
    """Per-run operation counters surfaced in every report."""

    shadow_reads: int = 0
    metadata_lookups: int = 0
    bytes_clamped: int = 0

    def snapshot(self) -> tuple[int, int, int]:
        return (self.shadow_reads, self.metadata_lookups, self.bytes_clamped)

    def as_dict(self) -> dict:
        return {
            "shadow_reads": self.shadow_reads,
            "metadata_lookups": self.metadata_lookups,
            "bytes_clamped": self.bytes_clamped,
        }


@dataclass
class BoundsRecord:
    bound: int
    live: bool


class MetadataBackend:
    """Common interface: install/retire plus size_right and check_access."""

    kind: BackendKind
    label: str

    def __init__(self, counters: Counters):
        self.counters = counters

    def install_allocation(self, alloc_id: int, size: int) -> None:
        raise NotImplementedError

    def retire_allocation(self, alloc_id: int) -> None:
        raise NotImplementedError

    def size_right(self, ref: Ref) -> SizeEstimate:
        raise NotImplementedError

    def check_access(self, ref: Ref, n: int, kind: AccessKind) -> AccessVerdict:
        return self._check(ref.alloc_id, ref.offset, n, kind)

    def _check(self, alloc_id: int, off: int, n: int, kind: AccessKind) -> AccessVerdict:
        raise NotImplementedError


class BoundsTableBackend(MetadataBackend):
    """Constant-time base/bound records (SoftBound/MPX-style).

    The query subtracts the offset from the recorded bound: one metadata
    lookup per query regardless of allocation size.
    """

    kind = BackendKind.BOUNDS
    label = "bounds (SoftBound/MPX-style)"

    def __init__(self, counters: Counters):
        super().__init__(counters)
        self._records: dict[int, BoundsRecord] = {}

    def install_allocation(self, alloc_id: int, size: int) -> None:
        if alloc_id in self._records:
            raise RuntimeError(f"allocation {alloc_id} already installed")
        self._records[alloc_id] = BoundsRecord(bound=size, live=True)

    def retire_allocation(self, alloc_id: int) -> None:
        rec = self._records.get(alloc_id)
        if rec is None or not rec.live:
            raise RuntimeError(f"allocation {alloc_id} not live in bounds table")
        rec.live = False

    def size_right(self, ref: Ref) -> SizeEstimate:
        self.counters.metadata_lookups += 1
        rec = self._records.get(ref.alloc_id)
        if rec is None or not rec.live or ref.offset >= rec.bound:
            return SizeEstimate.invalid()
        return SizeEstimate.exact(rec.bound - ref.offset)

    def _check(self, alloc_id: int, off: int, n: int, kind: AccessKind) -> AccessVerdict:
        rec = self._records.get(alloc_id)
        if rec is None:
            return AccessVerdict.OUT_OF_BOUNDS
        if not rec.live:
            return AccessVerdict.USE_AFTER_FREE
        if off + n <= rec.bound:
            return AccessVerdict.ALLOWED
        return AccessVerdict.OUT_OF_BOUNDS


# Shadow cell states. One cell per data byte.
ADDRESSABLE = 0
REDZONE = 1
FREED = 2

DEFAULT_REDZONE = 16


class ShadowRedzoneBackend(MetadataBackend):
    """Per-byte shadow cells with guard redzones (ASan-style).

    The query walks the shadow right from the ref's cell, counting
    consecutive ADDRESSABLE cells; the walk also reads the cell that stops
    it, so each query costs (returned count + 1) shadow reads. Linear in
    the answer, unlike the bounds table.
    """

    kind = BackendKind.SHADOW
    label = "shadow (ASan-style redzones)"

    def __init__(self, counters: Counters, redzone: int = DEFAULT_REDZONE):
        super().__init__(counters)
        if redzone < 1:
            raise ValueError(f"redzone width must be >= 1, got {redzone}")
        self.redzone = redzone
        self._shadows: dict[int, bytearray] = {}
        self._live: dict[int, bool] = {}

    def install_allocation(self, alloc_id: int, size: int) -> None:
        if alloc_id in self._shadows:
            raise RuntimeError(f"allocation {alloc_id} already installed")
        r = self.redzone
        shadow = bytearray(size + 2 * r)
        for i in range(r):
            shadow[i] = REDZONE
            shadow[r + size + i] = REDZONE
        self._shadows[alloc_id] = shadow
        self._live[alloc_id] = True

    def retire_allocation(self, alloc_id: int) -> None:
        if not self._live.get(alloc_id, False):
            raise RuntimeError(f"allocation {alloc_id} not live in shadow map")
        shadow = self._shadows[alloc_id]
        r = self.redzone
        for i in range(r, len(shadow) - r):
            shadow[i] = FREED
        self._live[alloc_id] = False

    def size_right(self, ref: Ref) -> SizeEstimate:
        shadow = self._shadows.get(ref.alloc_id)
        if shadow is None:
            self.counters.shadow_reads += 1
            return SizeEstimate.invalid()
        idx = self.redzone + ref.offset
        end = len(shadow)
        count = 0
        while idx < end and shadow[idx] == ADDRESSABLE:
            count += 1
            idx += 1
        # The walk reads every counted cell plus the one that stopped it.
        self.counters.shadow_reads += count + 1
        if count == 0:
            return SizeEstimate.invalid()
        return SizeEstimate.exact(count)

    def _check(self, alloc_id: int, off: int, n: int, kind: AccessKind) -> AccessVerdict:
        shadow = self._shadows.get(alloc_id)
        if shadow is None:
            return AccessVerdict.OUT_OF_BOUNDS
        if not self._live[alloc_id]:
            return AccessVerdict.USE_AFTER_FREE
        size = len(shadow) - 2 * self.redzone
        if off + n <= size:
            return AccessVerdict.ALLOWED
        return AccessVerdict.OUT_OF_BOUNDS

    def shadow_cells(self, alloc_id: int) -> bytes:
        """Raw shadow map for an allocation (tests and debugging)."""
        return bytes(self._shadows[alloc_id])


class NullBackend(MetadataBackend):
    """No metadata: introspection disabled, every access waved through.

    Runs degrade to silent corruption, which the arena's spill maps make
    visible after the fact.
    """

    kind = BackendKind.NULL
    label = "none (introspection disabled)"

    def install_allocation(self, alloc_id: int, size: int) -> None:
        pass

    def retire_allocation(self, alloc_id: int) -> None:
        pass

    def size_right(self, ref: Ref) -> SizeEstimate:
        self.counters.metadata_lookups += 1
        return SizeEstimate.unknown()

    def _check(self, alloc_id: int, off: int, n: int, kind: AccessKind) -> AccessVerdict:
        return AccessVerdict.ALLOWED


def make_backend(kind, counters: Counters, redzone: int = DEFAULT_REDZONE) -> MetadataBackend:
    kind = BackendKind(kind)
    if kind is BackendKind.BOUNDS:
        return BoundsTableBackend(counters)
    if kind is BackendKind.SHADOW:
        return ShadowRedzoneBackend(counters, redzone=redzone)
    return NullBackend(counters)
