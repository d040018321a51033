"""Ground-truth memory model for tracked allocations.

The arena owns every allocation made during a run: its true size, liveness,
region, content bytes, and a per-allocation spill map that captures bytes an
unprotected execution would have written out of bounds. All byte traffic is
mediated here, and ``truth_remaining`` is the oracle that metadata backends
are measured against. Backends never consult the arena at query time; they
learn about an allocation exactly once, when it is installed.
"""

import enum
from dataclasses import dataclass, field

# Largest representable byte count. Doubles as the ceiling for offset
# arithmetic and as the "unknown size" sentinel used by backends.
SIZE_MAX = 2**64 - 1

# Value returned when reading a byte that was never written.
UNINIT_BYTE = 0


class Region(str, enum.Enum):
    """Provenance of an allocation. Informational; checks do not differ."""

    HEAP = "heap"
    STACK = "stack"
    GLOBAL = "global"


class AccessKind(enum.Enum):
    READ = "read"
    WRITE = "write"


class ConfigError(ValueError):
    """Rejected configuration input, e.g. a zero-size allocation."""


class OffsetOverflow(ValueError):
    """Offset arithmetic left the representable range."""


class InvalidFree(Exception):
    """Free of a dead allocation or free through an interior ref."""

    def __init__(self, reason: str, ref: "Ref"):
        super().__init__(f"{reason} of allocation {ref.alloc_id} at offset {ref.offset}")
        self.reason = reason
        self.ref = ref


@dataclass(frozen=True, slots=True)
class Ref:
    """A tracked address: allocation identity plus unsigned byte offset.

    Offsets may legally exceed the allocation size; such refs are
    representable but not dereferenceable. Offsets before the allocation
    base cannot be expressed at all.
    """

    alloc_id: int
    offset: int

    def at(self, delta: int) -> "Ref":
        """Ref ``delta`` bytes further right. Arithmetic never wraps."""
        off = self.offset + delta
        if off < 0 or off > SIZE_MAX:
            raise OffsetOverflow(f"offset {self.offset}+{delta} outside [0, SIZE_MAX]")
        return Ref(self.alloc_id, off)


@dataclass
class Allocation:
    size: int
    live: bool
    region: Region
    content: bytearray
    spill: dict[int, int] = field(default_factory=dict)
    tag: str = ""


class Arena:
    """Allocation table plus raw (unchecked) byte access.

    ``raw_read``/``raw_write`` are for the policy engine and for scenario
    setup; checked traffic must go through the engine so every verdict is
    observed.
    """

    def __init__(self, backend=None):
        self._allocs: dict[int, Allocation] = {}
        self._next_id = 0
        self._backend = backend

    # ------------------------------------------------------------------
    # lifecycle

    def alloc(self, size: int, region: Region = Region.HEAP, tag: str = "") -> Ref:
        """Create a zero-initialised allocation and return its base ref."""
        if size < 1:
            raise ConfigError(f"allocation size must be >= 1, got {size}")
        if size > SIZE_MAX:
            raise ConfigError(f"allocation size {size} exceeds SIZE_MAX")
        alloc_id = self._next_id
        self._next_id += 1
        self._allocs[alloc_id] = Allocation(
            size=size,
            live=True,
            region=Region(region),
            content=bytearray(size),
            tag=tag,
        )
        if self._backend is not None:
            self._backend.install_allocation(alloc_id, size)
        return Ref(alloc_id, 0)

    def free(self, ref: Ref) -> None:
        """Mark an allocation dead and retire its backend metadata.

        Content is retained for post-mortem inspection. Raises InvalidFree
        for an interior ref or an allocation that is already dead.
        """
        alloc = self._lookup(ref.alloc_id)
        if ref.offset != 0:
            raise InvalidFree("interior free", ref)
        if not alloc.live:
            raise InvalidFree("double free", ref)
        alloc.live = False
        if self._backend is not None:
            self._backend.retire_allocation(ref.alloc_id)

    # ------------------------------------------------------------------
    # ground truth

    def truth_remaining(self, ref: Ref) -> int:
        """True bytes from ref to the end of its allocation; 0 if invalid."""
        alloc = self._lookup(ref.alloc_id)
        if not alloc.live or ref.offset >= alloc.size:
            return 0
        return alloc.size - ref.offset

    # ------------------------------------------------------------------
    # raw byte traffic

    def raw_read(self, ref: Ref, n: int) -> bytes:
        """Read n bytes with no checking; out-of-bounds bytes come from the
        spill map, defaulting to UNINIT_BYTE."""
        if n < 0:
            raise ConfigError(f"negative read length {n}")
        if ref.offset + n > SIZE_MAX:
            raise OffsetOverflow(f"read of {n} at offset {ref.offset} overflows")
        alloc = self._lookup(ref.alloc_id)
        out = bytearray(n)
        for i in range(n):
            off = ref.offset + i
            if off < alloc.size:
                out[i] = alloc.content[off]
            else:
                out[i] = alloc.spill.get(off, UNINIT_BYTE)
        return bytes(out)

    def raw_write(self, ref: Ref, data: bytes) -> None:
        """Write bytes with no checking; out-of-bounds bytes go to spill."""
        if ref.offset + len(data) > SIZE_MAX:
            raise OffsetOverflow(f"write of {len(data)} at offset {ref.offset} overflows")
        alloc = self._lookup(ref.alloc_id)
        for i, b in enumerate(data):
            off = ref.offset + i
            if off < alloc.size:
                alloc.content[off] = b
            else:
                alloc.spill[off] = b

    # Single-byte fast paths used by the policy engine's hot loop.

    def _read1(self, alloc_id: int, off: int) -> int:
        alloc = self._allocs[alloc_id]
        if off < alloc.size:
            return alloc.content[off]
        return alloc.spill.get(off, UNINIT_BYTE)

    def _write1(self, alloc_id: int, off: int, value: int) -> None:
        alloc = self._allocs[alloc_id]
        if off < alloc.size:
            alloc.content[off] = value
        else:
            alloc.spill[off] = value

    # ------------------------------------------------------------------
    # inspection

    def allocation(self, ref_or_id) -> Allocation:
        alloc_id = ref_or_id.alloc_id if isinstance(ref_or_id, Ref) else ref_or_id
        return self._lookup(alloc_id)

    def allocations(self):
        return list(self._allocs.values())

    def any_spill(self) -> bool:
        return any(a.spill for a in self._allocs.values())

    def _lookup(self, alloc_id: int) -> Allocation:
        try:
            return self._allocs[alloc_id]
        except KeyError:
            raise LookupError(f"no allocation with id {alloc_id}") from None
