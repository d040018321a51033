"""C string/memory operations over tracked refs, in two families.

``ref_*`` are straight ISO-style reference implementations: they trust
their arguments and perform their byte traffic one checked access at a
time, so the policy engine observes every out-of-bounds byte.

``cs_*`` are the context-aware interceptors. Each first asks the backend
how much room the destination really has (``size_right``) and then runs
the corresponding bounded operation: oversized requests are clamped,
strings are truncated but stay NUL-terminated, and an unbounded gets
becomes a bounded fgets. With the null backend the query answers Unknown
(SIZE_MAX) and every interceptor degenerates to its unprotected form.

Only destinations are guarded; an undersized *source* still surfaces as an
out-of-bounds read and is left to the policy.
"""

from dataclasses import dataclass

from .arena import Ref
from .backends import EstimateKind
from .policy import EventKind, Runtime

NEWLINE = 0x0A


class BadCall(ValueError):
    """Malformed libc call: unknown function or wrong argument shape."""


class OverlapError(ValueError):
    """memcpy with overlapping source and destination ranges."""


class InputStream:
    """Byte stream standing in for stdin, with a visible read position."""

    def __init__(self, data: bytes = b""):
        self._data = bytearray(data)
        self.pos = 0

    def feed(self, data: bytes) -> None:
        self._data.extend(data)

    def getc(self) -> int | None:
        if self.pos >= len(self._data):
            return None
        b = self._data[self.pos]
        self.pos += 1
        return b

    @property
    def remaining(self) -> int:
        return len(self._data) - self.pos


# ----------------------------------------------------------------------
# reference implementations


def ref_strlen(rt: Runtime, s: Ref, *, site: str = "strlen") -> int:
    """Scan right until a NUL byte; no idea where the buffer ends."""
    i = 0
    while True:
        if rt.read_byte(s, i, site=site) == 0:
            return i
        i += 1


def ref_strnlen(rt: Runtime, s: Ref, n: int, *, site: str = "strnlen") -> int:
    """Like strlen but examines at most n bytes."""
    i = 0
    while i < n:
        if rt.read_byte(s, i, site=site) == 0:
            return i
        i += 1
    return n


def ref_strcpy(rt: Runtime, dest: Ref, src: Ref, *, site: str = "strcpy") -> Ref:
    """Copy src through its NUL into dest."""
    i = 0
    while True:
        b = rt.read_byte(src, i, site=site)
        rt.write_byte(dest, b, i, site=site)
        if b == 0:
            return dest
        i += 1


def ref_strncpy(rt: Runtime, dest: Ref, src: Ref, n: int, *, site: str = "strncpy") -> Ref:
    """Copy at most n bytes of src; NUL-pad to exactly n writes."""
    b = 0
    src_done = False
    for i in range(n):
        if not src_done:
            b = rt.read_byte(src, i, site=site)
            if b == 0:
                src_done = True
        # b is 0 from the moment the source NUL was read, so the tail of
        # the loop is pure padding.
        rt.write_byte(dest, b, i, site=site)
    return dest


def ref_strcat(rt: Runtime, dest: Ref, src: Ref, *, site: str = "strcat") -> Ref:
    """Append src (through its NUL) after dest's current string."""
    d = ref_strlen(rt, dest, site=site)
    i = 0
    while True:
        b = rt.read_byte(src, i, site=site)
        rt.write_byte(dest, b, d + i, site=site)
        if b == 0:
            return dest
        i += 1


def ref_memcpy(rt: Runtime, dest: Ref, src: Ref, n: int, *, site: str = "memcpy") -> Ref:
    """Copy n bytes; overlapping ranges are an authoring error."""
    if n > 0 and dest.alloc_id == src.alloc_id:
        d0, s0 = dest.offset, src.offset
        if d0 < s0 + n and s0 < d0 + n:
            raise OverlapError(
                f"memcpy ranges overlap within allocation {dest.alloc_id}; use distinct allocations"
            )
    for i in range(n):
        rt.write_byte(dest, rt.read_byte(src, i, site=site), i, site=site)
    return dest


def ref_memset(rt: Runtime, dest: Ref, c: int, n: int, *, site: str = "memset") -> Ref:
    for i in range(n):
        rt.write_byte(dest, c, i, site=site)
    return dest


def ref_gets(rt: Runtime, s: Ref, stream: InputStream, *, site: str = "gets") -> Ref | None:
    """Read a line with no size limit; the newline is consumed, not stored."""
    count = 0
    got_any = False
    while True:
        ch = stream.getc()
        if ch is None:
            break
        got_any = True
        if ch == NEWLINE:
            break
        rt.write_byte(s, ch, count, site=site)
        count += 1
    if not got_any:
        return None
    rt.write_byte(s, 0, count, site=site)
    return s


def ref_fgets(
    rt: Runtime, s: Ref, n: int, stream: InputStream, *, site: str = "fgets"
) -> Ref | None:
    """Read at most n-1 bytes, stopping after a newline, then NUL-terminate.

    n <= 0 is a null-result without touching memory. Immediate end of
    stream with nothing read is also a null-result.
    """
    if n <= 0:
        return None
    if n == 1:
        rt.write_byte(s, 0, 0, site=site)
        return s
    count = 0
    while count < n - 1:
        ch = stream.getc()
        if ch is None:
            break
        rt.write_byte(s, ch, count, site=site)
        count += 1
        if ch == NEWLINE:
            break
    if count == 0:
        return None
    rt.write_byte(s, 0, count, site=site)
    return s


# ----------------------------------------------------------------------
# context-aware interceptors


def _clamped(rt: Runtime, site: str, requested: int, value: int) -> int:
    """Clamp a requested byte count to the destination estimate."""
    performed = min(requested, value)
    if performed < requested:
        rt.counters.bytes_clamped += requested - performed
        rt.log(EventKind.CLAMP, site, f"clamped {requested} -> {performed}")
    return performed


def cs_strlen(rt: Runtime, s: Ref, *, site: str = "strlen") -> int:
    """strlen bounded by the destination's introspected size.

    An Invalid estimate means nothing is readable: the scan degenerates to
    length 0 without touching memory. Unknown disables the bound entirely.
    """
    est = rt.size_right(s)
    return ref_strnlen(rt, s, est.value, site=site)


def cs_gets(rt: Runtime, s: Ref, stream: InputStream) -> Ref | None:
    """gets rewritten as fgets into the introspected buffer size.

    Unlike ISO gets, a newline that fits is retained, exactly as fgets
    would keep it; the run reports make that divergence visible.
    """
    est = rt.size_right(s)
    if est.kind is EstimateKind.INVALID:
        return None
    return ref_fgets(rt, s, est.value, stream, site="gets")


def cs_memcpy(rt: Runtime, dest: Ref, src: Ref, n: int) -> Ref:
    """memcpy with the copy length clamped to the destination's room."""
    est = rt.size_right(dest)
    return ref_memcpy(rt, dest, src, _clamped(rt, "memcpy", n, est.value), site="memcpy")


def cs_memset(rt: Runtime, dest: Ref, c: int, n: int) -> Ref:
    """memset with the fill length clamped to the destination's room."""
    est = rt.size_right(dest)
    return ref_memset(rt, dest, c, _clamped(rt, "memset", n, est.value), site="memset")


def cs_strncpy(rt: Runtime, dest: Ref, src: Ref, n: int) -> Ref:
    """strncpy with n clamped to the destination's room."""
    est = rt.size_right(dest)
    return ref_strncpy(rt, dest, src, _clamped(rt, "strncpy", n, est.value), site="strncpy")


def cs_strcpy(rt: Runtime, dest: Ref, src: Ref) -> Ref:
    """strcpy that truncates to fit and always NUL-terminates.

    Copies min(strlen(src)+1, room) bytes; when truncated the final copied
    byte is forced to NUL.
    """
    site = "strcpy"
    est = rt.size_right(dest)
    if est.value == 0:
        return dest
    srclen = cs_strlen(rt, src, site=site)
    total = srclen + 1
    performed = min(total, est.value)
    data_bytes = performed - 1
    for i in range(data_bytes):
        rt.write_byte(dest, rt.read_byte(src, i, site=site), i, site=site)
    rt.write_byte(dest, 0, data_bytes, site=site)
    if performed < total:
        rt.counters.bytes_clamped += total - performed
        rt.log(EventKind.TRUNCATION, site, f"truncated {srclen} -> {data_bytes}")
    return dest


def cs_strcat(rt: Runtime, dest: Ref, src: Ref) -> Ref:
    """strcat that keeps the result inside dest and NUL-terminated.

    With room for the terminator, copies min(strlen(src), room-1) bytes and
    writes the NUL; with no room at all the concatenation is dropped whole.
    """
    site = "strcat"
    d = cs_strlen(rt, dest, site=site)
    est = rt.size_right(dest)
    room = est.value - d if est.value > d else 0
    if room == 0:
        rt.log(EventKind.TRUNCATION, site, "concatenation dropped")
        return dest
    srclen = cs_strlen(rt, src, site=site)
    copy = min(srclen, room - 1)
    for i in range(copy):
        rt.write_byte(dest, rt.read_byte(src, i, site=site), d + i, site=site)
    rt.write_byte(dest, 0, d + copy, site=site)
    if copy < srclen:
        rt.counters.bytes_clamped += srclen - copy
        rt.log(EventKind.TRUNCATION, site, f"truncated {srclen} -> {copy}")
    return dest


# ----------------------------------------------------------------------
# call plumbing


@dataclass(frozen=True)
class LibcCall:
    """One libc invocation: function name plus resolved arguments."""

    function: str
    args: tuple = ()


# name -> (callable, wants stdin stream). strnlen and fgets already take an
# explicit bound, so their "interceptor" is the reference implementation.
REF_FUNCTIONS = {
    "strlen": (ref_strlen, False),
    "strnlen": (ref_strnlen, False),
    "strcpy": (ref_strcpy, False),
    "strncpy": (ref_strncpy, False),
    "strcat": (ref_strcat, False),
    "memcpy": (ref_memcpy, False),
    "memset": (ref_memset, False),
    "gets": (ref_gets, True),
    "fgets": (ref_fgets, True),
}

CS_FUNCTIONS = {
    "strlen": (cs_strlen, False),
    "strnlen": (ref_strnlen, False),
    "strcpy": (cs_strcpy, False),
    "strncpy": (cs_strncpy, False),
    "strcat": (cs_strcat, False),
    "memcpy": (cs_memcpy, False),
    "memset": (cs_memset, False),
    "gets": (cs_gets, True),
    "fgets": (ref_fgets, True),
}

FUNCTION_NAMES = tuple(REF_FUNCTIONS)
