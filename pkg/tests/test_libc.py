"""Reference libc operations and their context-aware interceptors.

Expected values here were derived by hand from the operation contracts
before the implementations existed, then frozen; comments mark the
derivations that are not obvious.
"""

import pytest

from overrun import EventKind, InputStream, LibcCall, RunAborted, Runtime, execute
from overrun.libc import (
    OverlapError,
    cs_gets,
    cs_memcpy,
    cs_memset,
    cs_strcat,
    cs_strcpy,
    cs_strlen,
    cs_strncpy,
    ref_fgets,
    ref_gets,
    ref_memcpy,
    ref_memset,
    ref_strcat,
    ref_strcpy,
    ref_strlen,
    ref_strncpy,
    ref_strnlen,
)


def _rt(backend="bounds", policy="abort"):
    rt = Runtime(backend, policy)
    rt.stdin = InputStream()
    return rt


def _buf(rt, size, prefill=b""):
    ref = rt.arena.alloc(size)
    if prefill:
        rt.arena.raw_write(ref, prefill)
    return ref


def _content(rt, ref):
    return bytes(rt.arena.allocation(ref).content)


def _kinds(rt):
    return [e.kind for e in rt.events]


# ----------------------------------------------------------------------
# InputStream


def test_input_stream():
    s = InputStream(b"ab")
    s.feed(b"c")
    assert s.remaining == 3
    assert [s.getc() for _ in range(4)] == [0x61, 0x62, 0x63, None]
    assert s.pos == 3
    assert s.remaining == 0


# ----------------------------------------------------------------------
# reference family


def test_ref_strlen_terminated():
    rt = _rt()
    s = _buf(rt, 8, b"abc\0xxxx")
    assert ref_strlen(rt, s) == 3
    assert rt.events == []


def test_ref_strlen_unterminated_aborts():
    rt = _rt()
    s = _buf(rt, 4, b"abcd")
    with pytest.raises(RunAborted):
        ref_strlen(rt, s)
    assert _kinds(rt) == [EventKind.OOB_READ, EventKind.ABORT]
    assert rt.events[0].site == "strlen"
    assert rt.events[0].detail == "offset 4"


def test_ref_strlen_unterminated_under_oblivious():
    # The first manufactured value is 0, so the scan stops exactly at the
    # allocation edge: strlen of an unterminated size-8 buffer is 8.
    rt = _rt(policy="oblivious")
    s = _buf(rt, 8, b"ABCDEFGH")
    assert ref_strlen(rt, s) == 8
    assert _kinds(rt) == [EventKind.OOB_READ, EventKind.MANUFACTURED_READ]
    assert rt.events[1].detail == "offset 8 -> 0"


def test_ref_strnlen_boundaries():
    rt = _rt()
    s = _buf(rt, 8, b"hello\0xx")
    assert ref_strnlen(rt, s, 0) == 0
    assert ref_strnlen(rt, s, 3) == 3
    assert ref_strnlen(rt, s, 5) == 5
    assert ref_strnlen(rt, s, 8) == 5
    unterminated = _buf(rt, 4, b"abcd")
    assert ref_strnlen(rt, unterminated, 4) == 4
    assert rt.events == []
    with pytest.raises(RunAborted):
        ref_strnlen(rt, unterminated, 5)


def test_ref_strcpy_fits():
    rt = _rt()
    dest = _buf(rt, 4)
    src = _buf(rt, 4, b"abc\0")
    assert ref_strcpy(rt, dest, src) == dest
    assert _content(rt, dest) == b"abc\0"
    assert rt.events == []


def test_ref_strcpy_overflow_aborts_at_exact_offset():
    rt = _rt()
    dest = _buf(rt, 2)
    src = _buf(rt, 4, b"abc\0")
    with pytest.raises(RunAborted):
        ref_strcpy(rt, dest, src)
    assert rt.events[0].kind is EventKind.OOB_WRITE
    assert rt.events[0].detail == "offset 2"
    assert _content(rt, dest) == b"ab"


def test_ref_strncpy_pads_with_nul():
    # Derived: prefill X's; strncpy of "ab\0" with n=6 writes a, b, then
    # four NULs; the last two prefill bytes are untouched.
    rt = _rt()
    dest = _buf(rt, 8, b"XXXXXXXX")
    src = _buf(rt, 4, b"ab\0\0")
    ref_strncpy(rt, dest, src, 6)
    assert _content(rt, dest) == b"ab\0\0\0\0XX"
    assert rt.events == []


def test_ref_strncpy_no_nul_within_n():
    rt = _rt()
    dest = _buf(rt, 4)
    src = _buf(rt, 4, b"abcd")
    ref_strncpy(rt, dest, src, 4)
    # C fidelity: no terminator when the source did not provide one.
    assert _content(rt, dest) == b"abcd"


def test_ref_strncpy_pad_overflow_aborts():
    rt = _rt()
    dest = _buf(rt, 4)
    src = _buf(rt, 2, b"a\0")
    with pytest.raises(RunAborted):
        ref_strncpy(rt, dest, src, 6)
    assert rt.events[0].detail == "offset 4"


def test_ref_strcat_appends():
    rt = _rt()
    dest = _buf(rt, 8, b"ab\0")
    src = _buf(rt, 4, b"cde\0")
    assert ref_strcat(rt, dest, src) == dest
    assert _content(rt, dest) == b"abcde\0\0\0"


def test_ref_strcat_overflow():
    # Derived: dest size 4 holding "ab"; appending "cd" writes c at 2,
    # d at 3, then the terminator lands out of bounds at offset 4.
    rt = _rt()
    dest = _buf(rt, 4, b"ab\0\0")
    src = _buf(rt, 4, b"cd\0\0")
    with pytest.raises(RunAborted):
        ref_strcat(rt, dest, src)
    assert rt.events[0].kind is EventKind.OOB_WRITE
    assert rt.events[0].detail == "offset 4"
    assert _content(rt, dest) == b"abcd"

    rt2 = _rt(policy="oblivious")
    dest2 = _buf(rt2, 4, b"ab\0\0")
    src2 = _buf(rt2, 4, b"cd\0\0")
    ref_strcat(rt2, dest2, src2)
    assert _content(rt2, dest2) == b"abcd"  # dropped terminator
    assert not rt2.arena.any_spill()
    assert EventKind.DROPPED_WRITE in _kinds(rt2)


def test_ref_memcpy_basics():
    rt = _rt()
    dest = _buf(rt, 4)
    src = _buf(rt, 4, b"wxyz")
    assert ref_memcpy(rt, dest, src, 4) == dest
    assert _content(rt, dest) == b"wxyz"


def test_ref_memcpy_same_allocation_disjoint_ok():
    rt = _rt()
    buf = _buf(rt, 8, b"abcd\0\0\0\0")
    ref_memcpy(rt, buf.at(4), buf, 4)
    assert _content(rt, buf) == b"abcdabcd"


def test_ref_memcpy_overlap_rejected():
    rt = _rt()
    buf = _buf(rt, 8)
    with pytest.raises(OverlapError):
        ref_memcpy(rt, buf.at(2), buf, 4)
    # Zero-length copies never overlap.
    ref_memcpy(rt, buf.at(2), buf, 0)


def test_ref_memset_fills():
    rt = _rt()
    dest = _buf(rt, 4)
    ref_memset(rt, dest, 0xAA, 4)
    assert _content(rt, dest) == b"\xaa\xaa\xaa\xaa"


def test_ref_gets_strips_newline():
    rt = _rt()
    s = _buf(rt, 8)
    rt.stdin.feed(b"hi\nrest")
    assert ref_gets(rt, s, rt.stdin) == s
    assert _content(rt, s) == b"hi" + b"\0" * 6
    assert rt.stdin.pos == 3
    assert rt.stdin.remaining == 4


def test_ref_gets_eof_line():
    rt = _rt()
    s = _buf(rt, 4)
    rt.stdin.feed(b"ab")
    assert ref_gets(rt, s, rt.stdin) == s
    assert _content(rt, s) == b"ab\0\0"


def test_ref_gets_empty_stream_is_null():
    rt = _rt()
    s = _buf(rt, 4, b"keep")
    assert ref_gets(rt, s, rt.stdin) is None
    assert _content(rt, s) == b"keep"


def test_ref_fgets_bounded_read():
    # Derived: n=8 takes at most 7 payload bytes of "hello world\n", so the
    # buffer ends up "hello w" + NUL with five stream bytes left.
    rt = _rt()
    s = _buf(rt, 8)
    rt.stdin.feed(b"hello world\n")
    assert ref_fgets(rt, s, 8, rt.stdin) == s
    assert _content(rt, s) == b"hello w\0"
    assert rt.stdin.pos == 7
    assert rt.stdin.remaining == 5


def test_ref_fgets_keeps_newline():
    rt = _rt()
    s = _buf(rt, 8)
    rt.stdin.feed(b"hi\nxx")
    assert ref_fgets(rt, s, 8, rt.stdin) == s
    assert _content(rt, s)[:4] == b"hi\n\0"
    assert rt.stdin.pos == 3


def test_ref_fgets_degenerate_sizes():
    rt = _rt()
    s = _buf(rt, 4, b"keep")
    rt.stdin.feed(b"data")
    assert ref_fgets(rt, s, 0, rt.stdin) is None
    assert ref_fgets(rt, s, -3, rt.stdin) is None
    assert _content(rt, s) == b"keep"
    assert rt.stdin.pos == 0
    assert ref_fgets(rt, s, 1, rt.stdin) == s
    assert _content(rt, s) == b"\0eep"
    assert rt.stdin.pos == 0


def test_ref_fgets_eof_is_null():
    rt = _rt()
    s = _buf(rt, 4)
    assert ref_fgets(rt, s, 4, rt.stdin) is None


# ----------------------------------------------------------------------
# context-aware interceptors


@pytest.fixture(params=["bounds", "shadow"])
def cs_rt(request):
    rt = Runtime(request.param, "context")
    rt.stdin = InputStream()
    return rt


def test_cs_strlen_terminated(cs_rt):
    s = _buf(cs_rt, 8, b"abc\0xxxx")
    assert cs_strlen(cs_rt, s) == 3
    assert cs_rt.events == []


def test_cs_strlen_unterminated_stops_at_edge(cs_rt):
    s = _buf(cs_rt, 8, b"ABCDEFGH")
    assert cs_strlen(cs_rt, s) == 8
    assert cs_rt.events == []
    assert not cs_rt.aborted


def test_cs_strlen_counter_cost():
    rt = Runtime("bounds", "context")
    s = rt.arena.alloc(8)
    cs_strlen(rt, s)
    assert rt.counters.metadata_lookups == 1
    assert rt.counters.shadow_reads == 0
    rt2 = Runtime("shadow", "context")
    s2 = rt2.arena.alloc(8)
    rt2.arena.raw_write(s2, b"ABCDEFGH")
    cs_strlen(rt2, s2)
    # Walk of 8 addressable cells plus the stopping redzone cell.
    assert rt2.counters.shadow_reads == 9


def test_cs_strlen_freed_buffer_is_zero(cs_rt):
    s = _buf(cs_rt, 8, b"ABCDEFGH")
    cs_rt.arena.free(s)
    assert cs_strlen(cs_rt, s) == 0


def test_cs_gets_truncates_long_line(cs_rt):
    # Derived: an 11-byte line into an 8-byte buffer keeps 7 payload bytes;
    # the unread tail ("789" and the newline) stays in the stream.
    s = _buf(cs_rt, 8)
    cs_rt.stdin.feed(b"0123456789\n")
    assert cs_gets(cs_rt, s, cs_rt.stdin) == s
    assert _content(cs_rt, s) == b"0123456\0"
    assert cs_rt.stdin.pos == 7
    assert cs_rt.stdin.remaining == 4
    assert not cs_rt.arena.any_spill()


def test_cs_gets_retains_newline_that_fits(cs_rt):
    # Documented divergence from the reference gets: the bounded rewrite
    # behaves like fgets and keeps a newline that fits.
    s = _buf(cs_rt, 8)
    cs_rt.stdin.feed(b"hi\n")
    assert cs_gets(cs_rt, s, cs_rt.stdin) == s
    assert _content(cs_rt, s)[:4] == b"hi\n\0"
    assert cs_rt.stdin.pos == 3


def test_cs_gets_one_byte_buffer_at_eof(cs_rt):
    # Frozen corner: with room only for the terminator, the bounded form
    # still returns the buffer where the reference would return null.
    s = _buf(cs_rt, 1)
    assert cs_gets(cs_rt, s, cs_rt.stdin) == s
    assert _content(cs_rt, s) == b"\0"


def test_cs_gets_freed_buffer_returns_null(cs_rt):
    s = _buf(cs_rt, 8)
    cs_rt.arena.free(s)
    cs_rt.stdin.feed(b"data\n")
    assert cs_gets(cs_rt, s, cs_rt.stdin) is None
    assert cs_rt.stdin.pos == 0


def test_cs_memcpy_clamps(cs_rt):
    src = _buf(cs_rt, 16, b"0123456789abcdef")
    dest = _buf(cs_rt, 4)
    assert cs_memcpy(cs_rt, dest, src, 10) == dest
    assert _content(cs_rt, dest) == b"0123"
    assert not cs_rt.arena.any_spill()
    assert _kinds(cs_rt) == [EventKind.CLAMP]
    assert cs_rt.events[0].site == "memcpy"
    assert cs_rt.events[0].detail == "clamped 10 -> 4"
    assert cs_rt.counters.bytes_clamped == 6


def test_cs_memcpy_fitting_copy_is_silent(cs_rt):
    src = _buf(cs_rt, 8, b"abcdefgh")
    dest = _buf(cs_rt, 8)
    cs_memcpy(cs_rt, dest, src, 8)
    assert _content(cs_rt, dest) == b"abcdefgh"
    assert cs_rt.events == []
    assert cs_rt.counters.bytes_clamped == 0


def test_cs_memcpy_overlap_still_rejected(cs_rt):
    buf = _buf(cs_rt, 8)
    with pytest.raises(OverlapError):
        cs_memcpy(cs_rt, buf, buf.at(1), 10)


def test_cs_memset_clamps(cs_rt):
    dest = _buf(cs_rt, 4)
    cs_memset(cs_rt, dest, 0xFF, 100)
    assert _content(cs_rt, dest) == b"\xff\xff\xff\xff"
    assert cs_rt.events[0].detail == "clamped 100 -> 4"
    assert cs_rt.counters.bytes_clamped == 96


def test_cs_strncpy_clamps(cs_rt):
    src = _buf(cs_rt, 16, b"abcdefgh\0")
    dest = _buf(cs_rt, 4)
    cs_strncpy(cs_rt, dest, src, 10)
    # strncpy fidelity: four bytes copied, no terminator forced.
    assert _content(cs_rt, dest) == b"abcd"
    assert cs_rt.events[0].detail == "clamped 10 -> 4"
    assert cs_rt.counters.bytes_clamped == 6


def test_cs_strcpy_truncates_and_terminates(cs_rt):
    # Derived: copying "abcdef" (7 bytes with NUL) into 4 keeps 3 payload
    # bytes plus the forced terminator.
    src = _buf(cs_rt, 8, b"abcdef\0")
    dest = _buf(cs_rt, 4, b"????")
    assert cs_strcpy(cs_rt, dest, src) == dest
    assert _content(cs_rt, dest) == b"abc\0"
    truncs = [e for e in cs_rt.events if e.kind is EventKind.TRUNCATION]
    assert [e.detail for e in truncs] == ["truncated 6 -> 3"]
    assert cs_rt.counters.bytes_clamped == 3


def test_cs_strcpy_fits_silently(cs_rt):
    src = _buf(cs_rt, 4, b"abc\0")
    dest = _buf(cs_rt, 8)
    cs_strcpy(cs_rt, dest, src)
    assert _content(cs_rt, dest) == b"abc\0\0\0\0\0"
    assert cs_rt.events == []


def test_cs_strcpy_no_room_is_a_no_op(cs_rt):
    src = _buf(cs_rt, 4, b"ab\0\0")
    dest = _buf(cs_rt, 4, b"keep")
    cs_rt.arena.free(dest)
    assert cs_strcpy(cs_rt, dest, src) == dest
    assert _content(cs_rt, dest) == b"keep"


def test_cs_strcat_truncates(cs_rt):
    # Derived: "ab" + "cdefgh" into size 8 keeps 5 appended bytes and the
    # terminator: "abcdefg\0".
    dest = _buf(cs_rt, 8, b"ab\0")
    src = _buf(cs_rt, 8, b"cdefgh\0")
    assert cs_strcat(cs_rt, dest, src) == dest
    assert _content(cs_rt, dest) == b"abcdefg\0"
    truncs = [e for e in cs_rt.events if e.kind is EventKind.TRUNCATION]
    assert [e.detail for e in truncs] == ["truncated 6 -> 5"]
    assert cs_rt.counters.bytes_clamped == 1


def test_cs_strcat_fits_silently(cs_rt):
    dest = _buf(cs_rt, 8, b"ab\0")
    src = _buf(cs_rt, 4, b"cde\0")
    cs_strcat(cs_rt, dest, src)
    assert _content(cs_rt, dest) == b"abcde\0\0\0"
    assert cs_rt.events == []


def test_cs_strcat_drops_when_no_room(cs_rt):
    dest = _buf(cs_rt, 8, b"ABCDEFGH")  # full, unterminated
    src = _buf(cs_rt, 4, b"xy\0\0")
    cs_strcat(cs_rt, dest, src)
    assert _content(cs_rt, dest) == b"ABCDEFGH"
    truncs = [e for e in cs_rt.events if e.kind is EventKind.TRUNCATION]
    assert [e.detail for e in truncs] == ["concatenation dropped"]


# ----------------------------------------------------------------------
# dispatch


def test_execute_selects_family_by_policy():
    rt = Runtime("bounds", "context")
    dest = rt.arena.alloc(4)
    src = rt.arena.alloc(8)
    rt.arena.raw_write(src, b"0123456\0")
    result = execute(rt, LibcCall("memcpy", (dest, src, 8)))
    assert result.value == dest
    assert [e.kind for e in result.events] == [EventKind.CLAMP]

    rt2 = Runtime("bounds", "abort")
    dest2 = rt2.arena.alloc(4)
    src2 = rt2.arena.alloc(8)
    with pytest.raises(RunAborted):
        execute(rt2, LibcCall("memcpy", (dest2, src2, 8)))


def test_execute_passthrough_interceptors():
    # strnlen and fgets already carry explicit bounds; the interceptor
    # table maps them to the reference implementations unchanged.
    rt = Runtime("bounds", "context")
    s = rt.arena.alloc(8)
    rt.arena.raw_write(s, b"abc\0")
    assert execute(rt, LibcCall("strnlen", (s, 8))).value == 3
    rt.stdin = InputStream(b"xy\n")
    assert execute(rt, LibcCall("fgets", (s, 8))).value == s
    assert _content(rt, s)[:4] == b"xy\n\0"
