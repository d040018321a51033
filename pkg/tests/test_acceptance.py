"""Acceptance gate: one test per shipping criterion, one verdict line each.

Run with ``pytest -v tests/test_acceptance.py`` for the per-criterion
pass/fail lines, or ``-s`` to also see the printed summaries.
"""

import io
import json
import random
from contextlib import redirect_stdout

import pytest

from overrun import (
    EstimateKind,
    EventKind,
    LibcCall,
    Outcome,
    Runtime,
    SizeEstimate,
    bench_size_right,
    cli,
    corpus_scenario,
    execute,
    run,
)
from overrun.scenario import CORPUS_NAMES

from differential import BACKENDS, GENERATORS, run_cell

DETECTING_BACKENDS = ("bounds", "shadow")
ALL_POLICIES = ("abort", "oblivious", "context", "context+fo")


def _verdict(n, text):
    print(f"ACCEPTANCE PASS: criterion {n} - {text}")


def test_criterion_1_cve_matrix_under_context_policy():
    expected = {
        "dnsmasq-memcpy": Outcome.MITIGATED_CONTINUED,
        "dnsmasq-memset": Outcome.MITIGATED_CONTINUED,
        "libxml2-strcat": Outcome.MITIGATED_CONTINUED,
        "graphicsmagick-strncpy": Outcome.ABORTED_DETECTED,
        "lightftp-strcat": Outcome.MITIGATED_CONTINUED,
    }
    for backend in DETECTING_BACKENDS:
        for name, want in expected.items():
            report = run(corpus_scenario(name), backend, "context")
            assert report.outcome is want, f"{name}/{backend}: {report.outcome}"
            assert report.all_expectations_held, report.expectation_failures
            if want is Outcome.ABORTED_DETECTED:
                last = report.events[-1]
                assert last.kind is EventKind.ABORT
                assert last.site == "user", "abort must come from the user-level store"
    _verdict(1, "context policy mitigates 4/5 CVE reproductions and aborts the user-level one")


def test_criterion_2_abort_policy_detects_every_cve():
    for backend in DETECTING_BACKENDS:
        for name in CORPUS_NAMES:
            report = run(corpus_scenario(name), backend, "abort")
            assert report.outcome is Outcome.ABORTED_DETECTED, f"{name}/{backend}"
            assert report.events[-1].kind is EventKind.ABORT
    _verdict(2, "abort policy detects 5/5 CVE reproductions on both detecting backends")


def test_criterion_3_null_backend_degrades_to_silent_corruption():
    for policy in ALL_POLICIES:
        for name in CORPUS_NAMES:
            report = run(corpus_scenario(name), "none", policy)
            assert report.outcome is Outcome.SILENT_CORRUPTION, f"{name}/{policy}"
            assert report.all_expectations_held, report.expectation_failures
    _verdict(3, "null backend yields silent corruption for all 5 scenarios under all 4 policies")


def test_criterion_4_interceptor_transparency_differential():
    total = 0
    for function in sorted(GENERATORS):
        for backend in BACKENDS:
            total += run_cell(function, backend, 1000)
    assert total == 9 * 3 * 1000
    _verdict(4, f"{total} valid-input cases bit-identical across 9 functions x 3 backends")


def test_criterion_5_size_right_exactness():
    rng = random.Random("size-right-exactness")
    checked = 0
    for backend_kind in DETECTING_BACKENDS:
        rt = Runtime(backend_kind, "context", redzone=8)
        refs = [rt.arena.alloc(rng.randrange(1, 100)) for _ in range(40)]
        for ref in rng.sample(refs, 10):
            rt.arena.free(ref)
        for _ in range(5000):
            ref = rng.choice(refs).at(rng.randrange(0, 120))
            est = rt.backend.size_right(ref)
            truth = rt.arena.truth_remaining(ref)
            if truth == 0:
                assert est.kind is EstimateKind.INVALID, f"{backend_kind}: {ref}"
            else:
                assert est == SizeEstimate.exact(truth), f"{backend_kind}: {ref}"
            checked += 1
    assert checked == 10000
    _verdict(5, f"size_right exact against ground truth on {checked} random queries")


def test_criterion_6_classic_failure_oblivious_invariants():
    # Out-of-bounds writes must not change any observable memory.
    rt = Runtime("bounds", "oblivious")
    ref = rt.arena.alloc(8)
    rt.arena.raw_write(ref, b"ABCDEFGH")
    for off in range(8, 16):
        rt.write_byte(ref, 0x2A, delta=off)
    assert bytes(rt.arena.allocation(ref).content) == b"ABCDEFGH"
    assert not rt.arena.any_spill()

    # Out-of-bounds reads manufacture the alternating 0/1 sequence.
    values = [rt.read_byte(ref, delta=8 + i) for i in range(6)]
    assert values == [0, 1, 0, 1, 0, 1]

    # strlen over an unterminated buffer stops at the first manufactured
    # zero, one past the end.
    for length in (1, 5, 32):
        rt2 = Runtime("shadow", "oblivious")
        s = rt2.arena.alloc(length)
        rt2.arena.raw_write(s, b"Z" * length)
        result = execute(rt2, LibcCall("strlen", (s,)))
        assert result.value == length
        assert not rt2.aborted
    _verdict(6, "oblivious recovery discards writes, alternates reads, bounds strlen at size")


def test_criterion_7_introspection_cost_asymmetry():
    lengths = (10, 100, 500, 1000)
    shadow = bench_size_right("shadow", lengths)
    bounds = bench_size_right("bounds", lengths)

    # Affine fit for the shadow walk: reads = a*L + b, solved from the
    # first two points and verified on the rest.
    (l0, r0), (l1, r1) = (
        (shadow[0].string_length, shadow[0].shadow_reads),
        (shadow[1].string_length, shadow[1].shadow_reads),
    )
    a = (r1 - r0) / (l1 - l0)
    b = r0 - a * l0
    assert (a, b) == (1.0, 2.0)
    for r in shadow:
        assert r.shadow_reads == r.string_length + 2

    assert [r.metadata_lookups for r in bounds] == [1, 1, 1, 1]
    assert all(r.shadow_reads == 0 for r in bounds)

    ratio = shadow[-1].shadow_reads / shadow[0].shadow_reads
    assert 80 <= ratio <= 110
    assert ratio == pytest.approx(83.5)
    _verdict(7, f"shadow cost = L+2, bounds cost = 1, length-1000/10 ratio {ratio}")


def test_criterion_8_corpus_json_byte_identical():
    def capture():
        buf = io.StringIO()
        with redirect_stdout(buf):
            code = cli.main(["corpus", "--all", "--format", "json"])
        return code, buf.getvalue()

    code1, out1 = capture()
    code2, out2 = capture()
    assert code1 == code2 == 0
    assert out1 == out2, "corpus JSON must be byte-identical across runs"
    doc = json.loads(out1)
    assert len(doc["matrix"]) == 60
    assert "wall" not in out1
    _verdict(8, "corpus matrix JSON is byte-identical across repeated runs")
