"""Scenario DSL: parse, interpret, and report on overflow reproductions.

A scenario is a line-oriented text program. One command per line, ``#``
starts a comment, quoted byte literals accept ``\\n``, ``\\0``, ``\\xNN``
(plus ``\\\\`` and ``\\"``), offsets and counts are decimal:

    alloc <name> <size> [heap|stack|global]   declare a buffer
    free <name>                               release it (checked)
    poke <name> <offset> "<bytes>"            setup write, bypasses checks
    peek <name> <offset> <len>                setup read, bypasses checks
    store <name> <offset> "<bytes>"           checked user-level write
    load <name> <offset> <len>                checked user-level read
    stdin "<bytes>"                           append bytes to the input stream
    call <function> <args...>                 run a libc operation
    expect_bytes <name> <offset> "<bytes>"    assert buffer contents
    expect_return <value>                     assert the last call's result
    expect_outcome <OUTCOME>                  assert the final run outcome

Call arguments are buffer names (optionally ``name+offset``), decimal
counts, or single-byte literals. ``expect_outcome`` may appear anywhere;
it is collected up front and checked after the run, so it works for runs
that abort. The bundled corpus reproduces five public CVEs at desk scale.
"""

import enum
from dataclasses import dataclass, field
from importlib import resources

from .arena import Region, SIZE_MAX
from .backends import Counters
from .libc import FUNCTION_NAMES, InputStream, LibcCall
from .policy import MITIGATION_KINDS, MANUFACTURED_SEQUENCE, Event, RunAborted, Runtime, execute


class Outcome(str, enum.Enum):
    COMPLETED_CLEAN = "COMPLETED_CLEAN"
    MITIGATED_CONTINUED = "MITIGATED_CONTINUED"
    ABORTED_DETECTED = "ABORTED_DETECTED"
    SILENT_CORRUPTION = "SILENT_CORRUPTION"


class ParseError(ValueError):
    """Scenario text rejected; the message names the offending line."""


@dataclass(frozen=True)
class Command:
    verb: str
    args: tuple
    line: int


@dataclass
class Scenario:
    name: str
    commands: list[Command]
    # (backend, policy) -> Outcome, used by the corpus matrix self-check.
    expected: dict[tuple[str, str], Outcome] = field(default_factory=dict)


# ----------------------------------------------------------------------
# lexing


def _decode_literal(text: str, line: int) -> bytes:
    out = bytearray()
    i = 0
    while i < len(text):
        c = text[i]
        if c != "\\":
            out.extend(c.encode("utf-8"))
            i += 1
            continue
        if i + 1 >= len(text):
            raise ParseError(f"malformed escape at end of literal (line {line})")
        e = text[i + 1]
        if e == "n":
            out.append(0x0A)
            i += 2
        elif e == "0":
            out.append(0x00)
            i += 2
        elif e == "\\":
            out.append(0x5C)
            i += 2
        elif e == '"':
            out.append(0x22)
            i += 2
        elif e == "x":
            hexpart = text[i + 2 : i + 4]
            if len(hexpart) != 2:
                raise ParseError(f"malformed escape '\\x{hexpart}' (line {line})")
            try:
                out.append(int(hexpart, 16))
            except ValueError:
                raise ParseError(f"malformed escape '\\x{hexpart}' (line {line})") from None
            i += 4
        else:
            raise ParseError(f"malformed escape '\\{e}' (line {line})")
    return bytes(out)


def _tokenize(text: str, line: int) -> list[tuple[str, bool]]:
    """Split one line into (token, was_quoted) pairs; '#' starts a comment."""
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t":
            i += 1
            continue
        if c == "#":
            break
        if c == '"':
            j = i + 1
            buf = []
            while j < n and text[j] != '"':
                if text[j] == "\\":
                    if j + 1 >= n:
                        raise ParseError(f"unterminated escape (line {line})")
                    buf.append(text[j : j + 2])
                    j += 2
                else:
                    buf.append(text[j])
                    j += 1
            if j >= n:
                raise ParseError(f"unterminated string literal (line {line})")
            tokens.append(("".join(buf), True))
            i = j + 1
        else:
            j = i
            while j < n and text[j] not in ' \t#"':
                j += 1
            tokens.append((text[i:j], False))
            i = j
    return tokens


# ----------------------------------------------------------------------
# parsing


_CALL_SIGS = {
    "strlen": ("ref",),
    "strnlen": ("ref", "count"),
    "strcpy": ("ref", "ref"),
    "strncpy": ("ref", "ref", "count"),
    "strcat": ("ref", "ref"),
    "memcpy": ("ref", "ref", "count"),
    "memset": ("ref", "byte", "count"),
    "gets": ("ref",),
    "fgets": ("ref", "count"),
}

_REGIONS = {r.value for r in Region}


def _want_bare(tok: tuple[str, bool], what: str, line: int) -> str:
    text, quoted = tok
    if quoted:
        raise ParseError(f"expected {what}, got quoted literal (line {line})")
    return text


def _want_int(tok: tuple[str, bool], what: str, line: int) -> int:
    text = _want_bare(tok, what, line)
    if not text.isdigit():
        raise ParseError(f"expected {what}, got '{text}' (line {line})")
    value = int(text)
    if value > SIZE_MAX:
        raise ParseError(f"{what} {value} exceeds SIZE_MAX (line {line})")
    return value


def _want_ref(tok: tuple[str, bool], declared: set, line: int) -> tuple[str, int]:
    text = _want_bare(tok, "buffer name", line)
    name, plus, off = text.partition("+")
    offset = 0
    if plus:
        if not off.isdigit():
            raise ParseError(f"bad offset in '{text}' (line {line})")
        offset = int(off)
    if name not in declared:
        raise ParseError(f"undeclared buffer '{name}' (line {line})")
    return (name, offset)


def _want_byte(tok: tuple[str, bool], line: int) -> int:
    text, quoted = tok
    if quoted:
        data = _decode_literal(text, line)
        if len(data) != 1:
            raise ParseError(f"byte literal must be exactly one byte (line {line})")
        return data[0]
    if not text.isdigit() or int(text) > 255:
        raise ParseError(f"expected byte value 0..255, got '{text}' (line {line})")
    return int(text)


def parse(text: str, name: str = "scenario") -> Scenario:
    """Parse scenario text; errors name the offending line."""
    commands: list[Command] = []
    declared: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize(raw, lineno)
        if not tokens:
            continue
        verb = _want_bare(tokens[0], "command verb", lineno)
        args = tokens[1:]

        def arity(n):
            if len(args) != n:
                raise ParseError(f"{verb} takes {n} argument(s), got {len(args)} (line {lineno})")

        if verb == "alloc":
            if len(args) not in (2, 3):
                raise ParseError(f"alloc takes 2 or 3 arguments (line {lineno})")
            bufname = _want_bare(args[0], "buffer name", lineno)
            if bufname in declared:
                raise ParseError(f"duplicate buffer '{bufname}' (line {lineno})")
            size = _want_int(args[1], "size", lineno)
            region = "heap"
            if len(args) == 3:
                region = _want_bare(args[2], "region", lineno)
                if region not in _REGIONS:
                    raise ParseError(f"unknown region '{region}' (line {lineno})")
            declared.add(bufname)
            commands.append(Command("alloc", (bufname, size, region), lineno))
        elif verb == "free":
            arity(1)
            ref = _want_ref(args[0], declared, lineno)
            commands.append(Command("free", (ref,), lineno))
        elif verb in ("poke", "store", "expect_bytes"):
            arity(3)
            ref = _want_ref(args[0], declared, lineno)
            offset = _want_int(args[1], "offset", lineno)
            text_, quoted = args[2]
            if not quoted:
                raise ParseError(f"{verb} needs a quoted byte literal (line {lineno})")
            data = _decode_literal(text_, lineno)
            commands.append(Command(verb, (ref, offset, data), lineno))
        elif verb in ("peek", "load"):
            arity(3)
            ref = _want_ref(args[0], declared, lineno)
            offset = _want_int(args[1], "offset", lineno)
            length = _want_int(args[2], "length", lineno)
            commands.append(Command(verb, (ref, offset, length), lineno))
        elif verb == "stdin":
            arity(1)
            text_, quoted = args[0]
            if not quoted:
                raise ParseError(f"stdin needs a quoted byte literal (line {lineno})")
            commands.append(Command("stdin", (_decode_literal(text_, lineno),), lineno))
        elif verb == "call":
            if not args:
                raise ParseError(f"call needs a function name (line {lineno})")
            func = _want_bare(args[0], "function name", lineno)
            if func not in _CALL_SIGS:
                raise ParseError(f"unknown function '{func}' (line {lineno})")
            sig = _CALL_SIGS[func]
            if len(args) - 1 != len(sig):
                raise ParseError(
                    f"{func} takes {len(sig)} argument(s), got {len(args) - 1} (line {lineno})"
                )
            call_args = []
            for kind, tok in zip(sig, args[1:]):
                if kind == "ref":
                    call_args.append(("ref",) + _want_ref(tok, declared, lineno))
                elif kind == "count":
                    call_args.append(("count", _want_int(tok, "count", lineno)))
                else:
                    call_args.append(("byte", _want_byte(tok, lineno)))
            commands.append(Command("call", (func, tuple(call_args)), lineno))
        elif verb == "expect_return":
            arity(1)
            text_, quoted = args[0]
            if quoted:
                raise ParseError(f"expect_return takes an int, 'null', or a ref (line {lineno})")
            if text_ == "null":
                commands.append(Command("expect_return", (("null",),), lineno))
            elif text_.isdigit():
                commands.append(Command("expect_return", (("int", int(text_)),), lineno))
            else:
                ref = _want_ref(args[0], declared, lineno)
                commands.append(Command("expect_return", (("ref",) + ref,), lineno))
        elif verb == "expect_outcome":
            arity(1)
            text_ = _want_bare(args[0], "outcome name", lineno)
            try:
                outcome = Outcome(text_)
            except ValueError:
                raise ParseError(f"unknown outcome '{text_}' (line {lineno})") from None
            commands.append(Command("expect_outcome", (outcome,), lineno))
        else:
            raise ParseError(f"unknown command '{verb}' (line {lineno})")
    return Scenario(name=name, commands=commands)


# ----------------------------------------------------------------------
# reports


@dataclass
class RunReport:
    """Everything observable about one scenario run."""

    name: str
    backend: str
    policy: str
    outcome: Outcome
    events: list[Event]
    counters: Counters
    config: dict
    expectations_checked: int
    expectation_failures: list[str]

    @property
    def all_expectations_held(self) -> bool:
        return not self.expectation_failures

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "backend": self.backend,
            "policy": self.policy,
            "outcome": self.outcome.value,
            "events": [e.to_dict() for e in self.events],
            "counters": self.counters.as_dict(),
            "config": dict(self.config),
            "expectations": {
                "checked": self.expectations_checked,
                "failures": list(self.expectation_failures),
                "flag": "FAILED_EXPECTATION" if self.expectation_failures else "ALL_HELD",
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(
            name=d["name"],
            backend=d["backend"],
            policy=d["policy"],
            outcome=Outcome(d["outcome"]),
            events=[Event.from_dict(e) for e in d["events"]],
            counters=Counters(**d["counters"]),
            config=dict(d["config"]),
            expectations_checked=d["expectations"]["checked"],
            expectation_failures=list(d["expectations"]["failures"]),
        )


# ----------------------------------------------------------------------
# interpretation


class Interpreter:
    """Execute one scenario under one (backend, policy) configuration."""

    def __init__(self, scenario: Scenario, backend, policy, *, seed: int = 0, redzone: int = 16):
        self.scenario = scenario
        self.rt = Runtime(backend, policy, redzone=redzone, seed=seed)
        self.rt.stdin = InputStream()
        self.refs: dict[str, object] = {}
        self.last_call = None  # (function, value) of the most recent call
        self.failures: list[str] = []
        self.checked = 0
        self.peeks: list[tuple[str, int, bytes]] = []

    def _resolve(self, ref_desc, extra_offset: int = 0):
        name, offset = ref_desc
        return self.refs[name].at(offset + extra_offset)

    def run(self) -> RunReport:
        # expect_outcome is position independent so it can assert on runs
        # that abort before reaching it.
        outcome_expectations = [
            c for c in self.scenario.commands if c.verb == "expect_outcome"
        ]
        try:
            for cmd in self.scenario.commands:
                if cmd.verb != "expect_outcome":
                    self._dispatch(cmd)
        except RunAborted:
            pass
        outcome = self._decide_outcome()
        for cmd in outcome_expectations:
            want = cmd.args[0]
            self.checked += 1
            if outcome is not want:
                self.failures.append(
                    f"expect_outcome: got {outcome.value}, want {want.value} (line {cmd.line})"
                )
        return self._report(outcome)

    def _decide_outcome(self) -> Outcome:
        if self.rt.aborted:
            return Outcome.ABORTED_DETECTED
        if self.rt.arena.any_spill():
            return Outcome.SILENT_CORRUPTION
        if any(e.kind in MITIGATION_KINDS for e in self.rt.events):
            return Outcome.MITIGATED_CONTINUED
        return Outcome.COMPLETED_CLEAN

    def _report(self, outcome: Outcome) -> RunReport:
        rt = self.rt
        config = {
            "backend": rt.backend.kind.value,
            "backend_label": rt.backend.label,
            "policy": rt.policy.value,
            "redzone": rt.redzone,
            "seed": rt.seed,
            "manufactured_sequence": MANUFACTURED_SEQUENCE,
            "conservative_estimates_seen": rt.conservative_seen,
        }
        return RunReport(
            name=self.scenario.name,
            backend=rt.backend.kind.value,
            policy=rt.policy.value,
            outcome=outcome,
            events=list(rt.events),
            counters=rt.counters,
            config=config,
            expectations_checked=self.checked,
            expectation_failures=list(self.failures),
        )

    def _dispatch(self, cmd: Command) -> None:
        verb = cmd.verb
        if verb == "alloc":
            name, size, region = cmd.args
            self.refs[name] = self.rt.arena.alloc(size, Region(region), tag=name)
        elif verb == "free":
            self.rt.do_free(self._resolve(cmd.args[0]))
        elif verb == "poke":
            ref, offset, data = cmd.args
            self.rt.arena.raw_write(self._resolve(ref, offset), data)
        elif verb == "peek":
            ref, offset, length = cmd.args
            data = self.rt.arena.raw_read(self._resolve(ref, offset), length)
            self.peeks.append((ref[0], ref[1] + offset, data))
        elif verb == "store":
            ref, offset, data = cmd.args
            self.rt.user_store(self._resolve(ref, offset), data)
        elif verb == "load":
            ref, offset, length = cmd.args
            self.rt.user_load(self._resolve(ref, offset), length)
        elif verb == "stdin":
            self.rt.stdin.feed(cmd.args[0])
        elif verb == "call":
            func, arg_descs = cmd.args
            call_args = []
            for desc in arg_descs:
                if desc[0] == "ref":
                    call_args.append(self._resolve(desc[1:]))
                else:
                    call_args.append(desc[1])
            result = execute(self.rt, LibcCall(func, tuple(call_args)))
            self.last_call = (func, result.value)
        elif verb == "expect_bytes":
            ref, offset, want = cmd.args
            self.checked += 1
            got = self.rt.arena.raw_read(self._resolve(ref, offset), len(want))
            if got != want:
                self.failures.append(
                    f"expect_bytes {ref[0]}+{ref[1] + offset}: got {got!r}, "
                    f"want {want!r} (line {cmd.line})"
                )
        elif verb == "expect_return":
            desc = cmd.args[0]
            self.checked += 1
            if self.last_call is None:
                self.failures.append(f"expect_return before any call (line {cmd.line})")
                return
            func, got = self.last_call
            if desc[0] == "int":
                want = desc[1]
            elif desc[0] == "null":
                want = None
            else:
                want = self._resolve(desc[1:])
            if got != want:
                self.failures.append(
                    f"expect_return after {func}: got {got!r}, want {want!r} (line {cmd.line})"
                )
        else:  # pragma: no cover - parser guarantees the verb set
            raise AssertionError(f"unhandled verb {verb}")


def run(scenario: Scenario, backend, policy, *, seed: int = 0, redzone: int = 16) -> RunReport:
    """Run a scenario under one configuration and return its report."""
    return Interpreter(scenario, backend, policy, seed=seed, redzone=redzone).run()


# ----------------------------------------------------------------------
# bundled corpus

CORPUS_NAMES = (
    "dnsmasq-memcpy",
    "dnsmasq-memset",
    "libxml2-strcat",
    "graphicsmagick-strncpy",
    "lightftp-strcat",
)

BACKEND_CHOICES = ("bounds", "shadow", "none")
POLICY_CHOICES = ("abort", "oblivious", "context", "context+fo")


def _expected_table(context_outcome: Outcome) -> dict[tuple[str, str], Outcome]:
    table: dict[tuple[str, str], Outcome] = {}
    for backend in ("bounds", "shadow"):
        table[(backend, "abort")] = Outcome.ABORTED_DETECTED
        table[(backend, "oblivious")] = Outcome.MITIGATED_CONTINUED
        table[(backend, "context")] = context_outcome
        table[(backend, "context+fo")] = Outcome.MITIGATED_CONTINUED
    for policy in POLICY_CHOICES:
        table[("none", policy)] = Outcome.SILENT_CORRUPTION
    return table


# graphicsmagick aborts under plain context because the overflow that
# remains is a user-level store no interceptor can see.
_CORPUS_EXPECTED = {
    "dnsmasq-memcpy": _expected_table(Outcome.MITIGATED_CONTINUED),
    "dnsmasq-memset": _expected_table(Outcome.MITIGATED_CONTINUED),
    "libxml2-strcat": _expected_table(Outcome.MITIGATED_CONTINUED),
    "graphicsmagick-strncpy": _expected_table(Outcome.ABORTED_DETECTED),
    "lightftp-strcat": _expected_table(Outcome.MITIGATED_CONTINUED),
}


def corpus_scenario(name: str) -> Scenario:
    """Load one bundled scenario by name, expected-outcome table attached."""
    if name not in CORPUS_NAMES:
        raise KeyError(f"no corpus scenario named '{name}'")
    text = (resources.files(__package__) / "scenarios" / f"{name}.scn").read_text("utf-8")
    scenario = parse(text, name=name)
    scenario.expected = dict(_CORPUS_EXPECTED[name])
    return scenario


def corpus() -> list[Scenario]:
    """The five bundled CVE reproductions."""
    return [corpus_scenario(name) for name in CORPUS_NAMES]


@dataclass
class MatrixEntry:
    scenario: str
    backend: str
    policy: str
    report: RunReport
    expected: Outcome | None
    matched: bool | None


def run_matrix(
    *,
    backends=BACKEND_CHOICES,
    policies=POLICY_CHOICES,
    seed: int = 0,
    redzone: int = 16,
) -> list[MatrixEntry]:
    """Run every corpus scenario under every configuration."""
    entries = []
    for scenario in corpus():
        for backend in backends:
            for policy in policies:
                report = run(scenario, backend, policy, seed=seed, redzone=redzone)
                expected = scenario.expected.get((backend, policy))
                matched = None if expected is None else report.outcome is expected
                entries.append(
                    MatrixEntry(scenario.name, backend, policy, report, expected, matched)
                )
    return entries
