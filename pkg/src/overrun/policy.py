"""Recovery policies and the engine that applies them to every access.

A Runtime wires one arena to one metadata backend and one policy. Every
checked byte access produces a verdict; non-Allowed verdicts are handled
according to the policy:

* abort: stop the run at the first detected error (the conventional
  memory-safety tool baseline);
* oblivious: classic failure-oblivious execution; out-of-bounds writes are
  discarded and out-of-bounds reads return manufactured values;
* context: libc calls are dispatched to context-aware interceptors that
  clamp or truncate using size_right, so most errors never become verdicts;
  anything that still slips through aborts;
* context+fo: context-aware interceptors with oblivious recovery as the
  fallback for unguarded accesses.

Aborts are terminal run outcomes, not process death: the engine raises
RunAborted and the caller turns that into a report.
"""

import enum
from dataclasses import dataclass

from .arena import SIZE_MAX, AccessKind, Arena, InvalidFree, OffsetOverflow, Ref
from .backends import AccessVerdict, Counters, EstimateKind, make_backend


class Policy(str, enum.Enum):
    ABORT = "abort"
    CLASSIC_FO = "oblivious"
    CONTEXT_AWARE = "context"
    CONTEXT_FO = "context+fo"

    @property
    def uses_interceptors(self) -> bool:
        return self in (Policy.CONTEXT_AWARE, Policy.CONTEXT_FO)

    @property
    def oblivious_recovery(self) -> bool:
        return self in (Policy.CLASSIC_FO, Policy.CONTEXT_FO)


class EventKind(str, enum.Enum):
    OOB_READ = "oob_read"
    OOB_WRITE = "oob_write"
    USE_AFTER_FREE = "use_after_free"
    CLAMP = "clamp"
    TRUNCATION = "truncation"
    MANUFACTURED_READ = "manufactured_read"
    DROPPED_WRITE = "dropped_write"
    ABORT = "abort"


@dataclass(frozen=True, slots=True)
class Event:
    """One observable runtime decision, appended in program order."""

    kind: EventKind
    site: str
    detail: str

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "site": self.site, "detail": self.detail}

    @classmethod
    def from_dict(cls, d: dict) -> "Event":
        return cls(EventKind(d["kind"]), d["site"], d["detail"])


# Events that mark a run as mitigated rather than clean.
MITIGATION_KINDS = frozenset(
    {EventKind.CLAMP, EventKind.TRUNCATION, EventKind.DROPPED_WRITE, EventKind.MANUFACTURED_READ}
)

MANUFACTURED_SEQUENCE = "alternating 0/1"


@dataclass
class FOState:
    """Failure-oblivious bookkeeping; the manufactured counter only grows."""

    manufactured_count: int = 0


def manufactured_value(fo: FOState) -> int:
    """Deterministic stand-in value for an out-of-bounds read: 0, 1, 0, ..."""
    value = fo.manufactured_count % 2
    fo.manufactured_count += 1
    return value


class ActionKind(enum.Enum):
    ABORT = "abort"
    DISCARD = "discard"
    MANUFACTURE = "manufacture"


@dataclass(frozen=True, slots=True)
class ActionTaken:
    kind: ActionKind
    value: int | None = None


def handle_verdict(
    verdict: AccessVerdict, access: AccessKind, policy: Policy, fo: FOState
) -> ActionTaken:
    """Decide what to do with a non-Allowed verdict under a policy."""
    if verdict is AccessVerdict.ALLOWED:
        raise ValueError("handle_verdict is only for non-Allowed verdicts")
    if policy.oblivious_recovery:
        if access is AccessKind.WRITE:
            return ActionTaken(ActionKind.DISCARD)
        return ActionTaken(ActionKind.MANUFACTURE, manufactured_value(fo))
    return ActionTaken(ActionKind.ABORT)


class RunAborted(Exception):
    """Raised when the policy halts the run; carries the abort event."""

    def __init__(self, event: Event):
        super().__init__(event.detail)
        self.event = event


class Runtime:
    """One arena + one backend + one policy, plus the event log."""

    def __init__(self, backend, policy, *, redzone: int = 16, seed: int = 0):
        self.counters = Counters()
        self.backend = make_backend(backend, self.counters, redzone=redzone)
        self.arena = Arena(self.backend)
        self.policy = Policy(policy)
        self.redzone = redzone
        self.seed = seed
        self.fo = FOState()
        self.events: list[Event] = []
        self.stdin = None  # bound lazily; libc.InputStream to avoid an import cycle
        self.aborted = False
        self.conservative_seen = False

    # ------------------------------------------------------------------
    # introspection

    def size_right(self, ref: Ref):
        est = self.backend.size_right(ref)
        if est.kind is EstimateKind.CONSERVATIVE:
            # Overestimates stay sound for detection but let clamped writes
            # land in padding; worth flagging on the report.
            self.conservative_seen = True
        return est

    # ------------------------------------------------------------------
    # checked byte traffic

    def read_byte(self, ref: Ref, delta: int = 0, site: str = "user") -> int:
        off = ref.offset + delta
        if off > SIZE_MAX:
            raise OffsetOverflow(f"offset {ref.offset}+{delta} overflows")
        verdict = self.backend._check(ref.alloc_id, off, 1, AccessKind.READ)
        if verdict is AccessVerdict.ALLOWED:
            return self.arena._read1(ref.alloc_id, off)
        return self._recover(verdict, AccessKind.READ, site, off)

    def write_byte(self, ref: Ref, value: int, delta: int = 0, site: str = "user") -> None:
        off = ref.offset + delta
        if off > SIZE_MAX:
            raise OffsetOverflow(f"offset {ref.offset}+{delta} overflows")
        verdict = self.backend._check(ref.alloc_id, off, 1, AccessKind.WRITE)
        if verdict is AccessVerdict.ALLOWED:
            self.arena._write1(ref.alloc_id, off, value)
            return
        self._recover(verdict, AccessKind.WRITE, site, off)

    def user_load(self, ref: Ref, n: int) -> bytes:
        out = bytearray(n)
        for i in range(n):
            out[i] = self.read_byte(ref, i, site="user")
        return bytes(out)

    def user_store(self, ref: Ref, data: bytes) -> None:
        for i, b in enumerate(data):
            self.write_byte(ref, b, i, site="user")

    def do_free(self, ref: Ref, site: str = "free") -> None:
        """Free through the policy: invalid frees are detected errors."""
        try:
            self.arena.free(ref)
        except InvalidFree as err:
            if err.reason == "double free":
                verdict = AccessVerdict.USE_AFTER_FREE
                kind = EventKind.USE_AFTER_FREE
            else:
                verdict = AccessVerdict.OUT_OF_BOUNDS
                kind = EventKind.OOB_WRITE
            self.log(kind, site, err.reason)
            action = handle_verdict(verdict, AccessKind.WRITE, self.policy, self.fo)
            if action.kind is ActionKind.ABORT:
                self.abort(site, err.reason)
            self.log(EventKind.DROPPED_WRITE, site, f"{err.reason} discarded")

    # ------------------------------------------------------------------
    # recovery plumbing

    def _recover(self, verdict: AccessVerdict, access: AccessKind, site: str, off: int):
        if verdict is AccessVerdict.USE_AFTER_FREE:
            kind = EventKind.USE_AFTER_FREE
        elif access is AccessKind.READ:
            kind = EventKind.OOB_READ
        else:
            kind = EventKind.OOB_WRITE
        self.log(kind, site, f"offset {off}")
        action = handle_verdict(verdict, access, self.policy, self.fo)
        if action.kind is ActionKind.ABORT:
            self.abort(site, f"{kind.value} at offset {off}")
        if action.kind is ActionKind.DISCARD:
            self.log(EventKind.DROPPED_WRITE, site, f"offset {off}")
            return None
        self.log(EventKind.MANUFACTURED_READ, site, f"offset {off} -> {action.value}")
        return action.value

    def abort(self, site: str, detail: str):
        self.log(EventKind.ABORT, site, detail)
        self.aborted = True
        raise RunAborted(self.events[-1])

    def log(self, kind: EventKind, site: str, detail: str) -> None:
        self.events.append(Event(kind, site, detail))


@dataclass
class CallResult:
    """Return value of one libc call plus the events it generated."""

    value: object
    events: list[Event]


def execute(rt: Runtime, call) -> CallResult:
    """Run one libc call under the runtime's policy.

    Abort and oblivious policies run the plain reference implementations;
    context policies dispatch to the interceptor family.
    """
    from . import libc

    table = libc.CS_FUNCTIONS if rt.policy.uses_interceptors else libc.REF_FUNCTIONS
    try:
        fn, wants_stream = table[call.function]
    except KeyError:
        raise libc.BadCall(f"unknown libc function '{call.function}'") from None
    if rt.stdin is None:
        rt.stdin = libc.InputStream()
    start = len(rt.events)
    args = (*call.args, rt.stdin) if wants_stream else call.args
    value = fn(rt, *args)
    return CallResult(value, rt.events[start:])
