"""Deterministic synchronous-reactive execution engine.

Execution is split into a succession of logical instants. A machine holds an
ordered set of top-level programs built from combinators; during one reaction
every runnable branch executes until the whole system is quiescent, then the
instant closes. Events are the only communication channel: an event generated
anywhere during an instant is instantaneously broadcast, i.e. visible as
present (with one shared value list) to every parallel branch within that
same instant. An event that nobody generated or injected is declared absent
only at the end of the instant, and branches reacting to that absence run at
the next instant, which keeps reactions deterministic.

Scheduling is a fixed point: top-level programs run in addition order, the
children of ``Par`` left to right, and branches suspended on an event are
re-polled (in tree order) after each wave of new presences. A reaction
therefore performs at most O(#events + #programs) passes.

Two error kinds are reported per instant instead of raised: a loop body that
terminates twice within one instant without pausing (``instantaneousLoop``)
and a host callback that raises (``actionFailure``). Both terminate the
offending branch only; the machine stays usable.
"""

from __future__ import annotations

import itertools
import json
import threading
from dataclasses import dataclass
from typing import Any, Callable, Iterator, Optional, Union

__all__ = [
    "EventId",
    "EventValues",
    "EnvView",
    "Program",
    "Nothing",
    "Atom",
    "Pause",
    "Seq",
    "Par",
    "Loop",
    "Repeat",
    "Generate",
    "Await",
    "WhenPresentElse",
    "Until",
    "LocalEvent",
    "ProgramHandle",
    "ReactionError",
    "InstantReport",
    "Machine",
    "make_machine",
    "read_values",
    "UnknownEventError",
    "ReentrancyError",
    "NO_VALUE",
]

# Branch status after one step.
_TERM = 0  # finished
_STOP = 1  # done for this instant, resumes next instant
_SUSP = 2  # waiting on an event that may still become present this instant

# Per-event status within an instant.
_UNKNOWN = 0
_PRESENT = 1

_machine_serial = itertools.count()


class _NoValue:
    __slots__ = ()

    def __repr__(self) -> str:
        return "NO_VALUE"


#: Sentinel distinguishing "no payload" from a payload of ``None``.
NO_VALUE = _NoValue()


class UnknownEventError(KeyError):
    """Event name or id not declared on this machine."""


class ReentrancyError(RuntimeError):
    """Machine operation attempted while a reaction is executing."""


@dataclass(frozen=True)
class EventId:
    """Interned event identifier, unique within one machine."""

    name: str
    index: int
    machine_id: int

    def __repr__(self) -> str:
        return f"EventId({self.name!r})"


EventRef = Union[EventId, str]


class EventValues:
    """The value list of one event for one instant.

    Every reader of the event within the instant receives a view over the
    same underlying list, so once the instant closes (the list freezes) all
    captured views expose identical content. Iterating mid-instant shows the
    values generated so far.
    """

    __slots__ = ("_items", "_frozen")

    def __init__(self) -> None:
        self._items: Any = []
        self._frozen = False

    def _append(self, value: Any) -> None:
        self._items.append(value)

    def _freeze(self) -> None:
        if not self._frozen:
            self._items = tuple(self._items)
            self._frozen = True

    def snapshot(self) -> tuple:
        return tuple(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Any]:
        return iter(tuple(self._items))

    def __getitem__(self, i):
        return self._items[i]

    def __eq__(self, other: object) -> bool:
        if isinstance(other, EventValues):
            return tuple(self._items) == tuple(other._items)
        if isinstance(other, (tuple, list)):
            return tuple(self._items) == tuple(other)
        return NotImplemented

    def __hash__(self):
        return hash(tuple(self._items)) if self._frozen else id(self)

    def __repr__(self) -> str:
        return f"EventValues({list(self._items)!r})"


# ---------------------------------------------------------------------------
# Program descriptions (immutable combinator trees)
# ---------------------------------------------------------------------------


class Program:
    """Base class for combinator tree nodes. Trees are finite and immutable."""

    __slots__ = ()

    def _instantiate(self, machine: "Machine", local_names: frozenset) -> "_Node":
        raise NotImplementedError


def _as_program(p: Any) -> Program:
    if not isinstance(p, Program):
        raise TypeError(f"expected a Program, got {type(p).__name__}")
    return p


def _as_event_ref(e: Any) -> EventRef:
    if isinstance(e, (EventId, str)):
        return e
    raise TypeError(f"expected an event name or EventId, got {type(e).__name__}")


class Nothing(Program):
    """Terminates immediately, does nothing."""

    __slots__ = ()

    def _instantiate(self, machine, local_names):
        return _RNothing()

    def __repr__(self):
        return "Nothing()"


class Atom(Program):
    """Runs a host callback with read access to the frozen event environment.

    The callback must not call back into the machine; it may freely mutate
    its own host state. A raising callback terminates the enclosing branch
    and is reported as an ``actionFailure``.
    """

    __slots__ = ("action",)

    def __init__(self, action: Callable[["EnvView"], Any]):
        if not callable(action):
            raise TypeError("Atom action must be callable")
        object.__setattr__(self, "action", action)

    def __setattr__(self, *a):
        raise AttributeError("Program nodes are immutable")

    def _instantiate(self, machine, local_names):
        return _RAtom(self.action)

    def __repr__(self):
        return f"Atom({self.action!r})"


class Pause(Program):
    """Terminates the current instant for this branch; resumes at the next."""

    __slots__ = ()

    def _instantiate(self, machine, local_names):
        return _RPause()

    def __repr__(self):
        return "Pause()"


class _Composite(Program):
    __slots__ = ("__dict__",)

    def __setattr__(self, *a):
        raise AttributeError("Program nodes are immutable")


class Seq(_Composite):
    """Runs parts one after the other (n-ary sequence)."""

    def __init__(self, *parts: Program):
        object.__setattr__(self, "parts", tuple(_as_program(p) for p in parts))

    def _instantiate(self, machine, local_names):
        return _RSeq(tuple(p._instantiate(machine, local_names) for p in self.parts))

    def __repr__(self):
        return f"Seq{self.parts!r}"


class Par(_Composite):
    """Runs all branches in parallel; terminates when every branch has."""

    def __init__(self, *branches: Program):
        object.__setattr__(self, "branches", tuple(_as_program(p) for p in branches))

    def _instantiate(self, machine, local_names):
        return _RPar(tuple(p._instantiate(machine, local_names) for p in self.branches))

    def __repr__(self):
        return f"Par{self.branches!r}"


class Loop(_Composite):
    """Restarts body forever. A body terminating twice in one instant is an error."""

    def __init__(self, body: Program):
        object.__setattr__(self, "body", _as_program(body))

    def _instantiate(self, machine, local_names):
        return _RLoop(self.body._instantiate(machine, local_names))

    def __repr__(self):
        return f"Loop({self.body!r})"


class Repeat(_Composite):
    """Runs body a fixed non-negative number of times."""

    def __init__(self, count: int, body: Program):
        if not isinstance(count, int) or count < 0:
            raise ValueError("Repeat count must be a non-negative integer")
        object.__setattr__(self, "count", count)
        object.__setattr__(self, "body", _as_program(body))

    def _instantiate(self, machine, local_names):
        return _RRepeat(self.count, self.body._instantiate(machine, local_names))

    def __repr__(self):
        return f"Repeat({self.count}, {self.body!r})"


class Generate(_Composite):
    """Marks an event present, optionally appending a payload to its list.

    ``value`` may be absent, a constant, or a callable ``f(env) -> payload``
    evaluated at emission time.
    """

    def __init__(self, event: EventRef, value: Any = NO_VALUE):
        object.__setattr__(self, "event", _as_event_ref(event))
        object.__setattr__(self, "value", value)

    def _instantiate(self, machine, local_names):
        return _RGenerate(_bind_ref(self.event, machine, local_names), self.value)

    def __repr__(self):
        return f"Generate({self.event!r})"


class Await(_Composite):
    """Blocks, across instants if needed, until the event is present."""

    def __init__(self, event: EventRef):
        object.__setattr__(self, "event", _as_event_ref(event))

    def _instantiate(self, machine, local_names):
        return _RAwait(_bind_ref(self.event, machine, local_names))

    def __repr__(self):
        return f"Await({self.event!r})"


class WhenPresentElse(_Composite):
    """Instantaneous presence test.

    If the event turns present during the current instant the then-branch
    runs within that same instant. Otherwise absence is established at end
    of instant and the else-branch starts at the next one.
    """

    def __init__(self, event: EventRef, then_branch: Program, else_branch: Program):
        object.__setattr__(self, "event", _as_event_ref(event))
        object.__setattr__(self, "then_branch", _as_program(then_branch))
        object.__setattr__(self, "else_branch", _as_program(else_branch))

    def _instantiate(self, machine, local_names):
        return _RWhenPresentElse(
            _bind_ref(self.event, machine, local_names),
            self.then_branch._instantiate(machine, local_names),
            self.else_branch._instantiate(machine, local_names),
        )

    def __repr__(self):
        return f"WhenPresentElse({self.event!r}, {self.then_branch!r}, {self.else_branch!r})"


class Until(_Composite):
    """Weak preemption: runs body until the event is present at an end of
    instant; the body still finishes that instant, then the handler starts at
    the next one. A body that terminates on its own skips the handler."""

    def __init__(self, event: EventRef, body: Program, handler: Program = Nothing()):
        object.__setattr__(self, "event", _as_event_ref(event))
        object.__setattr__(self, "body", _as_program(body))
        object.__setattr__(self, "handler", _as_program(handler))

    def _instantiate(self, machine, local_names):
        return _RUntil(
            _bind_ref(self.event, machine, local_names),
            self.body._instantiate(machine, local_names),
            self.handler._instantiate(machine, local_names),
        )

    def __repr__(self):
        return f"Until({self.event!r}, {self.body!r}, {self.handler!r})"


class LocalEvent(_Composite):
    """Declares a fresh event for the body, shadowing any same-named outer
    event. Each activation allocates a new instance; in reports the instance
    appears under a unique mangled name (``name@k``)."""

    def __init__(self, name: str, body: Program):
        if not isinstance(name, str) or not name:
            raise ValueError("LocalEvent needs a non-empty name")
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "body", _as_program(body))

    def _instantiate(self, machine, local_names):
        return _RLocalEvent(
            self.name, self.body._instantiate(machine, local_names | {self.name})
        )

    def __repr__(self):
        return f"LocalEvent({self.name!r}, {self.body!r})"


# ---------------------------------------------------------------------------
# Runtime nodes
# ---------------------------------------------------------------------------


class _BranchFailure(Exception):
    """Internal control flow: terminates the nearest parallel branch."""

    def __init__(self, kind: str, detail: str):
        super().__init__(detail)
        self.kind = kind
        self.detail = detail


def _bind_ref(ref: EventRef, machine: "Machine", local_names: frozenset):
    """Resolves an event reference at instantiation time. Shadowing is
    statically scoped (only ancestor LocalEvents can bind a name), so a name
    outside `local_names` resolves to its machine index once and for all; a
    shadowed name stays symbolic and is looked up against the live binding."""
    name = ref.name if isinstance(ref, EventId) else ref
    if name in local_names:
        return name
    return machine.event(name).index


class _Node:
    __slots__ = ()

    def step(self, m: "Machine") -> int:
        raise NotImplementedError

    def end_instant(self, m: "Machine") -> None:
        pass

    def reset(self) -> None:
        pass


class _RNothing(_Node):
    __slots__ = ()

    def step(self, m):
        return _TERM


class _RAtom(_Node):
    __slots__ = ("action",)

    def __init__(self, action):
        self.action = action

    def step(self, m):
        try:
            self.action(m.env)
        except Exception as exc:  # noqa: BLE001 - host callbacks may raise anything
            raise _BranchFailure("actionFailure", f"{type(exc).__name__}: {exc}") from exc
        return _TERM


class _RPause(_Node):
    __slots__ = ("parked",)

    def __init__(self):
        self.parked = False

    def step(self, m):
        if self.parked:
            self.parked = False
            return _TERM
        self.parked = True
        return _STOP

    def reset(self):
        self.parked = False


class _RSeq(_Node):
    __slots__ = ("parts", "idx")

    def __init__(self, parts):
        self.parts = parts
        self.idx = 0

    def step(self, m):
        parts = self.parts
        while self.idx < len(parts):
            s = parts[self.idx].step(m)
            if s != _TERM:
                return s
            self.idx += 1
        self.idx = 0
        return _TERM

    def end_instant(self, m):
        if self.idx < len(self.parts):
            self.parts[self.idx].end_instant(m)

    def reset(self):
        self.idx = 0
        for p in self.parts:
            p.reset()


_BR_ACTIVE = 0
_BR_STOPPED = 1
_BR_TERM = 2


class _RPar(_Node):
    __slots__ = ("branches", "state", "n_term")

    def __init__(self, branches):
        self.branches = branches
        self.state = [_BR_ACTIVE] * len(branches)
        self.n_term = 0

    def step(self, m):
        state = self.state
        any_susp = False
        for i, b in enumerate(self.branches):
            if state[i] != _BR_ACTIVE:
                continue
            try:
                s = b.step(m)
            except _BranchFailure as f:
                m._record_branch_failure(f)
                b.reset()
                state[i] = _BR_TERM
                self.n_term += 1
                continue
            if s == _TERM:
                state[i] = _BR_TERM
                self.n_term += 1
            elif s == _STOP:
                state[i] = _BR_STOPPED
            else:
                any_susp = True
        if self.n_term == len(state):
            self.state = [_BR_ACTIVE] * len(state)
            self.n_term = 0
            return _TERM
        return _SUSP if any_susp else _STOP

    def end_instant(self, m):
        state = self.state
        for i, b in enumerate(self.branches):
            if state[i] == _BR_TERM:
                continue
            b.end_instant(m)
            state[i] = _BR_ACTIVE

    def reset(self):
        self.state = [_BR_ACTIVE] * len(self.branches)
        self.n_term = 0
        for b in self.branches:
            b.reset()


class _RLoop(_Node):
    __slots__ = ("body", "terms_this_instant")

    def __init__(self, body):
        self.body = body
        self.terms_this_instant = 0

    def step(self, m):
        while True:
            s = self.body.step(m)
            if s != _TERM:
                return s
            self.terms_this_instant += 1
            if self.terms_this_instant >= 2:
                self.terms_this_instant = 0
                raise _BranchFailure(
                    "instantaneousLoop",
                    "loop body terminated twice within one instant",
                )

    def end_instant(self, m):
        self.terms_this_instant = 0
        self.body.end_instant(m)

    def reset(self):
        self.terms_this_instant = 0
        self.body.reset()


class _RRepeat(_Node):
    __slots__ = ("count", "body", "remaining")

    def __init__(self, count, body):
        self.count = count
        self.body = body
        self.remaining = count

    def step(self, m):
        if self.remaining == 0:
            return _TERM
        while True:
            s = self.body.step(m)
            if s != _TERM:
                return s
            self.remaining -= 1
            if self.remaining == 0:
                self.remaining = self.count
                return _TERM

    def end_instant(self, m):
        self.body.end_instant(m)

    def reset(self):
        self.remaining = self.count
        self.body.reset()


class _RGenerate(_Node):
    __slots__ = ("ev", "value")

    def __init__(self, ev, value):
        self.ev = ev
        self.value = value

    def step(self, m):
        ev = self.ev
        index = ev if type(ev) is int else m._dyn_index(ev)
        if self.value is NO_VALUE:
            m._mark_present(index)
        else:
            v = self.value
            if callable(v):
                try:
                    v = v(m.env)
                except Exception as exc:  # noqa: BLE001
                    raise _BranchFailure(
                        "actionFailure", f"{type(exc).__name__}: {exc}"
                    ) from exc
            m._mark_present(index, v)
        return _TERM


class _RAwait(_Node):
    __slots__ = ("ev",)

    def __init__(self, ev):
        self.ev = ev

    def step(self, m):
        ev = self.ev
        index = ev if type(ev) is int else m._dyn_index(ev)
        if m._statuses[index] == _PRESENT:
            return _TERM
        return _SUSP


_WPE_UNDECIDED = 0
_WPE_THEN = 1
_WPE_ELSE_PENDING = 2
_WPE_ELSE = 3


class _RWhenPresentElse(_Node):
    __slots__ = ("ev", "then_branch", "else_branch", "state")

    def __init__(self, ev, then_branch, else_branch):
        self.ev = ev
        self.then_branch = then_branch
        self.else_branch = else_branch
        self.state = _WPE_UNDECIDED

    def step(self, m):
        if self.state == _WPE_UNDECIDED:
            ev = self.ev
            index = ev if type(ev) is int else m._dyn_index(ev)
            if m._statuses[index] == _PRESENT:
                self.state = _WPE_THEN
            else:
                return _SUSP
        if self.state == _WPE_ELSE_PENDING:
            self.state = _WPE_ELSE
        branch = self.then_branch if self.state == _WPE_THEN else self.else_branch
        s = branch.step(m)
        if s == _TERM:
            self.state = _WPE_UNDECIDED
        return s

    def end_instant(self, m):
        if self.state == _WPE_UNDECIDED:
            # The scheduler re-polls after every presence wave, so reaching
            # end of instant undecided means the event is absent.
            self.state = _WPE_ELSE_PENDING
        elif self.state == _WPE_THEN:
            self.then_branch.end_instant(m)
        elif self.state == _WPE_ELSE:
            self.else_branch.end_instant(m)

    def reset(self):
        self.state = _WPE_UNDECIDED
        self.then_branch.reset()
        self.else_branch.reset()


_UNTIL_BODY = 0
_UNTIL_HANDLER_PENDING = 1
_UNTIL_HANDLER = 2


class _RUntil(_Node):
    __slots__ = ("ev", "body", "handler", "state")

    def __init__(self, ev, body, handler):
        self.ev = ev
        self.body = body
        self.handler = handler
        self.state = _UNTIL_BODY

    def step(self, m):
        if self.state == _UNTIL_BODY:
            s = self.body.step(m)
            if s == _TERM:
                self.state = _UNTIL_BODY
                return _TERM
            return s
        if self.state == _UNTIL_HANDLER_PENDING:
            self.state = _UNTIL_HANDLER
        s = self.handler.step(m)
        if s == _TERM:
            self.state = _UNTIL_BODY
        return s

    def end_instant(self, m):
        if self.state == _UNTIL_BODY:
            ev = self.ev
            index = ev if type(ev) is int else m._dyn_index(ev)
            if m._statuses[index] == _PRESENT:
                self.body.reset()
                self.state = _UNTIL_HANDLER_PENDING
            else:
                self.body.end_instant(m)
        elif self.state == _UNTIL_HANDLER:
            self.handler.end_instant(m)

    def reset(self):
        self.state = _UNTIL_BODY
        self.body.reset()
        self.handler.reset()


class _RLocalEvent(_Node):
    __slots__ = ("name", "body", "eid")

    def __init__(self, name, body):
        self.name = name
        self.body = body
        self.eid = None

    def step(self, m):
        if self.eid is None:
            self.eid = m._alloc_local(self.name)
        m._push_binding(self.name, self.eid)
        try:
            s = self.body.step(m)
        finally:
            m._pop_binding(self.name)
        if s == _TERM:
            self.eid = None
        return s

    def end_instant(self, m):
        if self.eid is None:
            return
        m._push_binding(self.name, self.eid)
        try:
            self.body.end_instant(m)
        finally:
            m._pop_binding(self.name)

    def reset(self):
        self.eid = None
        self.body.reset()


# ---------------------------------------------------------------------------
# Machine
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProgramHandle:
    """Stable identifier of one top-level program."""

    serial: int
    label: Optional[str] = None

    def __repr__(self):
        return f"ProgramHandle({self.serial}{', ' + self.label if self.label else ''})"


@dataclass(frozen=True)
class ReactionError:
    """A branch-terminating error observed during one reaction."""

    kind: str  # "instantaneousLoop" | "actionFailure"
    handle: ProgramHandle
    detail: str

    def to_json_obj(self):
        return {"kind": self.kind, "handle": self.handle.serial, "detail": self.detail}


# Report statuses for a top-level program within the current instant.
_TL_PENDING = 0
_TL_STOPPED = 1
_TL_DONE = 2


class _TopLevel:
    __slots__ = ("handle", "root", "done", "instant_state", "terminated_now")

    def __init__(self, handle, root):
        self.handle = handle
        self.root = root
        self.done = False
        self.instant_state = _TL_PENDING
        self.terminated_now = False


@dataclass(frozen=True)
class InstantReport:
    """What one reaction produced: the events present at end of instant with
    their final value lists, the programs that terminated, and any error."""

    instant: int
    emitted: dict
    terminated: tuple
    error: Optional[ReactionError] = None

    def to_json_obj(self) -> dict:
        obj = {
            "instant": self.instant,
            "emitted": {name: list(vals) for name, vals in self.emitted.items()},
            "terminated": [h.serial for h in self.terminated],
        }
        if self.error is not None:
            obj["error"] = self.error.to_json_obj()
        return obj

    def canonical_line(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))


class EnvView:
    """Read-only window onto the event environment, handed to host callbacks."""

    __slots__ = ("_m",)

    def __init__(self, machine: "Machine"):
        self._m = machine

    @property
    def instant(self) -> int:
        return self._m._instant

    def present(self, event: EventRef) -> bool:
        eid = self._m._resolve(event)
        return self._m._statuses[eid.index] == _PRESENT

    def values(self, event: EventRef) -> Optional[EventValues]:
        """Shared value view if the event is present, else None."""
        m = self._m
        eid = m._resolve(event)
        if m._statuses[eid.index] != _PRESENT:
            return None
        vals = m._values[eid.index]
        if vals is None:
            vals = m._values[eid.index] = EventValues()
        return vals


class Machine:
    """The clock that drives execution: one `react()` call per logical instant.

    ``inject`` is callable from any thread; everything else must be
    externally serialized. The optional ``trace`` sink receives one canonical
    JSON line per instant: ``{"emitted":{...},"instant":N,"terminated":[...]}``.
    """

    def __init__(self, trace=None):
        self._machine_id = next(_machine_serial)
        self._names: dict = {}
        self._index_to_name: list = []
        self._statuses: list = []
        self._values: list = []
        self._present_order: list = []
        self._presence_version = 0
        self._instant = 0
        self._programs: list = []
        self._queue: list = []
        self._queue_lock = threading.Lock()
        self._reacting = False
        self._bindings: dict = {}
        self._local_serial = 0
        self._error: Optional[ReactionError] = None
        self._current_handle: Optional[ProgramHandle] = None
        self._trace = trace
        self._instant_hooks: list = []
        self.env = EnvView(self)

    # -- events ------------------------------------------------------------

    def event(self, name: str) -> EventId:
        """Look up or declare the event with this name (interned)."""
        eid = self._names.get(name)
        if eid is None:
            eid = EventId(name, len(self._statuses), self._machine_id)
            self._names[name] = eid
            self._index_to_name.append(name)
            self._statuses.append(_UNKNOWN)
            self._values.append(None)
        return eid

    def _alloc_local(self, name: str) -> EventId:
        mangled = f"{name}@{self._local_serial}"
        self._local_serial += 1
        return self.event(mangled)

    def _push_binding(self, name: str, eid: EventId) -> None:
        self._bindings.setdefault(name, []).append(eid)

    def _pop_binding(self, name: str) -> None:
        stack = self._bindings[name]
        stack.pop()
        if not stack:
            del self._bindings[name]

    def _resolve(self, ref: EventRef) -> EventId:
        name = ref.name if isinstance(ref, EventId) else ref
        stack = self._bindings.get(name)
        if stack:
            return stack[-1]
        if isinstance(ref, EventId):
            if ref.machine_id != self._machine_id:
                raise UnknownEventError(f"event {ref.name!r} belongs to another machine")
            return ref
        eid = self._names.get(name)
        if eid is None:
            raise UnknownEventError(f"unknown event {name!r}")
        return eid

    def _dyn_index(self, name: str) -> int:
        """Index of a locally-bound name; its LocalEvent is always an
        ancestor of the executing node, so the binding must be live."""
        try:
            return self._bindings[name][-1].index
        except (KeyError, IndexError):
            raise UnknownEventError(f"unbound local event {name!r}") from None

    def _mark_present(self, index: int, *values: Any) -> None:
        if self._statuses[index] != _PRESENT:
            self._statuses[index] = _PRESENT
            self._present_order.append(index)
            self._presence_version += 1
        if values:
            vals = self._values[index]
            if vals is None:
                vals = self._values[index] = EventValues()
            for v in values:
                vals._append(v)

    # -- programs ------------------------------------------------------------

    def add_program(self, program: Program, label: Optional[str] = None) -> ProgramHandle:
        """Adds a top-level program; it first runs at the next reaction."""
        if self._reacting:
            raise ReentrancyError("cannot add a program while a reaction is executing")
        _as_program(program)
        self._intern_program_events(program)
        handle = ProgramHandle(len(self._programs), label)
        self._programs.append(
            _TopLevel(handle, program._instantiate(self, frozenset()))
        )
        return handle

    def _intern_program_events(self, program: Program, local_names=frozenset()):
        """Validates event references and interns names ahead of execution."""
        if isinstance(program, (Generate, Await, WhenPresentElse, Until)):
            ref = program.event
            if isinstance(ref, EventId):
                if ref.machine_id != self._machine_id:
                    raise UnknownEventError(
                        f"event {ref.name!r} belongs to another machine"
                    )
            elif ref not in local_names:
                self.event(ref)
        if isinstance(program, Seq):
            for p in program.parts:
                self._intern_program_events(p, local_names)
        elif isinstance(program, Par):
            for p in program.branches:
                self._intern_program_events(p, local_names)
        elif isinstance(program, (Loop, Repeat)):
            self._intern_program_events(program.body, local_names)
        elif isinstance(program, WhenPresentElse):
            self._intern_program_events(program.then_branch, local_names)
            self._intern_program_events(program.else_branch, local_names)
        elif isinstance(program, Until):
            self._intern_program_events(program.body, local_names)
            self._intern_program_events(program.handler, local_names)
        elif isinstance(program, LocalEvent):
            self._intern_program_events(program.body, local_names | {program.name})

    def inject(self, event: EventRef, value: Any = NO_VALUE) -> None:
        """Queues an external event; it is present at the NEXT reaction.

        Thread-safe. Unknown events are rejected immediately.
        """
        name = event.name if isinstance(event, EventId) else event
        if isinstance(event, EventId) and event.machine_id != self._machine_id:
            raise UnknownEventError(f"event {name!r} belongs to another machine")
        eid = self._names.get(name)
        if eid is None:
            raise UnknownEventError(f"unknown event {name!r}")
        with self._queue_lock:
            self._queue.append((eid.index, value))

    def add_instant_hook(self, hook: Callable[[InstantReport], Any]) -> None:
        """Registers an end-of-instant observer callback."""
        self._instant_hooks.append(hook)

    def _record_branch_failure(self, failure: _BranchFailure) -> None:
        if self._error is None:
            self._error = ReactionError(failure.kind, self._current_handle, failure.detail)

    # -- reactions -----------------------------------------------------------

    def react(self) -> InstantReport:
        """Executes one full logical instant to quiescence."""
        if self._reacting:
            raise ReentrancyError("reaction already in progress")
        self._reacting = True
        try:
            return self._react_inner()
        finally:
            self._reacting = False

    def _react_inner(self) -> InstantReport:
        with self._queue_lock:
            batch, self._queue = self._queue, []
        for index, value in batch:
            if value is NO_VALUE:
                self._mark_present(index)
            else:
                self._mark_present(index, value)

        programs = self._programs
        for tl in programs:
            tl.instant_state = _TL_DONE if tl.done else _TL_PENDING
            tl.terminated_now = False

        # Fixed point: keep passing over unsettled programs while any of them
        # progresses or new presences appear (bounded by #events + #programs).
        while True:
            version_before = self._presence_version
            progressed = False
            pending = 0
            for tl in programs:
                if tl.instant_state != _TL_PENDING:
                    continue
                self._current_handle = tl.handle
                try:
                    s = tl.root.step(self)
                except _BranchFailure as f:
                    self._record_branch_failure(f)
                    tl.root.reset()
                    s = _TERM
                finally:
                    self._current_handle = None
                if s == _TERM:
                    tl.done = True
                    tl.terminated_now = True
                    tl.instant_state = _TL_DONE
                    progressed = True
                elif s == _STOP:
                    tl.instant_state = _TL_STOPPED
                    progressed = True
                else:
                    pending += 1
            if pending == 0:
                break
            if not progressed and self._presence_version == version_before:
                break

        # End of instant: still-unknown events are absent; give the live tree
        # its end-of-instant hook (absence decisions, preemption checks).
        for tl in programs:
            if not tl.done:
                tl.root.end_instant(self)

        emitted: dict = {}
        for index in self._present_order:
            vals = self._values[index]
            if vals is None:
                emitted[self._index_to_name[index]] = ()
            else:
                vals._freeze()
                emitted[self._index_to_name[index]] = vals.snapshot()

        report = InstantReport(
            instant=self._instant,
            emitted=emitted,
            terminated=tuple(tl.handle for tl in programs if tl.terminated_now),
            error=self._error,
        )

        for index in self._present_order:
            self._statuses[index] = _UNKNOWN
            self._values[index] = None
        self._present_order.clear()
        self._error = None
        self._instant += 1

        if self._trace is not None:
            self._trace.write(report.canonical_line() + "\n")
        for hook in self._instant_hooks:
            hook(report)
        return report

    @property
    def instant_index(self) -> int:
        return self._instant

    @property
    def program_count(self) -> int:
        return len(self._programs)


def make_machine(trace=None) -> Machine:
    """Creates an empty machine at instant 0 with no events declared."""
    return Machine(trace=trace)


def read_values(env: EnvView, event: EventRef) -> Optional[EventValues]:
    """Value view of the event for the current instant, or None if absent or
    not (yet) present. All readers within one instant share the same view."""
    return env.values(event)
