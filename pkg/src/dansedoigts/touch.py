"""Touch gateway: raw pointer streams to contact state and reactive inputs.

Everything here is a pure function of the sample stream: replaying the same
trace yields the same contact sets and the same injections regardless of
wall clock. Coordinates are normalized to [0,1]x[0,1] at ingestion so zone
layouts are resolution independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import IO, Iterable, Iterator, Optional

__all__ = [
    "Phase",
    "TouchSample",
    "Contact",
    "ContactSet",
    "Rect",
    "Zone",
    "ZoneLayout",
    "HoldState",
    "PinchAborted",
    "TraceError",
    "ingest",
    "classify",
    "sign_hold_status",
    "pinch_progress",
    "read_trace",
    "write_trace",
    "sample_to_json_obj",
    "MERGE_EPSILON",
]

# Two contacts closer than this count as fully merged for pinch exercises.
MERGE_EPSILON = 0.01

EV_CONTACT_DOWN = "contactDown"
EV_CONTACT_MOVE = "contactMove"
EV_CONTACT_UP = "contactUp"
EV_TRACE_ANOMALY = "traceAnomaly"

INPUT_EVENTS = (EV_CONTACT_DOWN, EV_CONTACT_MOVE, EV_CONTACT_UP, EV_TRACE_ANOMALY)


class Phase(Enum):
    DOWN = "down"
    MOVE = "move"
    UP = "up"
    CANCEL = "cancel"


@dataclass(frozen=True)
class TouchSample:
    """One timestamped pointer report with normalized coordinates."""

    t_ms: float
    pointer_id: int
    phase: Phase
    x: float
    y: float

    def __post_init__(self):
        if self.t_ms < 0:
            raise ValueError(f"t_ms must be >= 0, got {self.t_ms}")
        if not (0.0 <= self.x <= 1.0 and 0.0 <= self.y <= 1.0):
            raise ValueError(f"coordinates out of [0,1]: ({self.x}, {self.y})")


@dataclass(frozen=True)
class Contact:
    x: float
    y: float
    down_t_ms: float


class ContactSet:
    """The live contacts: exactly the ids with a Down not yet closed."""

    __slots__ = ("_contacts",)

    def __init__(self, contacts: Optional[dict] = None):
        self._contacts = dict(contacts) if contacts else {}

    def __len__(self) -> int:
        return len(self._contacts)

    def __contains__(self, pointer_id: int) -> bool:
        return pointer_id in self._contacts

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self._contacts))

    def get(self, pointer_id: int) -> Optional[Contact]:
        return self._contacts.get(pointer_id)

    def items(self):
        return [(pid, self._contacts[pid]) for pid in sorted(self._contacts)]

    def _with(self, pointer_id: int, contact: Contact) -> "ContactSet":
        d = dict(self._contacts)
        d[pointer_id] = contact
        return ContactSet(d)

    def _without(self, pointer_id: int) -> "ContactSet":
        d = dict(self._contacts)
        del d[pointer_id]
        return ContactSet(d)

    def __eq__(self, other):
        return isinstance(other, ContactSet) and self._contacts == other._contacts

    def __repr__(self):
        return f"ContactSet({self._contacts!r})"


def ingest(sample: TouchSample, contacts: ContactSet):
    """One gateway transition: returns (updated contacts, injections).

    Injections is a list of (event name, payload) pairs destined for the
    machine's input queue. Phase-sequence violations drop the sample and
    produce a `traceAnomaly` injection instead; they are never fatal.
    """
    pid = sample.pointer_id
    payload = {"id": pid, "x": sample.x, "y": sample.y}
    known = pid in contacts
    if sample.phase is Phase.DOWN:
        if known:
            return contacts, [_anomaly("down-while-down", sample)]
        updated = contacts._with(pid, Contact(sample.x, sample.y, sample.t_ms))
        return updated, [(EV_CONTACT_DOWN, payload)]
    if not known:
        return contacts, [_anomaly(f"{sample.phase.value}-without-down", sample)]
    if sample.phase is Phase.MOVE:
        prior = contacts.get(pid)
        updated = contacts._with(pid, Contact(sample.x, sample.y, prior.down_t_ms))
        return updated, [(EV_CONTACT_MOVE, payload)]
    # UP or CANCEL both close the contact.
    return contacts._without(pid), [(EV_CONTACT_UP, payload)]


def _anomaly(reason: str, sample: TouchSample):
    return (
        EV_TRACE_ANOMALY,
        {"reason": reason, "id": sample.pointer_id, "phase": sample.phase.value},
    )


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise ValueError("rectangle with negative extent")

    def contains(self, px: float, py: float) -> bool:
        # Closed region: boundary points belong to the rectangle.
        return self.x <= px <= self.x + self.w and self.y <= py <= self.y + self.h

    def intersects(self, other: "Rect") -> bool:
        return not (
            self.x + self.w <= other.x
            or other.x + other.w <= self.x
            or self.y + self.h <= other.y
            or other.y + other.h <= self.y
        )

    def inset(self, dx: float, dy: Optional[float] = None) -> "Rect":
        if dy is None:
            dy = dx
        return Rect(self.x + dx, self.y + dy, self.w - 2 * dx, self.h - 2 * dy)

    def center(self) -> tuple:
        return (self.x + self.w / 2, self.y + self.h / 2)

    def to_json_obj(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


class Zone(Enum):
    SIGN_LEFT = "signLeft"
    SIGN_RIGHT = "signRight"
    PLAY_AREA = "playArea"
    CROWN = "crown"
    DEAD = "dead"


@dataclass(frozen=True)
class ZoneLayout:
    """Screen regions: two stop-sign zones for the resting hand, the play
    area, and the crown prompt zone. Sign zones must not touch the play
    area; the hold check requires some minimum spread between the two
    resting fingers."""

    sign_zones: tuple
    play_area: Rect
    min_sign_separation: float
    crown_zone: Optional[Rect] = None

    def __post_init__(self):
        if len(self.sign_zones) != 2:
            raise ValueError("layout needs exactly two sign zones")
        if self.min_sign_separation <= 0:
            raise ValueError("min_sign_separation must be > 0")
        for z in self.sign_zones:
            if z.intersects(self.play_area):
                raise ValueError("sign zones must be disjoint from the play area")

    def ordered_signs(self) -> tuple:
        """The sign rectangles as (left, right), ties broken topmost-first."""
        a, b = self.sign_zones
        ka = (a.center()[0], a.center()[1])
        kb = (b.center()[0], b.center()[1])
        return (a, b) if ka <= kb else (b, a)

    def to_json_obj(self) -> dict:
        obj = {
            "sign_zones": [z.to_json_obj() for z in self.sign_zones],
            "play_area": self.play_area.to_json_obj(),
            "min_sign_separation": self.min_sign_separation,
        }
        if self.crown_zone is not None:
            obj["crown_zone"] = self.crown_zone.to_json_obj()
        return obj


def classify(x: float, y: float, layout: ZoneLayout) -> Zone:
    """Exactly one zone per point; overlap priority crown > sign > play > dead."""
    if layout.crown_zone is not None and layout.crown_zone.contains(x, y):
        return Zone.CROWN
    left, right = layout.ordered_signs()
    if left.contains(x, y):
        return Zone.SIGN_LEFT
    if right.contains(x, y):
        return Zone.SIGN_RIGHT
    if layout.play_area.contains(x, y):
        return Zone.PLAY_AREA
    return Zone.DEAD


@dataclass(frozen=True)
class HoldState:
    held: bool
    holding_ids: tuple = ()


def _distance(a: Contact, b: Contact) -> float:
    return math.hypot(a.x - b.x, a.y - b.y)


def sign_hold_status(contacts: ContactSet, layout: ZoneLayout) -> HoldState:
    """Held iff two sign-zone contacts sit at least min_sign_separation
    apart. The reported pair is the lexicographically smallest qualifying
    id pair, so the outcome is deterministic under any iteration order."""
    in_signs = [
        (pid, c)
        for pid, c in contacts.items()
        if classify(c.x, c.y, layout) in (Zone.SIGN_LEFT, Zone.SIGN_RIGHT)
    ]
    for i in range(len(in_signs)):
        for j in range(i + 1, len(in_signs)):
            if _distance(in_signs[i][1], in_signs[j][1]) >= layout.min_sign_separation:
                return HoldState(True, (in_signs[i][0], in_signs[j][0]))
    return HoldState(False)


class PinchAborted(Exception):
    """A pinched contact was lifted before the merge completed."""


def pinch_progress(
    contacts: ContactSet, a: int, b: int, initial_distance: float
) -> float:
    """Merge fraction in [0,1] for a two-finger pinch; 1 means merged."""
    if initial_distance <= 0:
        raise ValueError("initial_distance must be > 0")
    ca, cb = contacts.get(a), contacts.get(b)
    if ca is None or cb is None:
        raise PinchAborted(f"pinch contact lifted ({a if ca is None else b})")
    current = _distance(ca, cb)
    if current <= MERGE_EPSILON:
        return 1.0
    return max(0.0, min(1.0, 1.0 - current / initial_distance))


# ---------------------------------------------------------------------------
# Trace files: JSON Lines, one sample per line.
# ---------------------------------------------------------------------------


class TraceError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_PHASES = {p.value: p for p in Phase}


def sample_to_json_obj(sample: TouchSample) -> dict:
    t_ms = sample.t_ms
    if isinstance(t_ms, float) and t_ms.is_integer():
        t_ms = int(t_ms)
    return {
        "t_ms": t_ms,
        "id": sample.pointer_id,
        "phase": sample.phase.value,
        "x": sample.x,
        "y": sample.y,
    }


def write_trace(samples: Iterable[TouchSample], fp: IO[str]) -> None:
    for s in samples:
        fp.write(json.dumps(sample_to_json_obj(s), sort_keys=True, separators=(",", ":")))
        fp.write("\n")


def read_trace(fp: IO[str]) -> list:
    """Parses a trace file; raises TraceError with the 1-based line number."""
    samples = []
    for line_no, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TraceError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(obj, dict):
            raise TraceError(line_no, "expected an object")
        try:
            phase = _PHASES[obj["phase"]]
            sample = TouchSample(
                t_ms=float(obj["t_ms"]),
                pointer_id=int(obj["id"]),
                phase=phase,
                x=float(obj["x"]),
                y=float(obj["y"]),
            )
        except KeyError as exc:
            raise TraceError(line_no, f"missing or bad field: {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise TraceError(line_no, str(exc)) from exc
        if samples and sample.t_ms < samples[-1].t_ms:
            raise TraceError(line_no, "timestamps must be non-decreasing")
        samples.append(sample)
    return samples
