"""Telemetry: observe the session, aggregate, spool offline, upload.

The observer is an ordinary reactive program made of await/record loops; it
only reads event values into its own buffer and generates nothing, so the
observed session cannot tell whether it is attached. Completed statistics
are handed over as immutable values, written durably to a spool directory,
and uploaded with at-least-once semantics: the file is deleted only after a
2xx acknowledgment, and the server deduplicates by session id.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, List, Optional, Tuple

from .config import SessionConfig, config_digest
from .reactive import Atom, Await, Loop, Nothing, Par, Pause, Program, Seq
from .session import (
    EV_GAME_PAUSED,
    EV_GAME_RESUMED,
    EV_GAME_STARTED,
    EV_SESSION_COMPLETE,
    EV_TRIAL_RECORDED,
    TrialRecord,
)

__all__ = [
    "DEFAULT_OBSERVED_EVENTS",
    "build_observer_program",
    "SessionObserver",
    "SessionStats",
    "aggregate",
    "derive_session_id",
    "SpoolStore",
    "RetryPolicy",
    "FlushResult",
    "flush",
    "COLLECT_PATH",
    "COLLECT_URL_ENV",
]

STATS_SCHEMA_ID = "danse-doigts/stats@1"
SPOOL_SCHEMA_ID = "danse-doigts/spool@1"
COLLECT_PATH = "/v1/sessions"
COLLECT_URL_ENV = "DANSE_COLLECT_URL"

DEFAULT_OBSERVED_EVENTS = (
    EV_TRIAL_RECORDED,
    EV_GAME_STARTED,
    EV_GAME_PAUSED,
    EV_GAME_RESUMED,
    EV_SESSION_COMPLETE,
)


def build_observer_program(events: Iterable[str], sink: list) -> Program:
    """A parallel recorder per event: await it, append (instant, name,
    values) to the sink, pause, repeat. Read-only by construction."""

    def recorder(name: str) -> Program:
        def record(env):
            sink.append((env.instant, name, env.values(name)))

        return Loop(Seq(Await(name), Atom(record), Pause()))

    branches = [recorder(name) for name in events]
    if not branches:
        return Nothing()
    return Par(*branches)


class SessionObserver:
    """Owns the record buffer and the observer program over it."""

    def __init__(self, events: Iterable[str] = DEFAULT_OBSERVED_EVENTS):
        self.events = tuple(events)
        self.records: List[Tuple] = []
        self.program = build_observer_program(self.events, self.records)

    def occurrences(self, name: str):
        return [(instant, vals) for instant, n, vals in self.records if n == name]

    def trials(self) -> list:
        out = []
        for _instant, vals in self.occurrences(EV_TRIAL_RECORDED):
            for payload in vals:
                out.append(TrialRecord.from_payload(payload))
        return out

    def pause_spans(self) -> list:
        """(pause_instant, resume_instant) pairs; an unresumed pause keeps
        None and contributes nothing to the paused-ticks total."""
        spans = []
        open_pause = None
        for instant, name, _vals in self.records:
            if name == EV_GAME_PAUSED and open_pause is None:
                open_pause = instant
            elif name == EV_GAME_RESUMED and open_pause is not None:
                spans.append((open_pause, instant))
                open_pause = None
        if open_pause is not None:
            spans.append((open_pause, None))
        return spans

    def completed(self) -> bool:
        return bool(self.occurrences(EV_SESSION_COMPLETE))


def _lower_median(sorted_values: list) -> float:
    return sorted_values[(len(sorted_values) - 1) // 2]


def aggregate(trials: list, pause_spans: Iterable[Tuple] = ()) -> dict:
    """Deterministic aggregates, a pure function of its inputs. Hit rates are
    kept as exact integer ratios; the median is the lower median."""
    per_finger: dict = {}
    per_game: dict = {}
    stray_total = 0
    for t in trials:
        f = per_finger.setdefault(
            t.finger,
            {"trials": 0, "hits": 0, "mean_reaction_ms": None, "median_reaction_ms": None},
        )
        f["trials"] += 1
        g = per_game.setdefault(t.game, {"trials": 0, "hits": 0, "timeouts": 0})
        g["trials"] += 1
        if t.is_hit:
            f["hits"] += 1
            g["hits"] += 1
        else:
            g["timeouts"] += 1
        stray_total += t.unexpected_contacts

    for finger, stats in per_finger.items():
        reactions = sorted(
            t.reaction_ms for t in trials if t.finger == finger and t.is_hit
        )
        if reactions:
            stats["mean_reaction_ms"] = sum(reactions) / len(reactions)
            stats["median_reaction_ms"] = _lower_median(reactions)

    spans = list(pause_spans)
    return {
        "per_finger": per_finger,
        "per_game": per_game,
        "pause": {
            "count": len(spans),
            "total_paused_ticks": sum(r - p for p, r in spans if r is not None),
        },
        "unexpected_contact_total": stray_total,
    }


def derive_session_id(cfg_digest: str, run_digest: str) -> str:
    """128-bit session id, deterministic in (config, input trace) so replays
    of one session collapse to one server record."""
    h = hashlib.sha256(f"{cfg_digest}:{run_digest}".encode("ascii"))
    return h.hexdigest()[:32]


@dataclass(frozen=True)
class SessionStats:
    session_id: str
    config_digest: str
    tick_hz: int
    completed: bool
    trials: tuple
    pause_spans: tuple
    aggregates: dict

    @classmethod
    def collect(
        cls,
        observer: SessionObserver,
        config: SessionConfig,
        run_digest: str,
    ) -> "SessionStats":
        trials = observer.trials()
        spans = observer.pause_spans()
        cfg_digest = config_digest(config)
        return cls(
            session_id=derive_session_id(cfg_digest, run_digest),
            config_digest=cfg_digest,
            tick_hz=config.tick_hz,
            completed=observer.completed(),
            trials=tuple(trials),
            pause_spans=tuple(spans),
            aggregates=aggregate(trials, spans),
        )

    def to_json_obj(self) -> dict:
        return {
            "schema": STATS_SCHEMA_ID,
            "session_id": self.session_id,
            "config_digest": self.config_digest,
            "tick_hz": self.tick_hz,
            "completed": self.completed,
            "trials": [t.to_payload() for t in self.trials],
            "pause_spans": [[p, r] for p, r in self.pause_spans],
            "aggregates": self.aggregates,
        }

    def canonical_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Spool: durable local storage awaiting upload.
# ---------------------------------------------------------------------------


class SpoolStore:
    """spool/<session-id>.json envelopes, written tmp-then-rename so a crash
    never leaves a half payload, and deleted only after acknowledgment."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def _write(self, envelope: dict) -> None:
        path = self._path(envelope["session_id"])
        tmp = path.with_suffix(".json.tmp")
        data = json.dumps(envelope, sort_keys=True, separators=(",", ":"))
        with open(tmp, "w", encoding="utf-8") as fp:
            fp.write(data)
            fp.flush()
            os.fsync(fp.fileno())
        os.replace(tmp, path)

    def spool(self, stats: SessionStats) -> str:
        """Durably stores the payload; idempotent per session id."""
        envelope = {
            "schema": SPOOL_SCHEMA_ID,
            "session_id": stats.session_id,
            "attempts": 0,
            "next_due_s": 0.0,
            "stats": stats.to_json_obj(),
        }
        self._write(envelope)
        return stats.session_id

    def pending(self) -> list:
        return sorted(p.stem for p in self.root.glob("*.json"))

    def load(self, session_id: str) -> dict:
        with open(self._path(session_id), encoding="utf-8") as fp:
            return json.load(fp)

    def remove(self, session_id: str) -> None:
        self._path(session_id).unlink(missing_ok=True)


@dataclass(frozen=True)
class RetryPolicy:
    base_s: float = 1.0
    factor: float = 2.0
    cap_s: float = 300.0

    def delay(self, attempts: int) -> float:
        return min(self.cap_s, self.base_s * self.factor ** max(0, attempts - 1))


@dataclass(frozen=True)
class FlushResult:
    session_id: str
    delivered: bool
    status: Optional[int] = None
    error: Optional[str] = None
    attempts: int = 0
    next_due_s: Optional[float] = None


def _http_post(url: str, body: bytes, headers: dict, timeout_s: float = 10.0) -> int:
    request = urllib.request.Request(url, data=body, headers=headers, method="POST")
    try:
        with urllib.request.urlopen(request, timeout=timeout_s) as response:
            return response.status
    except urllib.error.HTTPError as exc:
        return exc.code


def flush(
    store: SpoolStore,
    endpoint: str,
    clock: Callable[[], float] = time.monotonic,
    policy: RetryPolicy = RetryPolicy(),
    post: Callable = _http_post,
) -> list:
    """Attempts every due payload once. 2xx removes the file; anything else
    bumps the attempt count and reschedules with exponential backoff. Errors
    are per-payload results, never exceptions."""
    url = endpoint.rstrip("/") + COLLECT_PATH
    now = clock()
    results = []
    for session_id in store.pending():
        envelope = store.load(session_id)
        if envelope.get("next_due_s", 0.0) > now:
            results.append(
                FlushResult(
                    session_id,
                    delivered=False,
                    error="backoff",
                    attempts=envelope.get("attempts", 0),
                    next_due_s=envelope["next_due_s"],
                )
            )
            continue
        body = json.dumps(
            envelope["stats"], sort_keys=True, separators=(",", ":")
        ).encode("utf-8")
        headers = {
            "Content-Type": "application/json",
            "Idempotency-Key": session_id,
        }
        status: Optional[int] = None
        error: Optional[str] = None
        try:
            status = post(url, body, headers)
        except Exception as exc:  # noqa: BLE001 - network failures are data here
            error = f"{type(exc).__name__}: {exc}"
        if status is not None and 200 <= status < 300:
            store.remove(session_id)
            results.append(FlushResult(session_id, True, status=status))
            continue
        attempts = envelope.get("attempts", 0) + 1
        next_due = now + policy.delay(attempts)
        envelope["attempts"] = attempts
        envelope["next_due_s"] = next_due
        store._write(envelope)
        results.append(
            FlushResult(
                session_id,
                delivered=False,
                status=status,
                error=error,
                attempts=attempts,
                next_due_s=next_due,
            )
        )
    return results
