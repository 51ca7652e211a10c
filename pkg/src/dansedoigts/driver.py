"""Session driver: feeds the machine one reaction per tick.

The driver owns everything outside the reactive world: it ingests touch
samples through the gateway, computes the stop-sign hold level, and turns
raw contacts into the semantic inputs the session program understands
(`crownTap`, `targetHit`, `strayContact`). Touches are classified against
the view state of the previous instant, i.e. against what was actually on
screen when the finger landed.

Everything the driver does is a pure function of (config, sample stream),
so replaying a recorded trace reproduces a session bit for bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional

from .config import SessionConfig
from .reactive import Machine, Program, make_machine
from .session import (
    EV_CROWN_TAP,
    EV_GAME_PAUSED,
    EV_GAME_RESUMED,
    EV_HIDE_TARGET,
    EV_MULTI_CONTACT_WARNING,
    EV_SESSION_COMPLETE,
    EV_SHOW_CROWN,
    EV_SHOW_TARGET,
    EV_SIGN_HELD,
    EV_STRAY_CONTACT,
    EV_TARGET_HIT,
    GamePhase,
    INPUT_EVENTS,
    Target,
    build_session_program,
    target_from_payload,
    target_hit_test,
)
from .touch import (
    ContactSet,
    Phase,
    TouchSample,
    Zone,
    classify,
    ingest,
    sign_hold_status,
)

__all__ = ["SessionDriver", "RunResult", "quantize_tick", "bucket_samples"]

_RAW_INPUT_EVENTS = ("contactDown", "contactMove", "contactUp", "traceAnomaly")


def quantize_tick(t_ms: float, tick_hz: int) -> int:
    """Nearest tick, ties to even, so platforms agree on .5 boundaries."""
    return int(round(t_ms * tick_hz / 1000.0))


def bucket_samples(samples: Iterable[TouchSample], tick_hz: int) -> dict:
    buckets: dict = {}
    for s in samples:
        buckets.setdefault(quantize_tick(s.t_ms, tick_hz), []).append(s)
    return buckets


@dataclass
class RunResult:
    reports: list
    digest: str
    completed: bool
    ticks_run: int
    samples: Optional[list] = None


@dataclass
class _Mirror:
    """What the previous instants put on screen; drives touch routing."""

    phase: GamePhase = GamePhase.AWAIT_HOLD
    paused: bool = False
    target: Optional[Target] = None
    target_display_tick: int = 0
    complete: bool = False

    def apply(self, report) -> None:
        emitted = report.emitted
        if EV_HIDE_TARGET in emitted:
            self.phase = GamePhase.AWAIT_HOLD
            self.target = None
        if EV_SHOW_CROWN in emitted:
            self.phase = GamePhase.CROWN_PROMPT
            self.target = None
        if EV_GAME_PAUSED in emitted:
            self.paused = True
        if EV_GAME_RESUMED in emitted:
            self.paused = False

    def apply_target(self, report, play_area) -> None:
        payload = report.emitted[EV_SHOW_TARGET][0]
        self.phase = GamePhase.TARGET_ACTIVE
        self.target = target_from_payload(payload, report.instant, play_area)
        self.target_display_tick = report.instant


class SessionDriver:
    def __init__(
        self,
        config: SessionConfig,
        observer_program: Optional[Program] = None,
        trace_sink=None,
        warn_multi_contact: bool = False,
    ):
        self.config = config
        self.machine: Machine = make_machine(trace=trace_sink)
        for name in _RAW_INPUT_EVENTS + INPUT_EVENTS:
            self.machine.event(name)
        self.session_handle = self.machine.add_program(
            build_session_program(config), label="session"
        )
        if observer_program is not None:
            self.machine.add_program(observer_program, label="observer")
        self.contacts = ContactSet()
        self.mirror = _Mirror()
        self.warn_multi_contact = warn_multi_contact
        self.held = False

    # -- per-tick input handling -------------------------------------------

    def _route_down(self, sample: TouchSample, tick: int) -> None:
        m = self.machine
        zone = classify(sample.x, sample.y, self.config.layout)
        payload = {"id": sample.pointer_id, "x": sample.x, "y": sample.y}
        phase = self.mirror.phase
        if phase is GamePhase.CROWN_PROMPT:
            if zone is Zone.CROWN:
                m.inject(EV_CROWN_TAP, payload)
            elif zone is Zone.PLAY_AREA:
                m.inject(EV_STRAY_CONTACT, payload)
        elif phase is GamePhase.TARGET_ACTIVE and self.mirror.target is not None:
            t = tick - self.mirror.target_display_tick
            if target_hit_test(self.mirror.target, t, sample.x, sample.y):
                m.inject(EV_TARGET_HIT, payload)
            elif zone is Zone.PLAY_AREA:
                m.inject(EV_STRAY_CONTACT, payload)

    def feed_tick(self, tick: int, samples: Iterable[TouchSample]) -> None:
        """Ingests one tick's samples and injects this tick's inputs."""
        m = self.machine
        downs = []
        for sample in samples:
            self.contacts, injections = ingest(sample, self.contacts)
            for name, payload in injections:
                m.inject(name, payload)
            if sample.phase is Phase.DOWN and sample.pointer_id in self.contacts:
                downs.append(sample)
        hold = sign_hold_status(self.contacts, self.config.layout)
        self.held = hold.held
        if hold.held:
            m.inject(EV_SIGN_HELD, {"ids": list(hold.holding_ids)})
            for sample in downs:
                self._route_down(sample, tick)
            if self.warn_multi_contact and self.mirror.phase in (
                GamePhase.CROWN_PROMPT,
                GamePhase.TARGET_ACTIVE,
            ):
                in_play = [
                    pid
                    for pid, c in self.contacts.items()
                    if classify(c.x, c.y, self.config.layout) is Zone.PLAY_AREA
                ]
                if len(in_play) > 1:
                    m.inject(EV_MULTI_CONTACT_WARNING, {"ids": in_play})

    def step(self, tick: int, samples: Iterable[TouchSample] = ()):
        self.feed_tick(tick, samples)
        report = self.machine.react()
        if EV_SHOW_TARGET in report.emitted:
            self.mirror.apply_target(report, self.config.layout.play_area)
        self.mirror.apply(report)
        if EV_SESSION_COMPLETE in report.emitted:
            self.mirror.complete = True
        return report

    # -- whole-session runs --------------------------------------------------

    def default_budget(self, last_sample_tick: int) -> int:
        total = self.config.session_ticks()
        return max(last_sample_tick, total) + total + 5 * self.config.tick_hz + 64

    def run(
        self,
        samples: Iterable[TouchSample],
        max_ticks: Optional[int] = None,
        keep_reports: bool = True,
        on_report: Optional[Callable] = None,
    ) -> RunResult:
        """Replays a sample stream to completion or budget exhaustion."""
        buckets = bucket_samples(samples, self.config.tick_hz)
        last = max(buckets, default=0)
        budget = max_ticks if max_ticks is not None else self.default_budget(last)
        digest = hashlib.sha256()
        reports: List = []
        tick = 0
        completed = False
        while tick <= budget:
            report = self.step(tick, buckets.get(tick, ()))
            digest.update(report.canonical_line().encode("ascii"))
            digest.update(b"\n")
            if keep_reports:
                reports.append(report)
            if on_report is not None:
                on_report(report)
            if self.session_handle in report.terminated:
                completed = True
                tick += 1
                break
            tick += 1
        return RunResult(reports, digest.hexdigest(), completed, tick)

    def run_live(
        self,
        player,
        max_ticks: int,
        keep_reports: bool = True,
    ) -> RunResult:
        """Closed-loop run: asks `player` for each tick's samples, shows it
        every report, and records the consumed stream (the trace)."""
        digest = hashlib.sha256()
        reports: List = []
        consumed: List[TouchSample] = []
        tick = 0
        completed = False
        while tick <= max_ticks:
            samples = player.samples_for_tick(tick)
            consumed.extend(samples)
            report = self.step(tick, samples)
            player.observe(report)
            digest.update(report.canonical_line().encode("ascii"))
            digest.update(b"\n")
            if keep_reports:
                reports.append(report)
            if self.session_handle in report.terminated:
                completed = True
                tick += 1
                break
            tick += 1
        return RunResult(reports, digest.hexdigest(), completed, tick, samples=consumed)
