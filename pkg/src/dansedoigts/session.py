"""The fine-motor session as a reactive program.

The whole game flow lives inside one machine program: a held-instant
counter, the pause/resume watcher, a progress emitter, and the sequence of
four games, each pairing a pausable clock with a trial loop (crown prompt,
target, hit-or-timeout). The program communicates with the outside world
through events only: it consumes the gateway's injected inputs (`signHeld`,
`crownTap`, `targetHit`, `strayContact`) and generates UI-facing outputs
plus telemetry records. It never renders and never reads the wall clock, so
a session is a pure function of (config, input schedule).

UI-facing payloads carry no counts, scores, or clock digits; geometry and
identifiers only. `progress` is a bare fraction meant to drive a bar length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

from .config import Circular, GameSpec, Linear, SessionConfig, Static
from .reactive import (
    Atom,
    Await,
    Generate,
    LocalEvent,
    Loop,
    Nothing,
    Par,
    Pause,
    Program,
    Repeat,
    Seq,
    Until,
    WhenPresentElse,
)
from .rng import Pcg32
from .touch import Rect

__all__ = [
    "Finger",
    "FINGERS",
    "FingerScheduler",
    "new_finger_scheduler",
    "next_finger",
    "Target",
    "spawn_target",
    "trajectory_position",
    "target_hit_test",
    "progress_fraction",
    "TrialRecord",
    "GamePhase",
    "build_session_program",
    "target_from_payload",
    "UI_EVENTS",
    "INPUT_EVENTS",
    "EV_SIGN_HELD",
    "EV_CROWN_TAP",
    "EV_TARGET_HIT",
    "EV_STRAY_CONTACT",
    "EV_MULTI_CONTACT_WARNING",
    "EV_SHOW_CROWN",
    "EV_SHOW_TARGET",
    "EV_HIDE_TARGET",
    "EV_PROGRESS",
    "EV_PLAY_CUE",
    "EV_GAME_PAUSED",
    "EV_GAME_RESUMED",
    "EV_SESSION_COMPLETE",
    "EV_GAME_STARTED",
    "EV_TRIAL_RECORDED",
    "EV_ACTIVE_TICK",
]

# Inputs injected by the gateway/driver.
EV_SIGN_HELD = "signHeld"
EV_CROWN_TAP = "crownTap"
EV_TARGET_HIT = "targetHit"
EV_STRAY_CONTACT = "strayContact"
EV_MULTI_CONTACT_WARNING = "multiContactWarning"

# UI-facing outputs (the numeric-free surface).
EV_SHOW_CROWN = "showCrown"
EV_SHOW_TARGET = "showTarget"
EV_HIDE_TARGET = "hideTarget"
EV_PROGRESS = "progress"
EV_PLAY_CUE = "playCue"
EV_GAME_PAUSED = "gamePaused"
EV_GAME_RESUMED = "gameResumed"
EV_SESSION_COMPLETE = "sessionComplete"

# Telemetry/internal outputs.
EV_GAME_STARTED = "gameStarted"
EV_TRIAL_RECORDED = "trialRecorded"
EV_ACTIVE_TICK = "activeTick"

# Interned but never generated; used to park a branch until preemption.
_EV_STALL = "_stall"

UI_EVENTS = (
    EV_SHOW_CROWN,
    EV_SHOW_TARGET,
    EV_HIDE_TARGET,
    EV_PROGRESS,
    EV_PLAY_CUE,
    EV_GAME_PAUSED,
    EV_GAME_RESUMED,
    EV_SESSION_COMPLETE,
)

INPUT_EVENTS = (
    EV_SIGN_HELD,
    EV_CROWN_TAP,
    EV_TARGET_HIT,
    EV_STRAY_CONTACT,
    EV_MULTI_CONTACT_WARNING,
)


class Finger(Enum):
    THUMB = "thumb"
    INDEX = "index"
    MIDDLE = "middle"
    RING = "ring"
    LITTLE = "little"


FINGERS = tuple(Finger)


class GamePhase(Enum):
    AWAIT_HOLD = "awaitHold"
    CROWN_PROMPT = "crownPrompt"
    TARGET_ACTIVE = "targetActive"
    PAUSED = "paused"
    FINISHED = "finished"


# ---------------------------------------------------------------------------
# Finger scheduling: random cycles of the five fingers, no repeats across
# cycle boundaries so no prompt ever repeats back to back.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FingerScheduler:
    permutation: tuple
    position: int
    rng_state: tuple


def _draw_permutation(rng: Pcg32, avoid: Optional[Finger]) -> tuple:
    perm = list(FINGERS)
    while True:
        rng.shuffle(perm)
        if avoid is None or perm[0] is not avoid:
            return tuple(perm)


def new_finger_scheduler(seed: int) -> FingerScheduler:
    rng = Pcg32(seed, stream=1)
    perm = _draw_permutation(rng, avoid=None)
    return FingerScheduler(perm, 0, rng.state_tuple())


def next_finger(scheduler: FingerScheduler):
    """Next prompted finger; pure function of the scheduler state."""
    if scheduler.position < len(scheduler.permutation):
        finger = scheduler.permutation[scheduler.position]
        return finger, replace(scheduler, position=scheduler.position + 1)
    rng = Pcg32.from_state(*scheduler.rng_state)
    perm = _draw_permutation(rng, avoid=scheduler.permutation[-1])
    return perm[0], FingerScheduler(perm, 1, rng.state_tuple())


# ---------------------------------------------------------------------------
# Targets and trajectories (per-tick units, pure functions).
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    """One target: for circular motion (x, y) is the orbit center, otherwise
    the start position. The disc never leaves the play area."""

    x: float
    y: float
    radius: float
    motion: dict  # {"kind": ...} with per-tick quantities
    spawn_tick: int
    bounds: Rect  # play area inset by radius; linear motion reflects here


def _resolve_motion(spec, tick_hz: int) -> dict:
    if isinstance(spec, Static):
        return {"kind": "static"}
    if isinstance(spec, Linear):
        return {
            "kind": "linear",
            "vx": spec.vx / tick_hz,
            "vy": spec.vy / tick_hz,
            "bounce": spec.bounce,
        }
    if isinstance(spec, Circular):
        return {
            "kind": "circular",
            "r": spec.radius,
            "omega": spec.angular_velocity / tick_hz,
            "phase": 0.0,
        }
    raise TypeError(f"unknown motion {spec!r}")


def spawn_target(
    game: GameSpec,
    play_area: Rect,
    previous: Optional[Target],
    rng: Pcg32,
    spawn_tick: int,
    tick_hz: int,
) -> Target:
    """Uniform draw over the inset play area, redrawn (up to 64 times, then
    keeping the farthest candidate) while closer than two radii to the
    previous target, so consecutive targets never overlap."""
    margin = game.target_radius
    motion = _resolve_motion(game.motion, tick_hz)
    if motion["kind"] == "circular":
        margin += motion["r"]
    inset = play_area.inset(margin)
    bounds = play_area.inset(game.target_radius)

    if isinstance(game.motion, Circular) and game.motion.center is not None:
        # Fixed orbit: variety comes from the starting angle instead.
        cx, cy = game.motion.center
        motion = dict(motion, phase=rng.uniform(0.0, 2.0 * math.pi))
        return Target(cx, cy, game.target_radius, motion, spawn_tick, bounds)

    best = None
    best_dist = -1.0
    for _ in range(64):
        x = rng.uniform(inset.x, inset.x + inset.w)
        y = rng.uniform(inset.y, inset.y + inset.h)
        if previous is None:
            return Target(x, y, game.target_radius, motion, spawn_tick, bounds)
        d = math.hypot(x - previous.x, y - previous.y)
        if d >= 2.0 * game.target_radius:
            return Target(x, y, game.target_radius, motion, spawn_tick, bounds)
        if d > best_dist:
            best, best_dist = (x, y), d
    return Target(best[0], best[1], game.target_radius, motion, spawn_tick, bounds)


def _fold(p0: float, v: float, t: float, lo: float, hi: float, bounce: bool) -> float:
    p = p0 + v * t
    if not bounce or hi <= lo:
        return min(max(p, lo), hi)
    span = hi - lo
    u = (p - lo) % (2.0 * span)
    return lo + (u if u <= span else 2.0 * span - u)


def trajectory_position(target: Target, t_ticks: float):
    """Disc center t_ticks after spawn. Pure, no accumulated state, so any
    tick can be evaluated directly and replays cannot drift."""
    m = target.motion
    kind = m["kind"]
    if kind == "static":
        return (target.x, target.y)
    if kind == "linear":
        b = target.bounds
        return (
            _fold(target.x, m["vx"], t_ticks, b.x, b.x + b.w, m["bounce"]),
            _fold(target.y, m["vy"], t_ticks, b.y, b.y + b.h, m["bounce"]),
        )
    if kind == "circular":
        theta = m["phase"] + m["omega"] * t_ticks
        return (target.x + m["r"] * math.cos(theta), target.y + m["r"] * math.sin(theta))
    raise ValueError(f"unknown motion kind {kind!r}")


def target_hit_test(target: Target, t_ticks: float, x: float, y: float) -> bool:
    """Closed disc: a contact exactly on the rim counts as a hit."""
    cx, cy = trajectory_position(target, t_ticks)
    return math.hypot(x - cx, y - cy) <= target.radius


def progress_fraction(active_play_ticks: int, duration_ticks: int) -> float:
    if duration_ticks <= 0:
        raise ValueError("duration_ticks must be > 0")
    return min(1.0, max(0.0, active_play_ticks / duration_ticks))


def _target_payload(target: Target) -> dict:
    return {
        "x": target.x,
        "y": target.y,
        "radius": target.radius,
        "motion": dict(target.motion),
    }


def target_from_payload(payload: dict, spawn_tick: int, play_area: Rect) -> Target:
    """Rebuilds the pure trajectory model from a `showTarget` payload, as the
    routing layer and the UI both do."""
    radius = payload["radius"]
    return Target(
        x=payload["x"],
        y=payload["y"],
        radius=radius,
        motion=dict(payload["motion"]),
        spawn_tick=spawn_tick,
        bounds=play_area.inset(radius),
    )


# ---------------------------------------------------------------------------
# Trial records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrialRecord:
    """One crown-prompt-plus-target cycle. Wall times are tick-quantized;
    reaction counts active (unpaused) ticks from target display to hit, so
    it never exceeds the timeout."""

    game: str
    finger: str
    prompt_tick: int
    crown_tap_tick: int
    target_x: float
    target_y: float
    target_radius: float
    motion: dict
    outcome_kind: str  # "hit" | "timeout"
    hit_tick: Optional[int]
    hit_x: Optional[float]
    hit_y: Optional[float]
    reaction_ticks: Optional[int]
    unexpected_contacts: int
    tick_hz: int

    @property
    def is_hit(self) -> bool:
        return self.outcome_kind == "hit"

    def _ms(self, ticks) -> float:
        return ticks * 1000.0 / self.tick_hz

    @property
    def reaction_ms(self) -> Optional[float]:
        return None if self.reaction_ticks is None else self._ms(self.reaction_ticks)

    def to_payload(self) -> dict:
        outcome = {"kind": self.outcome_kind}
        if self.is_hit:
            outcome.update(
                tick=self.hit_tick,
                t_ms=self._ms(self.hit_tick),
                x=self.hit_x,
                y=self.hit_y,
                reaction_ticks=self.reaction_ticks,
                reaction_ms=self.reaction_ms,
            )
        return {
            "game": self.game,
            "finger": self.finger,
            "prompt_tick": self.prompt_tick,
            "prompt_t_ms": self._ms(self.prompt_tick),
            "crown_tap_tick": self.crown_tap_tick,
            "crown_tap_t_ms": self._ms(self.crown_tap_tick),
            "target": {
                "x": self.target_x,
                "y": self.target_y,
                "radius": self.target_radius,
                "motion": dict(self.motion),
            },
            "outcome": outcome,
            "unexpected_contacts": self.unexpected_contacts,
            "tick_hz": self.tick_hz,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "TrialRecord":
        outcome = payload["outcome"]
        hit = outcome["kind"] == "hit"
        return cls(
            game=payload["game"],
            finger=payload["finger"],
            prompt_tick=payload["prompt_tick"],
            crown_tap_tick=payload["crown_tap_tick"],
            target_x=payload["target"]["x"],
            target_y=payload["target"]["y"],
            target_radius=payload["target"]["radius"],
            motion=dict(payload["target"]["motion"]),
            outcome_kind=outcome["kind"],
            hit_tick=outcome.get("tick") if hit else None,
            hit_x=outcome.get("x") if hit else None,
            hit_y=outcome.get("y") if hit else None,
            reaction_ticks=outcome.get("reaction_ticks") if hit else None,
            unexpected_contacts=payload["unexpected_contacts"],
            tick_hz=payload["tick_hz"],
        )


# ---------------------------------------------------------------------------
# The session program
# ---------------------------------------------------------------------------


class _SessionCells:
    """Host-side state shared by the program's atoms and payload producers.

    Atoms only read the event environment; all mutation happens here, on the
    session's own state, which is what keeps observers non-interfering.
    """

    def __init__(self, config: SessionConfig):
        self.config = config
        self.tick_hz = config.tick_hz
        self.scheduler = new_finger_scheduler(config.rng_seed)
        self.spawn_rng = Pcg32(config.rng_seed, stream=2)
        self.total_ticks = config.session_ticks()
        self.active_ticks = 0
        self.held_instants = 0
        self.game: Optional[GameSpec] = None
        self.prev_target: dict = {}
        self.finger: Optional[Finger] = None
        self.prompt_tick = 0
        self.crown_tap_tick = 0
        self.target: Optional[Target] = None
        self.held_at_display = 0
        self.hit_stash = None  # (instant, x, y, held_count)
        self.outcome = None
        self.trial_strays = 0


def _gated_pause(counted: Program) -> Program:
    """One active tick: waits out unheld instants without consuming budget,
    then runs `counted` (which must end in a Pause) at a held instant."""
    return WhenPresentElse(EV_SIGN_HELD, counted, Seq(Await(EV_SIGN_HELD), counted))


def _session_helpers(cells: _SessionCells) -> Program:
    """Listeners that run for the whole session, first in the parallel order
    so counters are already up to date when game branches read them."""

    def inc_held(env):
        cells.held_instants += 1

    held_counter = Loop(Seq(Await(EV_SIGN_HELD), Atom(inc_held), Pause()))

    gate_watcher = Seq(
        Await(EV_SIGN_HELD),
        Loop(
            WhenPresentElse(
                EV_SIGN_HELD,
                Pause(),
                Seq(
                    Generate(EV_GAME_PAUSED),
                    Await(EV_SIGN_HELD),
                    Generate(EV_GAME_RESUMED),
                ),
            )
        ),
    )

    def inc_active(env):
        cells.active_ticks += 1

    progress_emitter = Loop(
        Seq(
            Await(EV_ACTIVE_TICK),
            Atom(inc_active),
            Generate(
                EV_PROGRESS,
                lambda env: {
                    "fraction": progress_fraction(cells.active_ticks, cells.total_ticks)
                },
            ),
            Pause(),
        )
    )

    def stash_hit(env):
        first = env.values(EV_TARGET_HIT)[0]
        cells.hit_stash = (env.instant, first["x"], first["y"], cells.held_instants)

    hit_stash = Loop(Seq(Await(EV_TARGET_HIT), Atom(stash_hit), Pause()))

    def count_strays(env):
        cells.trial_strays += len(env.values(EV_STRAY_CONTACT))

    stray_counter = Loop(Seq(Await(EV_STRAY_CONTACT), Atom(count_strays), Pause()))

    return Par(held_counter, gate_watcher, progress_emitter, hit_stash, stray_counter)


def _trial_program(cells: _SessionCells, game: GameSpec) -> Program:
    timeout_ticks = game.timeout_ticks(cells.tick_hz)

    def begin_trial(env):
        finger, cells.scheduler = next_finger(cells.scheduler)
        cells.finger = finger
        cells.prompt_tick = env.instant
        cells.trial_strays = 0
        cells.hit_stash = None
        cells.outcome = None

    def record_crown(env):
        cells.crown_tap_tick = env.instant

    def make_target(env):
        cells.target = spawn_target(
            game,
            cells.config.layout.play_area,
            cells.prev_target.get(game.name),
            cells.spawn_rng,
            env.instant,
            cells.tick_hz,
        )
        cells.prev_target[game.name] = cells.target
        cells.held_at_display = cells.held_instants

    def record_hit(env):
        instant, x, y, held_at_hit = cells.hit_stash
        cells.outcome = {
            "kind": "hit",
            "tick": instant,
            "x": x,
            "y": y,
            "reaction_ticks": held_at_hit - cells.held_at_display,
        }

    def record_timeout(env):
        cells.outcome = {"kind": "timeout"}

    def trial_payload(env):
        o = cells.outcome
        record = TrialRecord(
            game=game.name,
            finger=cells.finger.value,
            prompt_tick=cells.prompt_tick,
            crown_tap_tick=cells.crown_tap_tick,
            target_x=cells.target.x,
            target_y=cells.target.y,
            target_radius=cells.target.radius,
            motion=cells.target.motion,
            outcome_kind=o["kind"],
            hit_tick=o.get("tick"),
            hit_x=o.get("x"),
            hit_y=o.get("y"),
            reaction_ticks=o.get("reaction_ticks"),
            unexpected_contacts=cells.trial_strays,
            tick_hz=cells.tick_hz,
        )
        return record.to_payload()

    ensure_held = WhenPresentElse(EV_SIGN_HELD, Nothing(), Await(EV_SIGN_HELD))
    quiet_tick = _gated_pause(Pause())

    return Seq(
        ensure_held,
        Atom(begin_trial),
        Generate(EV_SHOW_CROWN, lambda env: {"finger": cells.finger.value}),
        Await(EV_CROWN_TAP),
        Atom(record_crown),
        Atom(make_target),
        Generate(EV_SHOW_TARGET, lambda env: _target_payload(cells.target)),
        Until(
            EV_TARGET_HIT,
            body=Seq(
                Repeat(timeout_ticks, quiet_tick),
                # A hit landing exactly when the budget runs out still wins:
                # park so the preemption handler takes it at the next instant.
                WhenPresentElse(EV_TARGET_HIT, Await(_EV_STALL), Atom(record_timeout)),
            ),
            handler=Seq(
                Atom(record_hit),
                Generate(EV_PLAY_CUE, lambda env: {"cue": game.cue}),
            ),
        ),
        Generate(EV_HIDE_TARGET),
        Generate(EV_TRIAL_RECORDED, trial_payload),
    )


def _game_program(cells: _SessionCells, game: GameSpec) -> Program:
    duration = game.duration_ticks(cells.tick_hz)

    def set_game(env):
        cells.game = game

    counted_tick = Seq(Generate(EV_ACTIVE_TICK), Pause())
    clock = Repeat(duration, _gated_pause(counted_tick))

    return Seq(
        Atom(set_game),
        Generate(EV_GAME_STARTED, {"game": game.name}),
        LocalEvent(
            "gameOver",
            Par(
                Seq(clock, Generate("gameOver")),
                Until("gameOver", Loop(_trial_program(cells, game)), Generate(EV_HIDE_TARGET)),
            ),
        ),
    )


def build_session_program(config: SessionConfig) -> Program:
    """One reactive program for a whole session: four games in sequence,
    gated on the stop signs, with pause/resume, progress, cues, and the
    end-of-session reward event."""
    cells = _SessionCells(config)
    games = config.active_games()

    def complete_payload(env):
        return {
            "theme": config.theme,
            "subtheme": config.subtheme,
            "games": [g.name for g in games],
        }

    games_branch = Seq(
        *[_game_program(cells, g) for g in games],
        Generate("sessionDone"),
    )

    return LocalEvent(
        "sessionDone",
        Seq(
            Par(
                Until("sessionDone", _session_helpers(cells), Nothing()),
                games_branch,
            ),
            Generate(EV_SESSION_COMPLETE, complete_payload),
        ),
    )
