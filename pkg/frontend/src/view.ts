// Pure projection of the core's per-instant events into what to draw.
// The UI never computes game outcomes; it only mirrors what the core said.

import type {
  Finger,
  InstantRecord,
  Motion,
  Rect,
  TargetView,
  ViewState,
} from "./types.js";

function fold(
  p0: number,
  v: number,
  t: number,
  lo: number,
  hi: number,
  bounce: boolean,
): number {
  const p = p0 + v * t;
  if (!bounce || hi <= lo) return Math.min(Math.max(p, lo), hi);
  const span = hi - lo;
  let u = (p - lo) % (2 * span);
  if (u < 0) u += 2 * span;
  return lo + (u <= span ? u : 2 * span - u);
}

/** Disc center `tTicks` after display; mirrors the core's pure trajectory. */
export function trajectoryPosition(
  target: TargetView,
  tTicks: number,
  playArea: Rect,
): { x: number; y: number } {
  const m: Motion = target.motion;
  switch (m.kind) {
    case "static":
      return { x: target.x, y: target.y };
    case "linear": {
      const loX = playArea.x + target.radius;
      const hiX = playArea.x + playArea.w - target.radius;
      const loY = playArea.y + target.radius;
      const hiY = playArea.y + playArea.h - target.radius;
      return {
        x: fold(target.x, m.vx, tTicks, loX, hiX, m.bounce),
        y: fold(target.y, m.vy, tTicks, loY, hiY, m.bounce),
      };
    }
    case "circular": {
      const theta = m.phase + m.omega * tTicks;
      return {
        x: target.x + m.r * Math.cos(theta),
        y: target.y + m.r * Math.sin(theta),
      };
    }
  }
}

function firstPayload<T>(record: InstantRecord, name: string): T | undefined {
  const values = record.emitted[name];
  return values && values.length ? (values[0] as T) : undefined;
}

/** Applies one instant's events; processing order makes hide-then-show
 * within a single instant resolve to "show". */
export function applyInstant(state: ViewState, record: InstantRecord): ViewState {
  const emitted = record.emitted;
  const next: ViewState = { ...state, instant: record.instant, cuesThisInstant: [] };

  next.held = "signHeld" in emitted;
  if ("hideTarget" in emitted) {
    next.target = null;
    if (next.phase !== "finished") next.phase = "awaitHold";
  }
  const crown = firstPayload<{ finger: Finger }>(record, "showCrown");
  if (crown) {
    next.crownFinger = crown.finger;
    next.target = null;
    next.phase = "crownPrompt";
  }
  const target = firstPayload<{ x: number; y: number; radius: number; motion: Motion }>(
    record,
    "showTarget",
  );
  if (target) {
    next.target = { ...target, shownAtInstant: record.instant };
    next.phase = "targetActive";
  }
  if ("gamePaused" in emitted) next.paused = true;
  if ("gameResumed" in emitted) next.paused = false;
  const progress = firstPayload<{ fraction: number }>(record, "progress");
  if (progress) next.progressFraction = progress.fraction;
  const cues = emitted["playCue"];
  if (cues) next.cuesThisInstant = cues.map((c) => (c as { cue: string }).cue);
  const complete = firstPayload<{ games: string[] }>(record, "sessionComplete");
  if (complete) {
    next.rewardGames = complete.games;
    next.phase = "finished";
    next.target = null;
    next.crownFinger = null;
  }
  return next;
}

/** Guard used by tests: a view state must never carry numeric text fields
 * besides geometry and the bare progress fraction. */
export function viewStateFieldNames(): string[] {
  const state = {
    instant: 0,
    phase: "awaitHold",
    paused: false,
    held: false,
    crownFinger: null,
    target: null,
    progressFraction: 0,
    cuesThisInstant: [],
    rewardGames: null,
  };
  return Object.keys(state);
}
