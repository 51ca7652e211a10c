// Wire types shared with the core: the session config document, the touch
// trace sample (JSONL), and the per-instant event record the core emits.

export type TouchPhase = "down" | "move" | "up" | "cancel";

export interface TouchSample {
  t_ms: number;
  id: number;
  phase: TouchPhase;
  x: number;
  y: number;
}

export interface InstantRecord {
  instant: number;
  emitted: Record<string, unknown[]>;
  terminated: number[];
}

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface Layout {
  sign_zones: [Rect, Rect];
  play_area: Rect;
  min_sign_separation: number;
  crown_zone?: Rect;
}

export type Motion =
  | { kind: "static" }
  | { kind: "linear"; vx: number; vy: number; bounce: boolean }
  | { kind: "circular"; r: number; omega: number; phase: number };

export type Finger = "thumb" | "index" | "middle" | "ring" | "little";

export const FINGERS: readonly Finger[] = [
  "thumb",
  "index",
  "middle",
  "ring",
  "little",
];

export type TrainedHand = "left" | "right";

export interface GameConfig {
  name: string;
  cue?: string;
}

export interface SessionConfigDoc {
  schema?: string;
  theme: string;
  subthemes: { name: string; games: GameConfig[] }[];
  subtheme?: string;
  trained_hand?: TrainedHand;
  tick_hz?: number;
  layout?: Layout;
  assets?: { cues?: Record<string, { image?: string; sound?: string }> };
}

export interface TargetView {
  x: number;
  y: number;
  radius: number;
  motion: Motion;
  shownAtInstant: number;
}

export type PhaseName = "awaitHold" | "crownPrompt" | "targetActive" | "finished";

// Pure projection of core events; deliberately free of counters or clocks.
export interface ViewState {
  instant: number;
  phase: PhaseName;
  paused: boolean;
  held: boolean;
  crownFinger: Finger | null;
  target: TargetView | null;
  progressFraction: number;
  cuesThisInstant: string[];
  rewardGames: string[] | null;
}

export function initialViewState(): ViewState {
  return {
    instant: -1,
    phase: "awaitHold",
    paused: false,
    held: false,
    crownFinger: null,
    target: null,
    progressFraction: 0,
    cuesThisInstant: [],
    rewardGames: null,
  };
}
