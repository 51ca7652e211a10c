// Scene rendering against a minimal draw interface so tests can record
// every call. No numerals anywhere: progress is a bare fill, feedback is
// shape and color only.

import type { Finger, Layout, Rect, TrainedHand, ViewState } from "./types.js";
import { FINGERS } from "./types.js";
import { trajectoryPosition } from "./view.js";

export interface Draw {
  clear(color: string): void;
  rect(x: number, y: number, w: number, h: number, color: string): void;
  circle(x: number, y: number, r: number, color: string): void;
  text(content: string, x: number, y: number, size: number, color: string): void;
}

const COLORS = {
  background: "#fdf6e3",
  sign: "#d33682",
  signHeld: "#859900",
  play: "#eee8d5",
  crownZone: "#fatigue" as string, // replaced below; placeholder art
  hand: "#b58900",
  fingerIdle: "#93a1a1",
  fingerCrowned: "#cb4b16",
  target: "#268bd2",
  progressTrack: "#93a1a1",
  progressFill: "#859900",
  pauseShade: "rgba(0,0,0,0.45)",
  reward: "#6c71c4",
};
COLORS.crownZone = "#fdf0c0";

function px(rect: Rect, w: number, h: number): [number, number, number, number] {
  return [rect.x * w, rect.y * h, rect.w * w, rect.h * h];
}

function drawCrownHand(
  draw: Draw,
  zone: Rect,
  crowned: Finger,
  trainedHand: TrainedHand,
  w: number,
  h: number,
): void {
  const [zx, zy, zw, zh] = px(zone, w, h);
  draw.rect(zx, zy, zw, zh, COLORS.crownZone);
  // Five finger bars over a palm block; thumb sits on the side of the
  // trained hand, so the picture mirrors for left-handed play.
  const order = trainedHand === "right" ? FINGERS : [...FINGERS].reverse();
  const palmH = zh * 0.35;
  draw.rect(zx + zw * 0.2, zy + zh - palmH, zw * 0.6, palmH * 0.8, COLORS.hand);
  const barW = zw / 7;
  order.forEach((finger, i) => {
    const bx = zx + barW * (1 + i * 1.1) + zw * 0.08;
    const isCrowned = finger === crowned;
    const barH = zh * (0.38 + (i === 0 ? 0 : 0.06)) * (isCrowned ? 1.15 : 1);
    const by = zy + zh - palmH - barH;
    draw.rect(bx, by, barW * 0.8, barH, isCrowned ? COLORS.fingerCrowned : COLORS.fingerIdle);
    if (isCrowned) {
      // A small three-point crown above the prompted finger.
      const cx = bx + barW * 0.4;
      draw.circle(cx - barW * 0.25, by - barW * 0.35, barW * 0.18, COLORS.hand);
      draw.circle(cx, by - barW * 0.55, barW * 0.2, COLORS.hand);
      draw.circle(cx + barW * 0.25, by - barW * 0.35, barW * 0.18, COLORS.hand);
    }
  });
}

export interface RenderOptions {
  layout: Layout;
  trainedHand: TrainedHand;
  width: number;
  height: number;
}

/** Draws one frame from the projected state. Pure function of its inputs. */
export function renderFrame(draw: Draw, state: ViewState, options: RenderOptions): void {
  const { layout, width: w, height: h } = options;
  draw.clear(COLORS.background);

  draw.rect(...px(layout.play_area, w, h), COLORS.play);
  for (const zone of layout.sign_zones) {
    const [x, y, zw, zh] = px(zone, w, h);
    draw.rect(x, y, zw, zh, state.held ? COLORS.signHeld : COLORS.sign);
    // Octagon-ish inner disc to read as a stop sign without any glyph.
    draw.circle(x + zw / 2, y + zh / 2, Math.min(zw, zh) * 0.32, COLORS.background);
  }

  if (state.phase === "crownPrompt" && state.crownFinger && layout.crown_zone) {
    drawCrownHand(draw, layout.crown_zone, state.crownFinger, options.trainedHand, w, h);
  }

  if (state.target) {
    const ticks = state.instant - state.target.shownAtInstant;
    const pos = trajectoryPosition(state.target, ticks, layout.play_area);
    draw.circle(pos.x * w, pos.y * h, state.target.radius * Math.min(w, h), COLORS.target);
  }

  // Progress bar: a bare fill, no ticks, no digits.
  const barY = h * 0.965;
  draw.rect(w * 0.05, barY, w * 0.9, h * 0.02, COLORS.progressTrack);
  draw.rect(w * 0.05, barY, w * 0.9 * state.progressFraction, h * 0.02, COLORS.progressFill);

  if (state.rewardGames) {
    // Reward: one pane per completed game, composed side by side.
    const n = state.rewardGames.length;
    state.rewardGames.forEach((game, i) => {
      const paneW = (w * 0.8) / n;
      draw.rect(w * 0.1 + i * paneW, h * 0.25, paneW * 0.9, h * 0.4, COLORS.reward);
      draw.text(game, w * 0.1 + i * paneW + paneW * 0.1, h * 0.7, h * 0.04, COLORS.hand);
    });
    draw.text("bravo", w * 0.42, h * 0.18, h * 0.08, COLORS.fingerCrowned);
  } else if (state.paused) {
    draw.rect(0, 0, w, h, COLORS.pauseShade);
    // Sign reminder: pulse the sign zones over the shade.
    for (const zone of layout.sign_zones) {
      const [x, y, zw, zh] = px(zone, w, h);
      draw.rect(x, y, zw, zh, COLORS.sign);
    }
  }
}
