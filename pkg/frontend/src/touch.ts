// Pointer capture: platform events in, core TouchSamples out.

import type { TouchPhase, TouchSample } from "./types.js";

export interface SurfaceBox {
  left: number;
  top: number;
  width: number;
  height: number;
}

export interface PointerLike {
  pointerId: number;
  clientX: number;
  clientY: number;
  type: "pointerdown" | "pointermove" | "pointerup" | "pointercancel";
}

const PHASE_BY_TYPE: Record<PointerLike["type"], TouchPhase> = {
  pointerdown: "down",
  pointermove: "move",
  pointerup: "up",
  pointercancel: "cancel",
};

function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

/** Normalizes to [0,1]^2; positions off the surface clamp to its edge. */
export function normalizePoint(
  clientX: number,
  clientY: number,
  surface: SurfaceBox,
): { x: number; y: number } {
  return {
    x: clamp01((clientX - surface.left) / surface.width),
    y: clamp01((clientY - surface.top) / surface.height),
  };
}

/**
 * Maps platform pointer ids to small stable contact ids and stamps samples
 * with a monotonic session clock. Move/up events for unknown pointers are
 * ignored (the gateway would reject them anyway).
 */
export class PointerTracker {
  private readonly now: () => number;
  private readonly epoch: number;
  private readonly active = new Map<number, number>();
  private nextContactId = 0;

  constructor(now: () => number) {
    this.now = now;
    this.epoch = now();
  }

  forward(event: PointerLike, surface: SurfaceBox): TouchSample | null {
    const phase = PHASE_BY_TYPE[event.type];
    let contactId: number;
    if (phase === "down") {
      if (this.active.has(event.pointerId)) return null; // duplicate down
      contactId = this.nextContactId++;
      this.active.set(event.pointerId, contactId);
    } else {
      const known = this.active.get(event.pointerId);
      if (known === undefined) return null;
      contactId = known;
      if (phase === "up" || phase === "cancel") {
        this.active.delete(event.pointerId);
      }
    }
    const { x, y } = normalizePoint(event.clientX, event.clientY, surface);
    return { t_ms: this.now() - this.epoch, id: contactId, phase, x, y };
  }
}

/** Accumulates samples and serializes the core's JSONL trace format. */
export class TraceRecorder {
  readonly samples: TouchSample[] = [];

  add(sample: TouchSample): void {
    this.samples.push(sample);
  }

  toJsonl(): string {
    return (
      this.samples
        .map((s) =>
          JSON.stringify({ id: s.id, phase: s.phase, t_ms: s.t_ms, x: s.x, y: s.y }),
        )
        .join("\n") + (this.samples.length ? "\n" : "")
    );
  }
}
