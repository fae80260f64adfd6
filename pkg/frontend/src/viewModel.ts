import type { Rle, ServerMsg, Viewport } from "./protocol.js";
import { RleError, decodeRle, maskArea } from "./rle.js";

export type Phase = "idle" | "loaded" | "segmenting" | "done";

export interface TrailPoint {
  x: number;
  y: number;
  t: number;
}

const TRAIL_WINDOW_MS = 2000;

/**
 * All client-side state behind the canvas.  Segmentation state is never
 * mutated locally: every mask shown came from a server message, stale mask
 * messages (iteration not above the last rendered one) are dropped, and a
 * malformed RLE raises a banner while the previous frame stays up.
 */
export class ViewModel {
  phase: Phase = "idle";
  height = 0;
  width = 0;
  imagePngB64: string | null = null;
  viewport: Viewport = { offset_x: 0, offset_y: 0, scale: 1, display_density: 7.21 };
  mask: Uint8Array | null = null;
  maskIteration = -1;
  dice: number | null = null;
  latencyMs: number | null = null;
  elapsedMs: number | null = null;
  mode: "gaze" | "bbox" = "gaze";
  structure: string | null = null;
  banner: string | null = null;
  trail: TrailPoint[] = [];

  startStructure(structure: string, mode: "gaze" | "bbox"): void {
    this.structure = structure;
    this.mode = mode;
    this.phase = "segmenting";
    this.mask = null;
    this.maskIteration = -1;
    this.dice = null;
    this.elapsedMs = null;
    this.banner = null;
    this.trail = [];
  }

  pushTrail(x: number, y: number, t: number): void {
    this.trail.push({ x, y, t });
    const cutoff = t - TRAIL_WINDOW_MS;
    while (this.trail.length > 0 && this.trail[0].t < cutoff) {
      this.trail.shift();
    }
  }

  /** Returns true when the message changed what should be rendered. */
  apply(msg: ServerMsg): boolean {
    switch (msg.type) {
      case "case_loaded":
        this.phase = "loaded";
        this.height = msg.H;
        this.width = msg.W;
        this.imagePngB64 = msg.image_png_b64;
        this.viewport = msg.viewport;
        this.mask = null;
        this.maskIteration = -1;
        this.banner = null;
        return true;
      case "mask":
        return this.applyMask(msg.iteration, msg.rle, msg.dice, msg.latency_ms);
      case "done":
        this.applyMask(this.maskIteration + 1, msg.final_rle, msg.dice, null);
        this.phase = "done";
        this.elapsedMs = msg.elapsed_ms;
        return true;
      case "error":
        this.banner = `${msg.code}: ${msg.detail}`;
        return true;
    }
  }

  private applyMask(
    iteration: number,
    rle: Rle,
    dice: number | null,
    latencyMs: number | null
  ): boolean {
    if (iteration <= this.maskIteration) {
      return false; // stale: an earlier message already superseded it
    }
    let bits: Uint8Array;
    try {
      bits = decodeRle(rle);
    } catch (err) {
      this.banner = err instanceof RleError ? `bad mask: ${err.message}` : String(err);
      return true; // banner changed; previous mask stays on screen
    }
    if (bits.length !== this.height * this.width) {
      this.banner = `bad mask: ${bits.length} px for a ${this.height}x${this.width} slice`;
      return true;
    }
    this.mask = bits;
    this.maskIteration = iteration;
    this.dice = dice;
    this.latencyMs = latencyMs;
    this.banner = null;
    return true;
  }

  maskArea(): number {
    return this.mask ? maskArea(this.mask) : 0;
  }
}
