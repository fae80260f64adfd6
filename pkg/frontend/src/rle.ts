import type { Rle } from "./protocol.js";

export class RleError extends Error {}

/**
 * Decode a run-length mask into a flat Uint8Array (row-major, H*W long).
 *
 * Runs alternate starting with background; the first run may be zero when
 * the mask begins with foreground.  Every other run must be positive and
 * the runs must sum to exactly H*W, otherwise the payload is rejected.
 */
export function decodeRle(obj: Rle): Uint8Array {
  if (!obj || !Array.isArray(obj.size) || obj.size.length !== 2 || !Array.isArray(obj.rle)) {
    throw new RleError("RLE payload must carry size [H, W] and a run list");
  }
  const [h, w] = obj.size;
  if (!Number.isInteger(h) || !Number.isInteger(w) || h < 1 || w < 1) {
    throw new RleError(`bad mask size ${h}x${w}`);
  }
  if (obj.rle.length === 0) {
    throw new RleError("empty run list");
  }
  let total = 0;
  for (let i = 0; i < obj.rle.length; i++) {
    const run = obj.rle[i];
    if (!Number.isInteger(run) || run < 0 || (run === 0 && i !== 0)) {
      throw new RleError(`run ${i} is ${run}; only the first run may be 0`);
    }
    total += run;
  }
  if (total !== h * w) {
    throw new RleError(`runs sum to ${total}, expected ${h * w}`);
  }
  const out = new Uint8Array(h * w);
  let pos = 0;
  let value = 0;
  for (const run of obj.rle) {
    if (value === 1) out.fill(1, pos, pos + run);
    pos += run;
    value ^= 1;
  }
  return out;
}

export function maskArea(bits: Uint8Array): number {
  let area = 0;
  for (let i = 0; i < bits.length; i++) area += bits[i];
  return area;
}
