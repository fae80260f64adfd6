import type { ViewModel } from "./viewModel.js";

const MASK_FILL = "rgba(66, 135, 245, 0.35)";
const CONTOUR_STROKE = "rgba(250, 200, 60, 0.9)";
const TRAIL_FILL = "rgba(80, 160, 255, 0.8)";

export interface DragBox {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

/**
 * Draw the current view model onto the canvas: grayscale slice underlay,
 * semi-transparent mask fill, optional reference contour, the recent gaze
 * trail, and the drag rectangle in bbox mode.
 */
export function renderState(
  ctx: CanvasRenderingContext2D,
  vm: ViewModel,
  slice: HTMLImageElement | null,
  contour: Uint8Array | null,
  dragBox: DragBox | null,
  scale: number
): void {
  const { width: w, height: h } = vm;
  ctx.canvas.width = w * scale;
  ctx.canvas.height = h * scale;
  ctx.imageSmoothingEnabled = false;
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  if (slice) {
    ctx.drawImage(slice, 0, 0, w * scale, h * scale);
  }
  if (vm.mask) {
    ctx.fillStyle = MASK_FILL;
    fillBits(ctx, vm.mask, w, h, scale);
  }
  if (contour) {
    ctx.fillStyle = CONTOUR_STROKE;
    fillBits(ctx, boundaryOf(contour, w, h), w, h, scale);
  }
  ctx.fillStyle = TRAIL_FILL;
  for (const p of vm.trail) {
    ctx.beginPath();
    ctx.arc(p.x * scale, p.y * scale, Math.max(1.5, scale * 0.6), 0, 2 * Math.PI);
    ctx.fill();
  }
  if (dragBox) {
    ctx.strokeStyle = "#6f6";
    ctx.lineWidth = 1.5;
    ctx.strokeRect(
      Math.min(dragBox.x0, dragBox.x1) * scale,
      Math.min(dragBox.y0, dragBox.y1) * scale,
      Math.abs(dragBox.x1 - dragBox.x0) * scale,
      Math.abs(dragBox.y1 - dragBox.y0) * scale
    );
  }
}

function fillBits(
  ctx: CanvasRenderingContext2D,
  bits: Uint8Array,
  w: number,
  h: number,
  scale: number
): void {
  for (let r = 0; r < h; r++) {
    let c = 0;
    while (c < w) {
      if (bits[r * w + c]) {
        let end = c;
        while (end < w && bits[r * w + end]) end++;
        ctx.fillRect(c * scale, r * scale, (end - c) * scale, scale);
        c = end;
      } else {
        c++;
      }
    }
  }
}

/** 4-neighbour boundary of a binary mask, used for the reference contour. */
export function boundaryOf(bits: Uint8Array, w: number, h: number): Uint8Array {
  const out = new Uint8Array(bits.length);
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      const i = r * w + c;
      if (!bits[i]) continue;
      const edge =
        r === 0 || r === h - 1 || c === 0 || c === w - 1 ||
        !bits[i - w] || !bits[i + w] || !bits[i - 1] || !bits[i + 1];
      if (edge) out[i] = 1;
    }
  }
  return out;
}
