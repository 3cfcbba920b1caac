/** Client-side mask overlay compositing over RGBA pixel buffers.
 *
 * Pure array-in/array-out so the canvas plumbing stays trivial and the
 * compositing itself is unit-testable without a DOM.
 */

import { RleMask, rleDecode } from "./rle.js";
import { Rgb } from "./color.js";

/**
 * Blend `color` at `alpha` into the RGBA buffer wherever the mask is set.
 * The buffer layout matches canvas ImageData.data (row-major RGBA).
 */
export function compositeMask(
  rgba: Uint8ClampedArray,
  rle: RleMask,
  color: Rgb,
  alpha: number,
): Uint8ClampedArray {
  if (rgba.length !== rle.width * rle.height * 4) {
    throw new Error(
      `buffer length ${rgba.length} != ${rle.width}x${rle.height}x4`,
    );
  }
  if (alpha < 0 || alpha > 1) throw new Error(`alpha ${alpha} out of [0, 1]`);
  const mask = rleDecode(rle);
  const out = new Uint8ClampedArray(rgba);
  for (let i = 0; i < mask.length; i++) {
    if (!mask[i]) continue;
    const o = i * 4;
    out[o] = Math.round(out[o] * (1 - alpha) + color.r * alpha);
    out[o + 1] = Math.round(out[o + 1] * (1 - alpha) + color.g * alpha);
    out[o + 2] = Math.round(out[o + 2] * (1 - alpha) + color.b * alpha);
    out[o + 3] = 255;
  }
  return out;
}

/** Pixels changed by compositing — must equal the RLE decode exactly. */
export function changedPixels(
  before: Uint8ClampedArray,
  after: Uint8ClampedArray,
  width: number,
): Set<string> {
  const out = new Set<string>();
  for (let i = 0; i < before.length; i += 4) {
    for (let k = 0; k < 4; k++) {
      if (before[i + k] !== after[i + k]) {
        const p = i / 4;
        out.add(`${p % width},${Math.floor(p / width)}`);
        break;
      }
    }
  }
  return out;
}
