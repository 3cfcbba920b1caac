/** Row-major run-length encoded mask: runs = [start, len, start, len, ...]. */

export interface RleMask {
  width: number;
  height: number;
  runs: number[];
}

/** Decode to a flat Uint8Array of 0/1, row-major, length width*height. */
export function rleDecode(rle: RleMask): Uint8Array {
  const out = new Uint8Array(rle.width * rle.height);
  for (let i = 0; i + 1 < rle.runs.length; i += 2) {
    const start = rle.runs[i];
    const len = rle.runs[i + 1];
    if (start < 0 || len < 0 || start + len > out.length) {
      throw new Error(`run [${start}, ${len}] out of bounds`);
    }
    out.fill(1, start, start + len);
  }
  return out;
}

/** Encode a flat 0/1 array back to RLE (inverse of rleDecode). */
export function rleEncode(mask: Uint8Array, width: number, height: number): RleMask {
  if (mask.length !== width * height) {
    throw new Error(`mask length ${mask.length} != ${width}x${height}`);
  }
  const runs: number[] = [];
  let start = -1;
  for (let i = 0; i < mask.length; i++) {
    if (mask[i] && start < 0) start = i;
    if (!mask[i] && start >= 0) {
      runs.push(start, i - start);
      start = -1;
    }
  }
  if (start >= 0) runs.push(start, mask.length - start);
  return { width, height, runs };
}

/** Pixel set {x,y} covered by the mask; used by tests and hit checks. */
export function maskPixels(rle: RleMask): Set<string> {
  const flat = rleDecode(rle);
  const out = new Set<string>();
  for (let i = 0; i < flat.length; i++) {
    if (flat[i]) out.add(`${i % rle.width},${Math.floor(i / rle.width)}`);
  }
  return out;
}
