import { describe, expect, it } from "vitest";

import { maskPixels, rleDecode, rleEncode } from "../src/rle.js";

describe("rle", () => {
  it("decodes the documented example", () => {
    // 4x2: row 0 pixels 1-2, row 1 pixel 0
    const rle = { width: 4, height: 2, runs: [1, 2, 4, 1] };
    expect(Array.from(rleDecode(rle))).toEqual([0, 1, 1, 0, 1, 0, 0, 0]);
  });

  it("handles empty and full masks", () => {
    expect(Array.from(rleDecode({ width: 3, height: 2, runs: [] }))).toEqual([
      0, 0, 0, 0, 0, 0,
    ]);
    expect(Array.from(rleDecode({ width: 2, height: 2, runs: [0, 4] }))).toEqual([
      1, 1, 1, 1,
    ]);
  });

  it("rejects out-of-bounds runs", () => {
    expect(() => rleDecode({ width: 2, height: 2, runs: [3, 5] })).toThrow(/bounds/);
  });

  it("round-trips random masks", () => {
    let seed = 1234;
    const rand = () => ((seed = (seed * 1103515245 + 12345) & 0x7fffffff) / 0x7fffffff);
    for (let trial = 0; trial < 50; trial++) {
      const w = 1 + Math.floor(rand() * 20);
      const h = 1 + Math.floor(rand() * 20);
      const mask = new Uint8Array(w * h).map(() => (rand() > 0.5 ? 1 : 0));
      const back = rleDecode(rleEncode(mask, w, h));
      expect(Array.from(back)).toEqual(Array.from(mask));
    }
  });

  it("encodes runs crossing row boundaries", () => {
    const mask = new Uint8Array([0, 1, 1, 1, 1, 0]);
    expect(rleEncode(mask, 3, 2).runs).toEqual([1, 4]);
  });

  it("maskPixels lists exactly the set pixels", () => {
    const rle = { width: 4, height: 2, runs: [1, 2, 4, 1] };
    expect(maskPixels(rle)).toEqual(new Set(["1,0", "2,0", "0,1"]));
  });
});
