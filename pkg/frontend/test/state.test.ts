import { describe, expect, it } from "vitest";

import {
  addClick,
  clearClicks,
  initialState,
  meanClicksPerRegion,
  withMask,
  withRegion,
  withScene,
  withView,
} from "../src/state.js";

const scene = { scene_id: "s", n_views_preset: 8, n_objects: 2, fg_vertices: 10 };
const region = { region_id: "r1", vertex_count: 5, stop_reason: "fixed-point", rounds: 1 };

describe("ui state transitions", () => {
  it("loading a scene resets everything but parameters", () => {
    let s = initialState();
    s = { ...s, params: { ...s.params, epsilon: 0.5 } };
    s = addClick(s, { x: 1, y: 2, positive: true });
    s = withScene(s, scene);
    expect(s.clicks).toEqual([]);
    expect(s.params.epsilon).toBe(0.5);
    expect(s.scene).toEqual(scene);
  });

  it("changing views drops clicks and mask but keeps regions", () => {
    let s = withScene(initialState(), scene);
    s = withView(s, "v1");
    s = addClick(s, { x: 1, y: 1, positive: true });
    s = withMask(s, "m1", { width: 2, height: 2, runs: [] });
    s = withRegion(s, region);
    s = withView(s, "v2");
    expect(s.regions).toHaveLength(1);
    expect(s.clicks).toEqual([]);
    expect(s.maskId).toBeNull();
  });

  it("growing a region records the click count and consumes the prompt", () => {
    let s = withView(withScene(initialState(), scene), "v1");
    s = addClick(s, { x: 1, y: 1, positive: true });
    s = addClick(s, { x: 5, y: 5, positive: false });
    s = withMask(s, "m1", { width: 2, height: 2, runs: [0, 1] });
    s = withRegion(s, region);
    expect(s.regions[0].clickCount).toBe(2);
    expect(s.clicks).toEqual([]);
    expect(s.mask).toBeNull();
  });

  it("tracks mean clicks per region", () => {
    let s = withView(withScene(initialState(), scene), "v1");
    expect(meanClicksPerRegion(s)).toBeNull();
    s = addClick(s, { x: 1, y: 1, positive: true });
    s = withRegion(s, region);
    s = addClick(s, { x: 2, y: 2, positive: true });
    s = addClick(s, { x: 3, y: 3, positive: true });
    s = withRegion(s, { ...region, region_id: "r2" });
    expect(meanClicksPerRegion(s)).toBeCloseTo(1.5);
  });

  it("clearClicks drops the pending mask too", () => {
    let s = withView(withScene(initialState(), scene), "v1");
    s = addClick(s, { x: 1, y: 1, positive: true });
    s = withMask(s, "m1", { width: 1, height: 1, runs: [] });
    s = clearClicks(s);
    expect(s.clicks).toEqual([]);
    expect(s.maskId).toBeNull();
  });
});
