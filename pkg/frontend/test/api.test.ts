import { describe, expect, it } from "vitest";

import { ApiClient, buildUrl } from "../src/api.js";

describe("url building", () => {
  it("joins under /api/v1", () => {
    expect(buildUrl("http://x:8000", "scenes")).toBe("http://x:8000/api/v1/scenes");
    expect(buildUrl("http://x:8000/", "scenes", "s-1", "views")).toBe(
      "http://x:8000/api/v1/scenes/s-1/views",
    );
  });

  it("works with an empty base for same-origin use", () => {
    expect(buildUrl("", "scenes", "a")).toBe("/api/v1/scenes/a");
  });

  it("escapes path segments", () => {
    expect(buildUrl("", "scenes", "a b/c")).toBe("/api/v1/scenes/a%20b%2Fc");
  });

  it("client derives resource urls", () => {
    const api = new ApiClient("http://h");
    expect(api.viewImageUrl("s", "v")).toBe(
      "http://h/api/v1/scenes/s/views/v/image.png",
    );
    expect(api.regionMeshUrl("s", "r")).toBe(
      "http://h/api/v1/scenes/s/regions/r/mesh.ply",
    );
    expect(api.regionOverlayUrl("s", "r")).toBe(
      "http://h/api/v1/scenes/s/regions/r/overlay.png",
    );
  });
});
