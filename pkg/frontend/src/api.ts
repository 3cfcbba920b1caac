/** Typed client for the decomposition service JSON API (/api/v1).
 *
 * Every UI action maps 1:1 onto one of these calls; no geometry is ever
 * computed client-side.
 */

import { RleMask } from "./rle.js";

export interface Click {
  x: number;
  y: number;
  positive: boolean;
}

export interface SceneInfo {
  scene_id: string;
  n_views_preset: number;
  n_objects: number;
  fg_vertices: number;
}

export interface ViewInfo {
  view_id: string;
  width: number;
  height: number;
}

export interface MaskInfo {
  mask_id: string;
  rle: RleMask;
  contour: [number, number][];
  pixel_count: number;
}

export interface GrowParams {
  tau?: number;
  theta?: number;
  epsilon?: number;
  tau_floor?: number;
  max_rounds?: number;
}

export interface RegionInfo {
  region_id: string;
  vertex_count: number;
  stop_reason: string;
  rounds: number;
  round_sizes?: number[];
  view_id?: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
  ) {
    super(message);
  }
}

export function buildUrl(base: string, ...parts: string[]): string {
  const root = base.replace(/\/+$/, "");
  const path = parts.map((p) => encodeURIComponent(p)).join("/");
  return `${root}/api/v1/${path}`;
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const res = await fetch(url, init);
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(res.status, detail);
  }
  return res.json() as Promise<T>;
}

function post<T>(url: string, body: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
}

export class ApiClient {
  constructor(public base: string = "") {}

  createScene(source: { manifest?: string; spec?: unknown }): Promise<SceneInfo> {
    return post(buildUrl(this.base, "scenes"), source);
  }

  deleteScene(sceneId: string): Promise<{ deleted: string }> {
    return request(buildUrl(this.base, "scenes", sceneId), { method: "DELETE" });
  }

  createView(sceneId: string, preset: number): Promise<ViewInfo> {
    return post(buildUrl(this.base, "scenes", sceneId, "views"), { preset });
  }

  viewImageUrl(sceneId: string, viewId: string): string {
    return buildUrl(this.base, "scenes", sceneId, "views", viewId, "image.png");
  }

  createMask(
    sceneId: string,
    viewId: string,
    clicks: Click[],
    tau2d: number,
  ): Promise<MaskInfo> {
    return post(buildUrl(this.base, "scenes", sceneId, "views", viewId, "mask"), {
      clicks,
      tau_2d: tau2d,
    });
  }

  growRegion(
    sceneId: string,
    viewId: string,
    maskId: string,
    params: GrowParams,
  ): Promise<RegionInfo> {
    return post(buildUrl(this.base, "scenes", sceneId, "grow"), {
      view_id: viewId,
      mask_id: maskId,
      ...params,
    });
  }

  listRegions(sceneId: string): Promise<RegionInfo[]> {
    return request(buildUrl(this.base, "scenes", sceneId, "regions"));
  }

  regionMeshUrl(sceneId: string, regionId: string): string {
    return buildUrl(this.base, "scenes", sceneId, "regions", regionId, "mesh.ply");
  }

  regionOverlayUrl(sceneId: string, regionId: string): string {
    return buildUrl(this.base, "scenes", sceneId, "regions", regionId, "overlay.png");
  }
}
