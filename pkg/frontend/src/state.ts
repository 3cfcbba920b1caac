/** UI session state: mirrors server-side ids, never geometry.
 *
 * Pure update functions over a plain object so transitions are testable;
 * the DOM layer only renders whatever state it is handed.
 */

import { Click, RegionInfo, SceneInfo } from "./api.js";
import { RleMask } from "./rle.js";

export interface RegionEntry extends RegionInfo {
  clickCount: number; // clicks spent on the mask this region grew from
}

export interface UiSessionState {
  scene: SceneInfo | null;
  viewId: string | null;
  clicks: Click[];
  mask: RleMask | null;
  maskId: string | null;
  regions: RegionEntry[];
  params: {
    tau2d: number;
    tau: number;
    theta: number;
    epsilon: number;
  };
  error: string | null;
}

export function initialState(): UiSessionState {
  return {
    scene: null,
    viewId: null,
    clicks: [],
    mask: null,
    maskId: null,
    regions: [],
    params: { tau2d: 0.85, tau: 0.95, theta: 0.02, epsilon: 0.1 },
    error: null,
  };
}

export function withScene(s: UiSessionState, scene: SceneInfo): UiSessionState {
  return { ...initialState(), params: s.params, scene };
}

export function withView(s: UiSessionState, viewId: string): UiSessionState {
  // changing views drops clicks and the pending mask, keeps grown regions
  return { ...s, viewId, clicks: [], mask: null, maskId: null, error: null };
}

export function addClick(s: UiSessionState, click: Click): UiSessionState {
  return { ...s, clicks: [...s.clicks, click], error: null };
}

export function clearClicks(s: UiSessionState): UiSessionState {
  return { ...s, clicks: [], mask: null, maskId: null };
}

export function withMask(
  s: UiSessionState,
  maskId: string,
  mask: RleMask,
): UiSessionState {
  return { ...s, maskId, mask, error: null };
}

export function withRegion(s: UiSessionState, region: RegionInfo): UiSessionState {
  const entry: RegionEntry = { ...region, clickCount: s.clicks.length };
  // a grown region consumes the pending prompt
  return { ...s, regions: [...s.regions, entry], clicks: [], mask: null, maskId: null };
}

export function withError(s: UiSessionState, message: string): UiSessionState {
  return { ...s, error: message };
}

export function meanClicksPerRegion(s: UiSessionState): number | null {
  if (!s.regions.length) return null;
  const total = s.regions.reduce((acc, r) => acc + r.clickCount, 0);
  return total / s.regions.length;
}
