/** DOM wiring for the decomposition UI.
 *
 * Workflow: load scene -> pick a camera preset -> click on the image
 * (left = positive, right = negative) -> request mask -> inspect overlay ->
 * grow -> per-region overlays and PLY export. Every step is one API call;
 * failures surface in the error banner and nothing is computed locally.
 */

import { ApiClient, Click } from "./api.js";
import { cssColor, regionColor } from "./color.js";
import { compositeMask } from "./overlay.js";
import {
  UiSessionState,
  addClick,
  clearClicks,
  initialState,
  meanClicksPerRegion,
  withError,
  withMask,
  withRegion,
  withScene,
  withView,
} from "./state.js";

const api = new ApiClient("");
let state: UiSessionState = initialState();
let baseImage: ImageData | null = null;

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

function setState(next: UiSessionState): void {
  state = next;
  render();
}

async function loadBaseImage(): Promise<void> {
  if (!state.scene || !state.viewId) return;
  const img = new Image();
  img.src = api.viewImageUrl(state.scene.scene_id, state.viewId) + `?t=${Date.now()}`;
  await img.decode();
  const canvas = $<HTMLCanvasElement>("view");
  canvas.width = img.naturalWidth;
  canvas.height = img.naturalHeight;
  const ctx = canvas.getContext("2d")!;
  ctx.drawImage(img, 0, 0);
  baseImage = ctx.getImageData(0, 0, canvas.width, canvas.height);
  render();
}

function render(): void {
  $<HTMLDivElement>("error").textContent = state.error ?? "";
  $<HTMLSpanElement>("scene-label").textContent = state.scene
    ? `${state.scene.scene_id} (${state.scene.fg_vertices} vertices, ` +
      `${state.scene.n_objects} objects)`
    : "no scene";
  $<HTMLSpanElement>("click-label").textContent =
    `${state.clicks.length} click(s)` +
    (meanClicksPerRegion(state) !== null
      ? ` — mean ${meanClicksPerRegion(state)!.toFixed(2)} clicks/region`
      : "");

  const presets = $<HTMLDivElement>("presets");
  presets.replaceChildren();
  if (state.scene) {
    for (let k = 0; k < state.scene.n_views_preset; k++) {
      const b = document.createElement("button");
      b.textContent = `view ${k}`;
      b.onclick = () => void selectPreset(k);
      presets.appendChild(b);
    }
  }

  const canvas = $<HTMLCanvasElement>("view");
  const ctx = canvas.getContext("2d");
  if (ctx && baseImage) {
    let pixels: Uint8ClampedArray<ArrayBufferLike> = new Uint8ClampedArray(baseImage.data);
    if (state.mask) {
      pixels = compositeMask(pixels, state.mask, { r: 255, g: 200, b: 40 }, 0.45);
    }
    const frame = new Uint8ClampedArray(pixels.length);
    frame.set(pixels);
    ctx.putImageData(new ImageData(frame, canvas.width, canvas.height), 0, 0);
    for (const c of state.clicks) {
      ctx.beginPath();
      ctx.arc(c.x, c.y, 3, 0, 2 * Math.PI);
      ctx.fillStyle = c.positive ? "#2e7" : "#e33";
      ctx.fill();
    }
  }

  const list = $<HTMLUListElement>("regions");
  list.replaceChildren();
  for (const r of state.regions) {
    const li = document.createElement("li");
    const swatch = document.createElement("span");
    swatch.className = "swatch";
    swatch.style.background = cssColor(regionColor(r.region_id));
    li.appendChild(swatch);
    li.appendChild(
      document.createTextNode(
        ` ${r.region_id}: ${r.vertex_count} vertices, ` +
          `${r.rounds} rounds, stop=${r.stop_reason}, clicks=${r.clickCount} `,
      ),
    );
    if (state.scene) {
      const dl = document.createElement("a");
      dl.href = api.regionMeshUrl(state.scene.scene_id, r.region_id);
      dl.textContent = "export PLY";
      dl.setAttribute("download", `${r.region_id}.ply`);
      li.appendChild(dl);
      const ov = document.createElement("a");
      ov.href = api.regionOverlayUrl(state.scene.scene_id, r.region_id);
      ov.textContent = " overlay";
      ov.target = "_blank";
      li.appendChild(ov);
    }
    list.appendChild(li);
  }
}

async function guard(action: () => Promise<void>): Promise<void> {
  try {
    await action();
  } catch (err) {
    setState(withError(state, err instanceof Error ? err.message : String(err)));
  }
}

async function selectPreset(k: number): Promise<void> {
  await guard(async () => {
    const view = await api.createView(state.scene!.scene_id, k);
    setState(withView(state, view.view_id));
    await loadBaseImage();
  });
}

function canvasClick(ev: MouseEvent, positive: boolean): void {
  if (!state.viewId) return;
  const canvas = $<HTMLCanvasElement>("view");
  const rect = canvas.getBoundingClientRect();
  const click: Click = {
    x: Math.floor(((ev.clientX - rect.left) / rect.width) * canvas.width),
    y: Math.floor(((ev.clientY - rect.top) / rect.height) * canvas.height),
    positive,
  };
  setState(addClick(state, click));
}

function readParams(): void {
  state.params.tau2d = Number($<HTMLInputElement>("tau2d").value);
  state.params.tau = Number($<HTMLInputElement>("tau").value);
  state.params.theta = Number($<HTMLInputElement>("theta").value);
  state.params.epsilon = Number($<HTMLInputElement>("epsilon").value);
}

export function start(): void {
  $<HTMLButtonElement>("load").onclick = () =>
    void guard(async () => {
      const manifest = $<HTMLInputElement>("manifest").value.trim();
      const scene = await api.createScene({ manifest });
      setState(withScene(state, scene));
      await selectPreset(0);
    });

  const canvas = $<HTMLCanvasElement>("view");
  canvas.onclick = (ev) => canvasClick(ev, true);
  canvas.oncontextmenu = (ev) => {
    ev.preventDefault();
    canvasClick(ev, false);
  };

  $<HTMLButtonElement>("mask-btn").onclick = () =>
    void guard(async () => {
      readParams();
      const m = await api.createMask(
        state.scene!.scene_id,
        state.viewId!,
        state.clicks,
        state.params.tau2d,
      );
      setState(withMask(state, m.mask_id, m.rle));
    });

  $<HTMLButtonElement>("grow-btn").onclick = () =>
    void guard(async () => {
      readParams();
      const r = await api.growRegion(state.scene!.scene_id, state.viewId!, state.maskId!, {
        tau: state.params.tau,
        theta: state.params.theta,
        epsilon: state.params.epsilon,
      });
      setState(withRegion(state, r));
    });

  $<HTMLButtonElement>("clear-btn").onclick = () => setState(clearClicks(state));
  render();
}

start();
