"""HTTP service over the decomposition pipeline (JSON API under /api/v1).

Sessions are in-memory; exports (PLY, PNG) are streamed in responses.
Mask/grow requests serialize per session via a lock; all underlying
operations are pure so no further synchronization is needed.
"""

from __future__ import annotations

import io
import os
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import fixtures, interact, mesh as meshmod, raster
from .grow import GrowConfig, GrowError, grow as run_grow
from .interact import ClickPrompt, InteractionError
from .raster import Camera


class SceneCreate(BaseModel):
    manifest: str | None = None
    spec: dict | None = None


class ViewCreate(BaseModel):
    camera: dict | None = None
    preset: int | None = None


class ClickIn(BaseModel):
    x: int
    y: int
    positive: bool = True


class MaskCreate(BaseModel):
    clicks: list[ClickIn]
    tau_2d: float = Field(default=0.85, gt=-1.0, le=1.0)


class GrowCreate(BaseModel):
    view_id: str
    mask_id: str
    tau: float = Field(default=0.95, gt=-1.0, le=1.0)
    theta: float = Field(default=0.02, gt=0.0)
    epsilon: float = Field(default=0.10, ge=0.0, le=1.0)
    tau_floor: float = Field(default=0.0, ge=-1.0)
    max_rounds: int = Field(default=200, ge=1)


class SceneSession:
    def __init__(self, bundle):
        self.bundle = bundle
        self.views = {}     # view_id -> (Camera, RasterBuffers)
        self.masks = {}     # mask_id -> (view_id, bool array)
        self.regions = {}   # region_id -> dict with region + submesh
        self.lock = threading.Lock()


def _new_id(prefix):
    return f"{prefix}-{uuid.uuid4().hex[:12]}"


def create_app() -> FastAPI:
    app = FastAPI(title="decomesh", version="0.1.0",
                  openapi_url="/api/v1/spec", docs_url="/api/v1/docs")
    sessions: dict[str, SceneSession] = {}

    def session_of(scene_id) -> SceneSession:
        if scene_id not in sessions:
            raise HTTPException(404, f"unknown scene {scene_id!r}")
        return sessions[scene_id]

    @app.post("/api/v1/scenes")
    def create_scene(body: SceneCreate):
        if (body.manifest is None) == (body.spec is None):
            raise HTTPException(422, "pass exactly one of 'manifest' / 'spec'")
        try:
            if body.manifest is not None:
                bundle = fixtures.load_bundle(body.manifest)
            else:
                bundle = fixtures.generate(fixtures.FixtureSpec.from_dict(body.spec))
        except (ValueError, OSError, TypeError) as exc:
            raise HTTPException(422, str(exc))
        scene_id = _new_id("scene")
        sessions[scene_id] = SceneSession(bundle)
        return {"scene_id": scene_id,
                "n_views_preset": len(bundle.cameras),
                "n_objects": len(bundle.spec.objects),
                "fg_vertices": bundle.fg_mesh.n_vertices}

    @app.delete("/api/v1/scenes/{scene_id}")
    def delete_scene(scene_id: str):
        session_of(scene_id)
        del sessions[scene_id]
        return {"deleted": scene_id}

    @app.post("/api/v1/scenes/{scene_id}/views")
    def create_view(scene_id: str, body: ViewCreate):
        s = session_of(scene_id)
        if (body.camera is None) == (body.preset is None):
            raise HTTPException(422, "pass exactly one of 'camera' / 'preset'")
        try:
            if body.preset is not None:
                if not (0 <= body.preset < len(s.bundle.cameras)):
                    raise HTTPException(422, f"preset {body.preset} out of range")
                cam = s.bundle.cameras[body.preset]
            else:
                cam = Camera.from_dict(body.camera)
        except HTTPException:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise HTTPException(422, f"invalid camera: {exc}")
        with s.lock:
            buffers = raster.rasterize(s.bundle.fg_mesh, cam)
            view_id = _new_id("view")
            s.views[view_id] = (cam, buffers)
        return {"view_id": view_id, "width": cam.width, "height": cam.height}

    def view_of(s, scene_id, view_id):
        if view_id not in s.views:
            raise HTTPException(404, f"unknown view {view_id!r} in scene {scene_id!r}")
        return s.views[view_id]

    @app.get("/api/v1/scenes/{scene_id}/views/{view_id}/image.png")
    def view_image(scene_id: str, view_id: str):
        s = session_of(scene_id)
        _, buffers = view_of(s, scene_id, view_id)
        from .bufio import save_png
        buf = io.BytesIO()
        save_png(buf, buffers.color, alpha=buffers.hit.astype(float))
        return Response(buf.getvalue(), media_type="image/png")

    @app.get("/api/v1/scenes/{scene_id}/views/{view_id}/feature-stats")
    def feature_stats(scene_id: str, view_id: str):
        s = session_of(scene_id)
        _, buffers = view_of(s, scene_id, view_id)
        hit = buffers.hit
        norms = np.linalg.norm(buffers.feature[hit], axis=-1) if hit.any() else np.zeros(1)
        return {"feature_dim": int(buffers.feature.shape[-1]),
                "hit_fraction": float(hit.mean()),
                "mean_feature_norm": float(norms.mean())}

    @app.post("/api/v1/scenes/{scene_id}/views/{view_id}/mask")
    def create_mask(scene_id: str, view_id: str, body: MaskCreate):
        s = session_of(scene_id)
        _, buffers = view_of(s, scene_id, view_id)
        prompt_dicts = [c.model_dump() for c in body.clicks]
        with s.lock:
            try:
                prompt = ClickPrompt.from_dicts(prompt_dicts)
                mask = interact.click_to_mask(buffers, prompt, body.tau_2d)
                contour = interact.mask_contour(mask)
            except InteractionError as exc:
                raise HTTPException(422, str(exc))
            mask_id = _new_id("mask")
            s.masks[mask_id] = (view_id, mask)
        return {"mask_id": mask_id,
                "rle": interact.mask_to_rle(mask),
                "contour": sorted([list(p) for p in contour]),
                "pixel_count": int(mask.sum())}

    @app.post("/api/v1/scenes/{scene_id}/grow")
    def create_region(scene_id: str, body: GrowCreate):
        s = session_of(scene_id)
        _, buffers = view_of(s, scene_id, body.view_id)
        if body.mask_id not in s.masks:
            raise HTTPException(404, f"unknown mask {body.mask_id!r}")
        mask_view, mask = s.masks[body.mask_id]
        if mask_view != body.view_id:
            raise HTTPException(422, "mask belongs to a different view")
        with s.lock:
            try:
                cfg = GrowConfig(tau=body.tau, theta=body.theta, epsilon=body.epsilon,
                                 tau_floor=body.tau_floor, max_rounds=body.max_rounds)
                seed = interact.build_seed(buffers, mask, view_id=body.view_id)
                region = run_grow(s.bundle.fg_mesh, seed, cfg=cfg)
                submesh = meshmod.extract_submesh(s.bundle.fg_mesh, region.vertices)
            except (InteractionError, GrowError, meshmod.MeshError) as exc:
                raise HTTPException(422, str(exc))
            region_id = _new_id("region")
            s.regions[region_id] = {"region": region, "submesh": submesh,
                                    "view_id": body.view_id, "mask_id": body.mask_id}
        return {"region_id": region_id, "vertex_count": len(region.vertices),
                "stop_reason": region.stop_reason, "rounds": region.rounds,
                "round_sizes": region.round_sizes}

    @app.get("/api/v1/scenes/{scene_id}/regions")
    def list_regions(scene_id: str):
        s = session_of(scene_id)
        return [{"region_id": rid,
                 "vertex_count": len(r["region"].vertices),
                 "stop_reason": r["region"].stop_reason,
                 "rounds": r["region"].rounds,
                 "view_id": r["view_id"]}
                for rid, r in s.regions.items()]

    @app.get("/api/v1/scenes/{scene_id}/regions/{region_id}/mesh.ply")
    def region_mesh(scene_id: str, region_id: str):
        s = session_of(scene_id)
        if region_id not in s.regions:
            raise HTTPException(404, f"unknown region {region_id!r}")
        submesh = s.regions[region_id]["submesh"]
        buf = io.BytesIO()
        import tempfile
        with tempfile.NamedTemporaryFile(suffix=".ply") as tmp:
            meshmod.save_mesh(submesh, tmp.name)
            tmp.seek(0)
            data = tmp.read()
        return Response(data, media_type="application/octet-stream",
                        headers={"Content-Disposition":
                                 f'attachment; filename="{region_id}.ply"'})

    @app.get("/api/v1/scenes/{scene_id}/regions/{region_id}/overlay.png")
    def region_overlay(scene_id: str, region_id: str):
        """Per-region overlay: pixels whose vertex belongs to the region."""
        s = session_of(scene_id)
        if region_id not in s.regions:
            raise HTTPException(404, f"unknown region {region_id!r}")
        entry = s.regions[region_id]
        _, buffers = s.views[entry["view_id"]]
        member = np.zeros(s.bundle.fg_mesh.n_vertices + 1, dtype=bool)
        member[sorted(entry["region"].vertices)] = True
        vid = buffers.vertex_id.copy()
        vid[vid == raster.MISS_ID] = s.bundle.fg_mesh.n_vertices
        overlay = member[vid]
        from .bufio import save_png
        rgb = np.zeros(overlay.shape + (3,))
        rgb[overlay] = (0.2, 0.9, 0.4)
        buf = io.BytesIO()
        save_png(buf, rgb, alpha=overlay.astype(float) * 0.6)
        return Response(buf.getvalue(), media_type="image/png")

    ui_dir = os.environ.get("DECOMESH_UI_DIR")
    if ui_dir is None:
        candidate = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = str(candidate) if candidate.is_dir() else None
    if ui_dir and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
