"""Deterministic synthetic scenes: analytic SDF rooms with foreground
objects, marching-cubes meshes, per-vertex features and labels, camera
rings and ground-truth view masks. Everything downstream tests against
these bundles as oracles.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from skimage import measure

from . import mesh as meshmod
from .bufio import save_mask_png, load_mask_png
from .mesh import NeuralMesh
from .raster import Camera, look_at_camera, rasterize
from .sdf import (CLASS_OBJECT_BASE, ComposedScene, RoomShell, SdfField,
                  scene_from_dict, FOREGROUND, BACKGROUND)

_PALETTE = [(0.85, 0.33, 0.25), (0.25, 0.55, 0.85), (0.35, 0.75, 0.35),
            (0.85, 0.70, 0.25), (0.65, 0.35, 0.75), (0.30, 0.75, 0.70)]


class FixtureError(ValueError):
    pass


@dataclass
class FixtureSpec:
    objects: list                       # primitive dicts: kind/center/radius|half_extents
    room_center: tuple = (0.0, 0.0, 1.5)
    room_half_extents: tuple = (2.0, 2.0, 1.5)
    feature_dim: int = 32
    feature_noise: float = 0.0
    resolution: int = 64                # marching-cubes grid per axis
    n_cameras: int = 8
    camera_radius: float = 1.6
    camera_height: float = 1.4
    image_size: tuple = (160, 120)
    seed: int = 0
    beta: float = 0.05
    disjoint: bool = True
    prototypes: list = None             # optional explicit per-object feature prototypes

    def to_dict(self):
        d = asdict(self)
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class FixtureBundle:
    spec: FixtureSpec
    scene: ComposedScene
    scene_doc: dict
    fg_mesh: NeuralMesh
    bg_mesh: NeuralMesh
    cameras: list
    # masks[view_idx][object_id] -> bool (h, w); object ids are 1-based
    masks: list


def _scene_doc(spec: FixtureSpec, prototypes):
    prims = [{"kind": "room", "field": BACKGROUND,
              "center": list(spec.room_center),
              "half_extents": list(spec.room_half_extents)}]
    for k, obj in enumerate(spec.objects):
        p = dict(obj)
        p.setdefault("field", FOREGROUND)
        p.setdefault("class_id", CLASS_OBJECT_BASE + k)
        p.setdefault("color", list(_PALETTE[k % len(_PALETTE)]))
        prims.append(p)
    return {"primitives": prims,
            "params": {"beta": spec.beta, "feature_dim": spec.feature_dim,
                       "feature_prototypes": np.asarray(prototypes).tolist()}}


def _draw_prototypes(spec: FixtureSpec, rng):
    if spec.prototypes is not None:
        protos = np.asarray(spec.prototypes, dtype=np.float64)
        return protos / np.linalg.norm(protos, axis=1, keepdims=True)
    k = len(spec.objects)
    for _ in range(1000):
        protos = rng.normal(size=(k, spec.feature_dim))
        protos /= np.linalg.norm(protos, axis=1, keepdims=True)
        gram = np.abs(protos @ protos.T - np.eye(k))
        if gram.max() < 0.5:
            return protos
    raise FixtureError("could not draw near-orthogonal prototypes; raise feature_dim")


def marching_cubes_mesh(sdf, lo, hi, resolution) -> NeuralMesh:
    """Zero level set of an SDF sampled on a regular grid."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    axes = [np.linspace(lo[a], hi[a], resolution) for a in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)
    vol = sdf(pts).reshape(resolution, resolution, resolution)
    if vol.min() > 0 or vol.max() < 0:
        raise FixtureError("SDF has no zero crossing inside the sampling box")
    spacing = (hi - lo) / (resolution - 1)
    verts, faces, _, _ = measure.marching_cubes(vol, level=0.0, spacing=tuple(spacing))
    return NeuralMesh(verts + lo, faces.astype(np.int64))


def _check_disjoint(fg_field, bg_field, lo, hi, n=20000, seed=7):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(n, 3))
    per_prim = fg_field.distances(pts)
    inside = per_prim < 0
    if np.any(inside.sum(axis=0) > 1):
        raise FixtureError("foreground primitives overlap but disjoint flag is set")
    if np.any((per_prim.min(axis=0) < 0) & (bg_field(pts) < 0)):
        raise FixtureError("foreground intersects background walls")


def generate(spec: FixtureSpec) -> FixtureBundle:
    if not spec.objects:
        raise FixtureError("fixture needs at least one foreground object")
    rng = np.random.default_rng(spec.seed)
    protos = _draw_prototypes(spec, rng)
    doc = _scene_doc(spec, protos)
    scene = scene_from_dict(doc)

    room_lo = np.asarray(spec.room_center) - np.asarray(spec.room_half_extents)
    room_hi = np.asarray(spec.room_center) + np.asarray(spec.room_half_extents)
    if spec.disjoint:
        _check_disjoint(scene.foreground, scene.background, room_lo, room_hi)

    pad = 0.15 * (room_hi - room_lo).max()
    fg_mesh = marching_cubes_mesh(scene.foreground, room_lo, room_hi, spec.resolution)
    bg_mesh = marching_cubes_mesh(scene.background, room_lo - pad, room_hi + pad,
                                  spec.resolution)

    # labels: 1-based foreground object ids, background is 0
    fg_labels = scene.foreground.nearest_primitive(fg_mesh.positions) + 1
    fg_feats = protos[fg_labels - 1]
    if spec.feature_noise > 0:
        fg_feats = fg_feats + spec.feature_noise * rng.normal(size=fg_feats.shape)
        fg_feats /= np.linalg.norm(fg_feats, axis=1, keepdims=True)
    fg_mesh = fg_mesh.with_features(fg_feats).with_labels(fg_labels)

    bg_proto = rng.normal(size=spec.feature_dim)
    bg_proto /= np.linalg.norm(bg_proto)
    bg_feats = np.tile(bg_proto, (bg_mesh.n_vertices, 1))
    if spec.feature_noise > 0:
        bg_feats = bg_feats + spec.feature_noise * rng.normal(size=bg_feats.shape)
        bg_feats /= np.linalg.norm(bg_feats, axis=1, keepdims=True)
    bg_mesh = bg_mesh.with_features(bg_feats).with_labels(np.zeros(bg_mesh.n_vertices))

    target = fg_mesh.positions.mean(axis=0)
    w, h = spec.image_size
    cameras, masks = [], []
    for k in range(spec.n_cameras):
        ang = 2 * np.pi * k / spec.n_cameras
        eye = np.asarray(spec.room_center[:2]) + spec.camera_radius * np.array(
            [np.cos(ang), np.sin(ang)])
        cam = look_at_camera((eye[0], eye[1], spec.camera_height), target,
                             fx=w, fy=w, width=w, height=h)
        buffers = rasterize(fg_mesh, cam)
        if not buffers.hit.any():
            raise FixtureError(f"camera {k} sees no foreground object")
        view_masks = {}
        for obj_id in range(1, len(spec.objects) + 1):
            view_masks[obj_id] = buffers.label == obj_id
        cameras.append(cam)
        masks.append(view_masks)

    return FixtureBundle(spec=spec, scene=scene, scene_doc=doc,
                         fg_mesh=fg_mesh, bg_mesh=bg_mesh,
                         cameras=cameras, masks=masks)


def save_bundle(bundle: FixtureBundle, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scene.json", "w") as fh:
        json.dump(bundle.scene_doc, fh, indent=1)
    for name, m in (("fg", bundle.fg_mesh), ("bg", bundle.bg_mesh)):
        meshmod.save_mesh(m, out / f"{name}.ply")
        meshmod.save_features(out / f"{name}.nmf", m.features)
        meshmod.save_labels(out / f"{name}.nml", m.labels)
    with open(out / "cameras.json", "w") as fh:
        json.dump([c.to_dict() for c in bundle.cameras], fh, indent=1)
    mask_dir = out / "masks"
    mask_dir.mkdir(exist_ok=True)
    mask_files = []
    for v, view_masks in enumerate(bundle.masks):
        for obj_id, m in view_masks.items():
            fname = f"view{v}_obj{obj_id}.png"
            save_mask_png(mask_dir / fname, m)
            mask_files.append({"view": v, "object": obj_id, "file": f"masks/{fname}"})
    manifest = {"spec": bundle.spec.to_dict(),
                "scene": "scene.json", "cameras": "cameras.json",
                "fg_mesh": "fg.ply", "fg_features": "fg.nmf", "fg_labels": "fg.nml",
                "bg_mesh": "bg.ply", "bg_features": "bg.nmf", "bg_labels": "bg.nml",
                "masks": mask_files,
                "fg_mean_edge_length": bundle.fg_mesh.mean_edge_length()}
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    return out / "manifest.json"


def load_bundle(manifest_path) -> FixtureBundle:
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    spec = FixtureSpec.from_dict(manifest["spec"])
    with open(base / manifest["scene"]) as fh:
        doc = json.load(fh)
    scene = scene_from_dict(doc)
    fg = meshmod.load_mesh(base / manifest["fg_mesh"])
    fg = fg.with_features(meshmod.load_features(base / manifest["fg_features"]))
    fg = fg.with_labels(meshmod.load_labels(base / manifest["fg_labels"]))
    bg = meshmod.load_mesh(base / manifest["bg_mesh"])
    bg = bg.with_features(meshmod.load_features(base / manifest["bg_features"]))
    bg = bg.with_labels(meshmod.load_labels(base / manifest["bg_labels"]))
    with open(base / manifest["cameras"]) as fh:
        cameras = [Camera.from_dict(d) for d in json.load(fh)]
    masks = [dict() for _ in cameras]
    for entry in manifest["masks"]:
        masks[entry["view"]][entry["object"]] = load_mask_png(base / entry["file"])
    return FixtureBundle(spec=spec, scene=scene, scene_doc=doc, fg_mesh=fg,
                         bg_mesh=bg, cameras=cameras, masks=masks)


# ---------------------------------------------------------------------------
# Pinned fixtures (seeds recorded; regenerating is deterministic)

def two_sphere_spec(noise=0.0, seed=12, resolution=48) -> FixtureSpec:
    """Two disjoint spheres in a room; near-orthogonal features."""
    return FixtureSpec(
        objects=[{"kind": "sphere", "center": [-0.8, 0.0, 0.5], "radius": 0.45},
                 {"kind": "sphere", "center": [0.9, 0.3, 0.6], "radius": 0.5}],
        feature_noise=noise, seed=seed, resolution=resolution)


def twin_feature_spec(seed=5, resolution=48) -> FixtureSpec:
    """Two touching spheres (A, B) with cosine-0.7 prototypes plus a distant
    sphere C that reuses A's prototype: the locality-failure fixture."""
    d = 32
    p_a = np.zeros(d)
    p_a[0] = 1.0
    p_b = np.zeros(d)
    p_b[0], p_b[1] = 0.7, np.sqrt(1 - 0.7 ** 2)
    return FixtureSpec(
        objects=[{"kind": "sphere", "center": [-0.6, 0.0, 0.6], "radius": 0.42},
                 {"kind": "sphere", "center": [0.1, 0.0, 0.6], "radius": 0.42},
                 {"kind": "sphere", "center": [1.2, 0.9, 0.5], "radius": 0.35}],
        prototypes=[p_a.tolist(), p_b.tolist(), p_a.tolist()],
        feature_noise=0.02, seed=seed, resolution=resolution, disjoint=False)


PINNED_SPECS = {
    "two-spheres": two_sphere_spec,
    "two-spheres-noisy": lambda: two_sphere_spec(noise=0.1, seed=12),
    "twin-feature": twin_feature_spec,
}
