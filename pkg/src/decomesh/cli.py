"""Command-line pipeline: synth, render, mask, grow, decompose, eval, losses, serve."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import bufio, fixtures, interact, losses as lossmod
from . import mesh as meshmod, metrics as metricsmod, raster, render as rendermod
from .config import Settings
from .grow import GrowConfig, grow as run_grow
from .mesh import MeshError
from .raster import CameraError
from .render import RenderError, SceneAttributes
from .sdf import SceneError, load_scene
from .fixtures import FixtureError
from .interact import InteractionError
from .grow import GrowError
from .losses import LossError
from .metrics import MetricsError

_ERROR_CODES = [
    (MeshError, "mesh-error"),
    (SceneError, "scene-error"),
    (RenderError, "render-error"),
    (CameraError, "camera-error"),
    (InteractionError, "interaction-error"),
    (GrowError, "grow-error"),
    (MetricsError, "metrics-error"),
    (LossError, "loss-error"),
    (FixtureError, "fixture-error"),
    (FileNotFoundError, "file-not-found"),
    (json.JSONDecodeError, "bad-json"),
]


def _fail(exc):
    code = "internal-error"
    for cls, c in _ERROR_CODES:
        if isinstance(exc, cls):
            code = c
            break
    sys.stderr.write(json.dumps({"error": code, "message": str(exc)}) + "\n")
    sys.exit(1)


def handled(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SystemExit:
            raise
        except Exception as exc:   # noqa: BLE001 - CLI boundary
            _fail(exc)
    wrapper.__name__ = fn.__name__
    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML settings file (flags and DECOMESH_* env vars take precedence).")
@click.pass_context
def main(ctx, config_path):
    """Interactive SDF-scene decomposition toolkit."""
    ctx.obj = Settings(config_path)


@main.command()
@click.option("--fixture", "fixture_name", type=click.Choice(sorted(fixtures.PINNED_SPECS)),
              default=None, help="Pinned builtin fixture.")
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None,
              help="FixtureSpec JSON file.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@handled
def synth(fixture_name, spec_path, out_dir):
    """Generate a synthetic scene bundle (meshes, features, cameras, masks)."""
    if (fixture_name is None) == (spec_path is None):
        raise FixtureError("pass exactly one of --fixture / --spec")
    if fixture_name:
        spec = fixtures.PINNED_SPECS[fixture_name]()
    else:
        with open(spec_path) as fh:
            spec = fixtures.FixtureSpec.from_dict(json.load(fh))
    bundle = fixtures.generate(spec)
    manifest = fixtures.save_bundle(bundle, out_dir)
    click.echo(str(manifest))


def _load_view(manifest, view):
    bundle = fixtures.load_bundle(manifest)
    if not (0 <= view < len(bundle.cameras)):
        raise CameraError(f"view {view} out of range (have {len(bundle.cameras)})")
    buffers = raster.rasterize(bundle.fg_mesh, bundle.cameras[view])
    return bundle, buffers


@main.command()
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--view", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@handled
def render(manifest, view, out_dir):
    """Rasterize a fixture view: flat binary buffers plus a color PNG."""
    _, buffers = _load_view(manifest, view)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bufio.save_buffer(out / "depth.bin", np.where(np.isfinite(buffers.depth),
                                                  buffers.depth, 0.0))
    bufio.save_buffer(out / "color.bin", buffers.color)
    bufio.save_buffer(out / "normal.bin", buffers.normal)
    bufio.save_buffer(out / "feature.bin", buffers.feature)
    meshmod.save_sidecar(out / "vertex_id.nml", buffers.vertex_id.reshape(-1, 1), "<u4")
    bufio.save_png(out / "color.png", buffers.color, alpha=buffers.hit.astype(float))
    click.echo(str(out))


def _mask_for(bundle, buffers, view, clicks_path, oracle_object, tau_2d):
    if (clicks_path is None) == (oracle_object is None):
        raise InteractionError("pass exactly one of --clicks / --oracle-object")
    if oracle_object is not None:
        masks = bundle.masks[view]
        if oracle_object not in masks:
            raise InteractionError(f"no oracle mask for object {oracle_object}")
        return masks[oracle_object]
    with open(clicks_path) as fh:
        prompt = interact.ClickPrompt.from_dicts(json.load(fh))
    return interact.click_to_mask(buffers, prompt, tau_2d)


@main.command()
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--view", type=int, default=0)
@click.option("--clicks", "clicks_path", type=click.Path(exists=True), default=None,
              help="JSON list of {x, y, positive} clicks.")
@click.option("--oracle-object", type=int, default=None,
              help="Use the fixture's ground-truth mask for this object id.")
@click.option("--tau-2d", type=float, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Mask PNG path; an RLE JSON is written next to it.")
@click.pass_obj
@handled
def mask(settings, manifest, view, clicks_path, oracle_object, tau_2d, out_path):
    """Turn click prompts into an object mask."""
    tau_2d = settings.get("tau_2d", tau_2d)
    bundle, buffers = _load_view(manifest, view)
    m = _mask_for(bundle, buffers, view, clicks_path, oracle_object, tau_2d)
    bufio.save_mask_png(out_path, m)
    with open(Path(out_path).with_suffix(".rle.json"), "w") as fh:
        json.dump(interact.mask_to_rle(m), fh)
    click.echo(str(out_path))


def _grow_submesh(bundle, buffers, view, m, cfg):
    seed = interact.build_seed(buffers, m, view_id=str(view))
    region = run_grow(bundle.fg_mesh, seed, cfg=cfg)
    submesh = meshmod.extract_submesh(bundle.fg_mesh, region.vertices)
    return seed, region, submesh


def _grow_cfg(settings, tau, theta, epsilon, tau_floor, max_rounds):
    return GrowConfig(
        tau=settings.get("tau", tau),
        theta=settings.get("theta", theta),
        epsilon=settings.get("epsilon", epsilon),
        tau_floor=settings.get("tau_floor", tau_floor),
        max_rounds=int(settings.get("max_rounds", max_rounds, cast=int)))


@main.command()
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--view", type=int, default=0)
@click.option("--mask", "mask_path", type=click.Path(exists=True), default=None,
              help="Mask PNG (e.g. from the mask command or external tools).")
@click.option("--oracle-object", type=int, default=None)
@click.option("--tau", type=float, default=None)
@click.option("--theta", type=float, default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--tau-floor", type=float, default=None)
@click.option("--max-rounds", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True,
              help="Submesh PLY path; a growth trace JSON is written next to it.")
@click.pass_obj
@handled
def grow(settings, manifest, view, mask_path, oracle_object, tau, theta, epsilon,
         tau_floor, max_rounds, out_path):
    """Run region growing from a mask and export the object submesh."""
    bundle, buffers = _load_view(manifest, view)
    if (mask_path is None) == (oracle_object is None):
        raise InteractionError("pass exactly one of --mask / --oracle-object")
    if mask_path:
        m = bufio.load_mask_png(mask_path)
    else:
        m = _mask_for(bundle, buffers, view, None, oracle_object, None)
    cfg = _grow_cfg(settings, tau, theta, epsilon, tau_floor, max_rounds)
    _, region, submesh = _grow_submesh(bundle, buffers, view, m, cfg)
    meshmod.save_mesh(submesh, out_path)
    region.save(Path(out_path).with_suffix(".trace.json"))
    click.echo(json.dumps({"out": str(out_path), "vertices": len(region.vertices),
                           "rounds": region.rounds, "stop_reason": region.stop_reason}))


@main.command()
@click.option("--manifest", type=click.Path(exists=True), required=True)
@click.option("--clicks-manifest", type=click.Path(exists=True), required=True,
              help="JSON list of {name, view, clicks | oracle_object, grow?: {...}}.")
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--tau-2d", type=float, default=None)
@click.pass_obj
@handled
def decompose(settings, manifest, clicks_manifest, out_dir, tau_2d):
    """Batch extraction: one submesh per manifest entry plus a residual report."""
    tau_2d = settings.get("tau_2d", tau_2d)
    bundle = fixtures.load_bundle(manifest)
    with open(clicks_manifest) as fh:
        entries = json.load(fh)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    claimed = set()
    report = {"objects": []}
    buffer_cache = {}
    for entry in entries:
        view = int(entry.get("view", 0))
        if view not in buffer_cache:
            buffer_cache[view] = raster.rasterize(bundle.fg_mesh, bundle.cameras[view])
        buffers = buffer_cache[view]
        m = _mask_for(bundle, buffers, view, None, entry["oracle_object"], tau_2d) \
            if "oracle_object" in entry else interact.click_to_mask(
                buffers, interact.ClickPrompt.from_dicts(entry["clicks"]), tau_2d)
        gcfg = entry.get("grow", {})
        cfg = _grow_cfg(settings, gcfg.get("tau"), gcfg.get("theta"),
                        gcfg.get("epsilon"), gcfg.get("tau_floor"), gcfg.get("max_rounds"))
        _, region, submesh = _grow_submesh(bundle, buffers, view, m, cfg)
        name = entry.get("name", f"object{len(report['objects'])}")
        meshmod.save_mesh(submesh, out / f"{name}.ply")
        claimed |= region.vertices
        report["objects"].append({"name": name, "vertices": len(region.vertices),
                                  "rounds": region.rounds,
                                  "stop_reason": region.stop_reason})
    residual = sorted(set(range(bundle.fg_mesh.n_vertices)) - claimed)
    report["residual_vertices"] = len(residual)
    if residual:
        meshmod.save_mesh(meshmod.extract_submesh(bundle.fg_mesh, residual),
                          out / "residual.ply")
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=1)
    click.echo(json.dumps(report))


@main.command("eval")
@click.argument("pred_ply", type=click.Path(exists=True))
@click.argument("gt_ply", type=click.Path(exists=True))
@click.option("--tau-d", type=float, default=None)
@click.option("--samples", type=int, default=None)
@click.option("--seed", type=int, default=0)
@click.option("--csv", "as_csv", is_flag=True, help="Emit a Table-style CSV row.")
@click.pass_obj
@handled
def eval_cmd(settings, pred_ply, gt_ply, tau_d, samples, seed, as_csv):
    """Chamfer / F-score metrics between two mesh surfaces."""
    tau_d = settings.get("tau_d", tau_d)
    samples = int(settings.get("samples", samples, cast=int))
    pred = meshmod.load_mesh(pred_ply)
    gt = meshmod.load_mesh(gt_ply)
    report = metricsmod.evaluate_meshes(pred, gt, tau_d=tau_d, n=samples, rng_seed=seed)
    click.echo(report.csv_row() if as_csv else json.dumps(report.to_dict(), indent=1))


@main.command()
@click.option("--scene", "scene_path", type=click.Path(exists=True), required=True,
              help="Scene description JSON.")
@click.option("--rays", type=int, default=64)
@click.option("--samples-per-ray", type=int, default=128)
@click.option("--points", type=int, default=512)
@click.option("--seed", type=int, default=0)
@handled
def losses(scene_path, rays, samples_per_ray, points, seed):
    """Evaluate the full loss suite on a self-rendered batch and print the breakdown."""
    scene = load_scene(scene_path)
    report = lossmod_report(scene, rays, samples_per_ray, points, seed)
    click.echo(json.dumps(report, indent=1))


def lossmod_report(scene, n_rays, m, n_points, seed):
    """Loss breakdown on a synthetic batch: high-M renders act as ground truth."""
    rng = np.random.default_rng(seed)
    attrs = SceneAttributes(scene)
    room = scene.background.primitives[0]
    center = np.asarray(getattr(room, "center", (0, 0, 0)), dtype=float)
    half = np.asarray(getattr(room, "half_extents", (2, 2, 2)), dtype=float)

    origins = center + 0.3 * half * rng.uniform(-1, 1, size=(n_rays, 3))
    dirs = rng.normal(size=(n_rays, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    batch = lossmod.RayBatch()
    lo, hi = [], []
    for o, v in zip(origins, dirs):
        ray = rendermod.Ray(o, v, t_near=0.01, t_far=float(4 * half.max()))
        lo.append(rendermod.render_ray(scene, attrs, ray, m=m))
        hi.append(rendermod.render_ray(scene, attrs, ray, m=4 * m))
    batch.color_pred = np.array([p.color for p in lo])
    batch.color_gt = np.array([p.color for p in hi])
    batch.depth_pred = np.array([p.depth for p in lo])
    batch.depth_gt = np.array([p.depth for p in hi])
    batch.normal_pred = np.array([p.normal for p in lo])
    batch.normal_gt = np.array([p.normal for p in hi])
    batch.semantic_logits = np.array([p.semantic_logits for p in lo])
    g = np.array([p.semantic_logits for p in hi])
    z = g - g.max(axis=-1, keepdims=True)
    batch.semantic_gt = np.exp(z) / np.exp(z).sum(axis=-1, keepdims=True)
    batch.feature_pred = np.array([p.feature for p in lo])
    batch.feature_gt = np.array([p.feature for p in hi])
    batch.opacity_fg_pred = np.array([p.opacity_fg for p in lo])
    batch.opacity_bg_pred = np.array([p.opacity_bg for p in lo])
    batch.opacity_fg_gt = (np.array([p.opacity_fg for p in hi]) > 0.5).astype(float)
    batch.opacity_bg_gt = (np.array([p.opacity_bg for p in hi]) > 0.5).astype(float)
    from .sdf import CLASS_FLOOR, CLASS_WALL
    cls = np.array([int(np.argmax(p.semantic_logits)) for p in lo])
    batch.floor_mask = cls == CLASS_FLOOR
    batch.wall_mask = cls == CLASS_WALL
    batch.p_floor = batch.floor_mask.astype(float)
    batch.p_wall = batch.wall_mask.astype(float)

    pts = center + half * rng.uniform(-0.95, 0.95, size=(n_points, 3))
    ceil_z = center[2] + half[2]
    ceiling = np.column_stack([
        center[0] + 0.7 * half[0] * rng.uniform(-1, 1, size=8),
        center[1] + 0.7 * half[1] * rng.uniform(-1, 1, size=8),
        np.full(8, ceil_z)])

    n_wall = (lossmod.fit_wall_normal(batch) if batch.wall_mask.any()
              else np.array([1.0, 0.0, 0.0]))
    floor_val, floor_found = lossmod.loss_floor(scene, ceiling)
    terms = {
        "rgb": lossmod.loss_rgb(batch),
        "depth": lossmod.loss_depth_scale_invariant(batch),
        "normal": lossmod.loss_normal(batch),
        "eikonal": lossmod.loss_eikonal(scene.sdf, pts),
        "opacity": lossmod.loss_opacity(batch),
        "distinction": lossmod.loss_object_distinction(scene, pts),
        "manhattan": lossmod.loss_manhattan(batch, n_wall),
        "floor": floor_val,
        "semantic": lossmod.loss_semantic(batch),
        "feature": lossmod.loss_feature(batch),
    }
    total, breakdown = lossmod.loss_total(terms)
    return {"terms": terms, "weighted": breakdown, "total": total,
            "floor_points_found": floor_found,
            "wall_normal": n_wall.tolist()}


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@handled
def serve(host, port):
    """Run the HTTP service (and the bundled UI when built)."""
    import uvicorn
    from .server import create_app
    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
