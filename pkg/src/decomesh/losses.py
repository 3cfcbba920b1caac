"""Loss terms over rendered/ground-truth ray batches and point batches.

All expectations are arithmetic means over the supplied batch, evaluated
in float64. Gradients are out of scope; these are value-level checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .render import find_floor_point
from .sdf import sdf_gradient, surface_normal


class LossError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    opacity: float = 0.1
    distinction: float = 0.1
    manhattan: float = 0.01
    floor: float = 0.01
    semantic: float = 0.5
    feature: float = 0.1
    geo_depth: float = 0.1
    geo_normal: float = 0.05
    geo_eikonal: float = 0.05

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v < 0:
                raise LossError(f"negative weight {name}")


@dataclass
class RayBatch:
    """Rendered quantities and their supervision targets, one row per ray."""
    color_pred: np.ndarray = None        # (n, 3)
    color_gt: np.ndarray = None
    depth_pred: np.ndarray = None        # (n,)
    depth_gt: np.ndarray = None
    normal_pred: np.ndarray = None       # (n, 3), unit
    normal_gt: np.ndarray = None
    semantic_logits: np.ndarray = None   # (n, L)
    semantic_gt: np.ndarray = None       # (n, L) distributions
    feature_pred: np.ndarray = None      # (n, D)
    feature_gt: np.ndarray = None
    opacity_fg_pred: np.ndarray = None   # (n,)
    opacity_bg_pred: np.ndarray = None
    opacity_fg_gt: np.ndarray = None     # binary
    opacity_bg_gt: np.ndarray = None
    floor_mask: np.ndarray = None        # (n,) bool, rays labeled floor
    wall_mask: np.ndarray = None
    p_floor: np.ndarray = None           # (n,) semantic probabilities
    p_wall: np.ndarray = None


def _mean(per_ray):
    per_ray = np.asarray(per_ray, dtype=np.float64)
    return float(per_ray.mean()) if per_ray.size else 0.0


def loss_rgb(batch: RayBatch) -> float:
    diff = np.abs(np.asarray(batch.color_gt, float) - np.asarray(batch.color_pred, float))
    return _mean(diff.sum(axis=-1))


def fit_depth_affine(depth_pred, depth_gt):
    """Least-squares (w, q) minimizing sum (w*pred + q - gt)^2."""
    x = np.asarray(depth_pred, dtype=np.float64)
    y = np.asarray(depth_gt, dtype=np.float64)
    if np.ptp(x) < 1e-12:
        return 1.0, float(np.mean(y - x))
    a = np.stack([x, np.ones_like(x)], axis=1)
    (w, q), *_ = np.linalg.lstsq(a, y, rcond=None)
    return float(w), float(q)


def loss_depth_scale_invariant(batch: RayBatch) -> float:
    x = np.asarray(batch.depth_pred, dtype=np.float64)
    y = np.asarray(batch.depth_gt, dtype=np.float64)
    w, q = fit_depth_affine(x, y)
    return float(np.sum((w * x + q - y) ** 2) / len(x))


def loss_normal(batch: RayBatch) -> float:
    n_pred = np.asarray(batch.normal_pred, dtype=np.float64)
    n_gt = np.asarray(batch.normal_gt, dtype=np.float64)
    l1 = np.abs(n_pred - n_gt).sum(axis=-1)
    ang = np.abs(1.0 - np.sum(n_pred * n_gt, axis=-1))
    return _mean(l1 + ang)


def loss_eikonal(sdf, points, h=1e-4) -> float:
    grad = sdf_gradient(sdf, np.asarray(points, dtype=np.float64), h)
    norms = np.linalg.norm(np.atleast_2d(grad), axis=-1)
    return _mean((norms - 1.0) ** 2)


def loss_semantic(batch: RayBatch) -> float:
    logits = np.asarray(batch.semantic_logits, dtype=np.float64)
    target = np.asarray(batch.semantic_gt, dtype=np.float64)
    z = logits - logits.max(axis=-1, keepdims=True)
    prob = np.exp(z)
    prob /= prob.sum(axis=-1, keepdims=True)
    prob = np.clip(prob, 1e-12, None)
    return _mean(-(target * np.log(prob)).sum(axis=-1))


def loss_opacity(batch: RayBatch) -> float:
    ef = np.abs(np.asarray(batch.opacity_fg_pred, float) - np.asarray(batch.opacity_fg_gt, float))
    eb = np.abs(np.asarray(batch.opacity_bg_pred, float) - np.asarray(batch.opacity_bg_gt, float))
    return _mean(ef + eb)


def loss_object_distinction(scene, points) -> float:
    """Penalty for points lying inside more than one field."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    df = scene.foreground(pts)
    db = scene.background(pts)
    d_omega = np.minimum(df, db)
    # accumulate over fields not achieving the min; exact ties contribute nothing
    terms = np.where(df > d_omega, np.maximum(0.0, -df - d_omega), 0.0)
    terms += np.where(db > d_omega, np.maximum(0.0, -db - d_omega), 0.0)
    return _mean(terms)


FLOOR_NORMAL = np.array([0.0, 0.0, 1.0])


def _wall_term(n_pred, n_wall, p_wall):
    dots = n_pred @ np.asarray(n_wall, dtype=np.float64)
    best = np.min(np.abs(dots[:, None] - np.array([-1.0, 0.0, 1.0])), axis=1)
    return np.asarray(p_wall, dtype=np.float64) * best


def loss_manhattan(batch: RayBatch, n_wall) -> float:
    n_pred = np.asarray(batch.normal_pred, dtype=np.float64)
    fmask = np.asarray(batch.floor_mask, dtype=bool)
    wmask = np.asarray(batch.wall_mask, dtype=bool)
    floor_term = 0.0
    if fmask.any():
        dev = np.abs(1.0 - n_pred[fmask] @ FLOOR_NORMAL)
        floor_term = _mean(np.asarray(batch.p_floor, float)[fmask] * dev)
    wall_term = 0.0
    if wmask.any():
        wall_term = _mean(_wall_term(n_pred[wmask], n_wall,
                                     np.asarray(batch.p_wall, float)[wmask]))
    return floor_term + wall_term


def fit_wall_normal(batch: RayBatch, step_deg=0.5):
    """Horizontal unit normal minimizing the wall term, by azimuth grid search."""
    wmask = np.asarray(batch.wall_mask, dtype=bool)
    if not wmask.any():
        raise LossError("no wall rays in batch")
    n_pred = np.asarray(batch.normal_pred, dtype=np.float64)[wmask]
    p_wall = np.asarray(batch.p_wall, dtype=np.float64)[wmask]
    thetas = np.deg2rad(np.arange(0.0, 180.0, step_deg))
    best_theta, best_val = thetas[0], np.inf
    for theta in thetas:
        n_w = np.array([np.cos(theta), np.sin(theta), 0.0])
        val = _mean(_wall_term(n_pred, n_w, p_wall))
        if val < best_val - 1e-15:
            best_theta, best_val = theta, val
    return np.array([np.cos(best_theta), np.sin(best_theta), 0.0])


def loss_floor(scene, ceiling_points, step=0.02, tol=1e-5, grad_h=1e-4):
    """Mean |1 - n(p_f) . up| over ceiling points whose gravity ray hits a floor.

    Returns (loss, found_count).
    """
    pts = np.atleast_2d(np.asarray(ceiling_points, dtype=np.float64))
    terms = []
    for p_c in pts:
        p_f = find_floor_point(scene, p_c, step=step, tol=tol)
        if p_f is None:
            continue
        n = surface_normal(scene.background, p_f, grad_h)
        terms.append(abs(1.0 - float(n @ FLOOR_NORMAL)))
    if not terms:
        return 0.0, 0
    return _mean(terms), len(terms)


def loss_feature(batch: RayBatch) -> float:
    f_pred = np.asarray(batch.feature_pred, dtype=np.float64)
    f_gt = np.asarray(batch.feature_gt, dtype=np.float64)
    if f_pred.shape != f_gt.shape:
        raise LossError(f"feature shape mismatch {f_pred.shape} vs {f_gt.shape}")
    return _mean(((f_pred - f_gt) ** 2).mean(axis=-1))


def loss_total(terms: dict, weights: LossWeights = LossWeights()):
    """Weighted total from precomputed term values.

    Expects keys: rgb, depth, normal, eikonal, opacity, distinction,
    manhattan, floor, semantic, feature. Returns (total, breakdown) where
    the breakdown holds the weighted contributions and sums to the total.
    """
    w = weights
    breakdown = {
        "rgb": terms["rgb"],
        "geo_depth": w.geo_depth * terms["depth"],
        "geo_normal": w.geo_normal * terms["normal"],
        "geo_eikonal": w.geo_eikonal * terms["eikonal"],
        "opacity": w.opacity * terms["opacity"],
        "distinction": w.distinction * terms["distinction"],
        "manhattan": w.manhattan * terms["manhattan"],
        "floor": w.floor * terms["floor"],
        "semantic": w.semantic * terms["semantic"],
        "feature": w.feature * terms["feature"],
    }
    total = float(sum(breakdown.values()))
    return total, breakdown
