import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from decomesh.losses import (LossError, LossWeights, RayBatch, fit_wall_normal,
                             loss_depth_scale_invariant, loss_eikonal,
                             loss_feature, loss_floor, loss_manhattan,
                             loss_normal, loss_object_distinction,
                             loss_opacity, loss_rgb, loss_semantic, loss_total)
from decomesh.sdf import ComposedScene, Plane, RoomShell, SdfField, Sphere

from oracles import depth_fit_grid_search


def unit_rows(a):
    return a / np.linalg.norm(a, axis=-1, keepdims=True)


# -- color ------------------------------------------------------------------

def test_rgb_zero_at_match():
    b = RayBatch(color_pred=np.random.rand(5, 3))
    b.color_gt = b.color_pred.copy()
    assert loss_rgb(b) == 0.0


def test_rgb_single_ray():
    b = RayBatch(color_pred=np.zeros((1, 3)), color_gt=np.ones((1, 3)))
    assert loss_rgb(b) == pytest.approx(3.0)


def test_rgb_matches_loop_oracle():
    rng = np.random.default_rng(1)
    pred, gt = rng.random((40, 3)), rng.random((40, 3))
    b = RayBatch(color_pred=pred, color_gt=gt)
    expect = sum(sum(abs(gt[i, k] - pred[i, k]) for k in range(3))
                 for i in range(40)) / 40
    assert loss_rgb(b) == pytest.approx(expect, abs=1e-12)


# -- depth ------------------------------------------------------------------

def test_depth_affine_invariance_exact():
    rng = np.random.default_rng(2)
    d = rng.uniform(1, 5, 30)
    b = RayBatch(depth_pred=d, depth_gt=2.0 * d + 0.3)
    assert loss_depth_scale_invariant(b) < 1e-10


def test_depth_identical_zero():
    d = np.linspace(1, 4, 10)
    assert loss_depth_scale_invariant(RayBatch(depth_pred=d, depth_gt=d)) < 1e-12


def test_depth_matches_grid_search_oracle():
    rng = np.random.default_rng(3)
    pred = rng.uniform(1, 5, 25)
    gt = 1.3 * pred - 0.4 + rng.normal(0, 0.3, 25)
    ours = loss_depth_scale_invariant(RayBatch(depth_pred=pred, depth_gt=gt))
    oracle = depth_fit_grid_search(pred, gt)
    assert ours == pytest.approx(oracle, abs=1e-6)


def test_depth_degenerate_constant_pred():
    pred = np.full(8, 2.0)
    gt = np.full(8, 5.0)
    # falls back to w=1, q=mean(gt - pred): residual zero here
    assert loss_depth_scale_invariant(RayBatch(depth_pred=pred, depth_gt=gt)) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3).filter(lambda a: abs(a) > 1e-3), st.floats(-5, 5))
def test_depth_invariant_under_affine_remap(a, q):
    rng = np.random.default_rng(7)
    pred = rng.uniform(1, 5, 20)
    gt = 0.8 * pred + 0.1 + rng.normal(0, 0.05, 20)
    base = loss_depth_scale_invariant(RayBatch(depth_pred=pred, depth_gt=gt))
    remapped = loss_depth_scale_invariant(RayBatch(depth_pred=a * pred + q, depth_gt=gt))
    assert abs(base - remapped) < 1e-8


# -- normal -----------------------------------------------------------------

def test_normal_zero_at_match():
    n = unit_rows(np.random.default_rng(4).normal(size=(6, 3)))
    assert loss_normal(RayBatch(normal_pred=n, normal_gt=n.copy())) < 1e-12


def test_normal_antipodal():
    n = np.array([[0.0, 0.0, 1.0]])
    assert loss_normal(RayBatch(normal_pred=-n, normal_gt=n)) == pytest.approx(4.0)


def test_normal_loop_oracle():
    rng = np.random.default_rng(5)
    a, b = unit_rows(rng.normal(size=(30, 3))), unit_rows(rng.normal(size=(30, 3)))
    batch = RayBatch(normal_pred=a, normal_gt=b)
    expect = np.mean([np.abs(a[i] - b[i]).sum() + abs(1 - a[i] @ b[i])
                      for i in range(30)])
    assert loss_normal(batch) == pytest.approx(expect, abs=1e-12)


# -- eikonal ----------------------------------------------------------------

def test_eikonal_exact_sphere():
    f = SdfField([Sphere((0, 0, 0), 1.0)])
    rng = np.random.default_rng(6)
    pts = rng.uniform(-2, 2, size=(1000, 3))
    pts = pts[np.linalg.norm(pts, axis=1) > 0.2]
    assert loss_eikonal(f, pts) < 1e-6


def test_eikonal_scaled_field():
    f = SdfField([Sphere((0, 0, 0), 1.0)])
    rng = np.random.default_rng(6)
    pts = rng.uniform(0.5, 2, size=(200, 3))
    doubled = lambda p: 2.0 * f(p)
    assert loss_eikonal(doubled, pts) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("k", [0.5, 2.0, 3.0])
def test_eikonal_scale_property(k):
    f = SdfField([Sphere((0, 0, 0), 1.0)])
    rng = np.random.default_rng(8)
    pts = rng.uniform(0.5, 2, size=(200, 3))
    scaled = lambda p: k * f(p)
    assert loss_eikonal(scaled, pts) == pytest.approx((k - 1.0) ** 2, abs=1e-6)


def test_eikonal_composed_room(room_scene):
    rng = np.random.default_rng(9)
    pts = rng.uniform(-1.8, 1.8, size=(3000, 3))
    pts[:, 2] = np.clip(np.abs(pts[:, 2]), 0.1, 2.9)
    df = room_scene.foreground(pts)
    db = room_scene.background(pts)
    keep = (np.abs(df - db) > 0.05) & (np.abs(df) > 0.03) & (np.abs(db) > 0.03)
    assert loss_eikonal(room_scene.sdf, pts[keep], h=1e-5) < 1e-4


# -- semantic ---------------------------------------------------------------

def test_semantic_confident_match():
    logits = np.array([[50.0, 0.0, 0.0, 0.0]])
    target = np.array([[1.0, 0.0, 0.0, 0.0]])
    assert loss_semantic(RayBatch(semantic_logits=logits, semantic_gt=target)) < 1e-9


def test_semantic_uniform_prediction():
    logits = np.zeros((3, 4))
    target = np.tile([1.0, 0, 0, 0], (3, 1))
    val = loss_semantic(RayBatch(semantic_logits=logits, semantic_gt=target))
    assert val == pytest.approx(np.log(4), abs=1e-12)


def test_semantic_loop_oracle():
    rng = np.random.default_rng(10)
    logits = rng.normal(size=(20, 5))
    target = rng.random((20, 5))
    target /= target.sum(axis=1, keepdims=True)
    val = loss_semantic(RayBatch(semantic_logits=logits, semantic_gt=target))
    expect = 0.0
    for i in range(20):
        p = np.exp(logits[i]) / np.exp(logits[i]).sum()
        expect += -(target[i] * np.log(np.clip(p, 1e-12, None))).sum()
    assert val == pytest.approx(expect / 20, abs=1e-10)


# -- opacity ----------------------------------------------------------------

def test_opacity_perfect():
    b = RayBatch(opacity_fg_pred=np.array([1.0, 0.0]), opacity_fg_gt=np.array([1.0, 0.0]),
                 opacity_bg_pred=np.array([0.0, 1.0]), opacity_bg_gt=np.array([0.0, 1.0]))
    assert loss_opacity(b) == 0.0


def test_opacity_single_ray():
    b = RayBatch(opacity_fg_pred=np.array([0.2]), opacity_fg_gt=np.array([1.0]),
                 opacity_bg_pred=np.array([0.1]), opacity_bg_gt=np.array([0.0]))
    assert loss_opacity(b) == pytest.approx(0.9)


def test_opacity_loop_oracle():
    rng = np.random.default_rng(11)
    b = RayBatch(opacity_fg_pred=rng.random(25), opacity_fg_gt=(rng.random(25) > 0.5) * 1.0,
                 opacity_bg_pred=rng.random(25), opacity_bg_gt=(rng.random(25) > 0.5) * 1.0)
    expect = np.mean([abs(b.opacity_fg_pred[i] - b.opacity_fg_gt[i])
                      + abs(b.opacity_bg_pred[i] - b.opacity_bg_gt[i]) for i in range(25)])
    assert loss_opacity(b) == pytest.approx(expect, abs=1e-12)


# -- object distinction -----------------------------------------------------

class _Const:
    def __init__(self, v):
        self.v = v

    def __call__(self, p):
        return np.full(np.asarray(p, float).shape[:-1], self.v)


def _const_scene(df, db):
    scene = ComposedScene.__new__(ComposedScene)
    scene.foreground = _Const(df)
    scene.background = _Const(db)
    return scene


def test_distinction_outside_both():
    assert loss_object_distinction(_const_scene(0.5, 0.1), np.zeros((1, 3))) == 0.0


def test_distinction_inside_both():
    val = loss_object_distinction(_const_scene(-0.5, -0.8), np.zeros((1, 3)))
    assert val == pytest.approx(1.3)


def test_distinction_disjoint_fixture(two_sphere_bundle):
    scene = two_sphere_bundle.scene
    rng = np.random.default_rng(12)
    pts = rng.uniform(-2, 2, size=(20000, 3))
    pts[:, 2] = np.abs(pts[:, 2]) * 1.5
    assert loss_object_distinction(scene, pts) == 0.0


# -- manhattan / wall normal ------------------------------------------------

def _man_batch(normals, floor_mask, wall_mask, p_f=None, p_w=None):
    n = np.asarray(normals, float)
    k = len(n)
    return RayBatch(normal_pred=n,
                    floor_mask=np.asarray(floor_mask, bool),
                    wall_mask=np.asarray(wall_mask, bool),
                    p_floor=np.ones(k) if p_f is None else np.asarray(p_f, float),
                    p_wall=np.ones(k) if p_w is None else np.asarray(p_w, float))


def test_manhattan_perfect_floor():
    b = _man_batch([[0, 0, 1]], [True], [False])
    assert loss_manhattan(b, np.array([1.0, 0, 0])) == 0.0


def test_manhattan_wall_antiparallel():
    b = _man_batch([[-1, 0, 0]], [False], [True])
    assert loss_manhattan(b, np.array([1.0, 0, 0])) == 0.0


def test_manhattan_wall_oblique():
    n = np.array([0.4, np.sqrt(1 - 0.16), 0.0])
    b = _man_batch([n], [False], [True])
    assert loss_manhattan(b, np.array([1.0, 0, 0])) == pytest.approx(0.4)


def test_fit_wall_normal_axis_aligned():
    normals = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], float)
    b = _man_batch(normals, [False] * 4, [True] * 4)
    n_w = fit_wall_normal(b)
    val = loss_manhattan(b, n_w)
    assert val < 1e-3
    assert abs(n_w[2]) < 1e-12


def test_fit_wall_normal_single_wall():
    b = _man_batch([[0, 1, 0]], [False], [True])
    n_w = fit_wall_normal(b)
    assert loss_manhattan(b, n_w) < 1e-12


def test_fit_wall_normal_noisy_near_optimal():
    rng = np.random.default_rng(13)
    base = np.array([np.cos(0.6), np.sin(0.6), 0.0])
    normals = unit_rows(np.concatenate([base + rng.normal(0, 0.05, (20, 3)),
                                        -base + rng.normal(0, 0.05, (20, 3))]))
    b = _man_batch(normals, [False] * 40, [True] * 40)
    fitted = loss_manhattan(b, fit_wall_normal(b))
    fine = min(loss_manhattan(b, np.array([np.cos(t), np.sin(t), 0.0]))
               for t in np.linspace(0, np.pi, 14401))
    assert fitted <= fine * 1.05 + 1e-12


def test_fit_wall_normal_requires_walls():
    b = _man_batch([[0, 0, 1]], [True], [False])
    with pytest.raises(LossError):
        fit_wall_normal(b)


# -- floor loss --------------------------------------------------------------

def test_floor_flat_room(room_scene):
    pts = np.array([[0.5, 0.5, 3.0], [-1.0, 1.2, 3.0]])
    val, found = loss_floor(room_scene, pts)
    assert found == 2
    assert val < 1e-6


def test_floor_tilted_30_degrees():
    slope = np.tan(np.deg2rad(30))
    n = np.array([-slope, 0.0, 1.0])
    n /= np.linalg.norm(n)
    bg = SdfField([Plane(tuple(n), 0.0), Plane((0, 0, -1), -3.0)])
    scene = ComposedScene(SdfField([Sphere((50, 50, 50), 0.1)]), bg, beta=0.05)
    val, found = loss_floor(scene, np.array([[0.5, 0.0, 3.0]]), tol=1e-7)
    assert found == 1
    assert val == pytest.approx(1 - np.cos(np.deg2rad(30)), abs=1e-4)


def test_floor_bumpy_matches_manual():
    # floor plane plus a spherical bump; oracle evaluates each point by hand
    bump = Sphere((0.0, 0.0, -0.8), 1.0)
    bg = SdfField([Plane((0, 0, 1), 0.0), bump, Plane((0, 0, -1), -3.0)])
    scene = ComposedScene(SdfField([Sphere((50, 50, 50), 0.1)]), bg, beta=0.05)
    pts = np.array([[0.1, 0.0, 3.0], [1.5, 0.0, 3.0]])
    val, found = loss_floor(scene, pts, tol=1e-7)
    assert found == 2
    manual = []
    for p in pts:
        x, y = p[0], p[1]
        r_xy = np.hypot(x, y)
        # bump surface exists where x^2+y^2 <= r^2 - 0.64, above the plane
        if r_xy ** 2 <= 1.0 - 0.64:
            z = -0.8 + np.sqrt(1.0 - r_xy ** 2)
            normal = np.array([x, y, z + 0.8])
            normal /= np.linalg.norm(normal)
        else:
            normal = np.array([0.0, 0.0, 1.0])
        manual.append(abs(1 - normal[2]))
    assert val == pytest.approx(np.mean(manual), abs=1e-4)


def test_floor_skips_open_points():
    bg = SdfField([Plane((0, 0, -1), -3.0)])   # no floor at all
    scene = ComposedScene(SdfField([Sphere((50, 50, 50), 0.1)]), bg, beta=0.05)
    val, found = loss_floor(scene, np.array([[0.0, 0.0, 3.0]]))
    assert (val, found) == (0.0, 0)


# -- feature -----------------------------------------------------------------

def test_feature_zero_at_match():
    f = np.random.default_rng(14).normal(size=(5, 8))
    assert loss_feature(RayBatch(feature_pred=f, feature_gt=f.copy())) == 0.0


def test_feature_mse_example():
    b = RayBatch(feature_pred=np.array([[0.0, 0.0]]), feature_gt=np.array([[1.0, 0.0]]))
    assert loss_feature(b) == pytest.approx(0.5)


def test_feature_loop_oracle():
    rng = np.random.default_rng(15)
    a, b = rng.normal(size=(20, 6)), rng.normal(size=(20, 6))
    val = loss_feature(RayBatch(feature_pred=a, feature_gt=b))
    expect = np.mean([((a[i] - b[i]) ** 2).mean() for i in range(20)])
    assert val == pytest.approx(expect, abs=1e-12)


def test_feature_dim_mismatch():
    with pytest.raises(LossError):
        loss_feature(RayBatch(feature_pred=np.zeros((2, 3)), feature_gt=np.zeros((2, 4))))


# -- total -------------------------------------------------------------------

ZERO_TERMS = {k: 0.0 for k in ("rgb", "depth", "normal", "eikonal", "opacity",
                               "distinction", "manhattan", "floor", "semantic",
                               "feature")}


def test_total_zero():
    total, breakdown = loss_total(ZERO_TERMS)
    assert total == 0.0
    assert all(v == 0.0 for v in breakdown.values())


def test_total_unit_terms_paper_weights():
    terms = {k: 1.0 for k in ZERO_TERMS}
    total, _ = loss_total(terms)
    assert total == pytest.approx(2.02, abs=1e-12)


def test_total_breakdown_recombines():
    rng = np.random.default_rng(16)
    terms = {k: float(rng.random()) for k in ZERO_TERMS}
    total, breakdown = loss_total(terms)
    assert abs(total - sum(breakdown.values())) < 1e-12


def test_total_linear_in_each_weight():
    rng = np.random.default_rng(17)
    terms = {k: float(rng.random()) for k in ZERO_TERMS}
    base, _ = loss_total(terms, LossWeights())
    bumped, _ = loss_total(terms, LossWeights(semantic=0.5 + 1.0))
    assert bumped - base == pytest.approx(terms["semantic"], abs=1e-12)


def test_weights_reject_negative():
    with pytest.raises(LossError):
        LossWeights(opacity=-0.1)


def test_default_weights_match_paper():
    w = LossWeights()
    assert (w.opacity, w.distinction, w.manhattan, w.floor, w.semantic, w.feature) \
        == (0.1, 0.1, 0.01, 0.01, 0.5, 0.1)
    assert (w.geo_depth, w.geo_normal, w.geo_eikonal) == (0.1, 0.05, 0.05)
