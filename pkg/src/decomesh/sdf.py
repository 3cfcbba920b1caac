"""Analytic signed distance fields, min-composition and density conversion.

All field evaluations are vectorized: points are (..., 3) arrays and
distances come back with shape (...,). Fields are immutable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

FOREGROUND = "foreground"
BACKGROUND = "background"

# semantic class ids used by analytic scenes
CLASS_FLOOR = 1
CLASS_WALL = 2
CLASS_CEILING = 3
CLASS_OBJECT_BASE = 10   # object k gets class CLASS_OBJECT_BASE + k


class SceneError(ValueError):
    pass


def _pts(p):
    return np.atleast_2d(np.asarray(p, dtype=np.float64))


class Primitive:
    """Base: exact SDF with a semantic class id and constant attribute color."""

    class_id = 0
    color = (0.5, 0.5, 0.5)

    def distance(self, p):
        raise NotImplementedError

    def __call__(self, p):
        p = np.asarray(p, dtype=np.float64)
        d = self.distance(_pts(p))
        return d.reshape(p.shape[:-1])


@dataclass(frozen=True)
class Sphere(Primitive):
    center: tuple
    radius: float
    class_id: int = CLASS_OBJECT_BASE
    color: tuple = (0.8, 0.3, 0.3)

    def distance(self, p):
        return np.linalg.norm(p - np.asarray(self.center), axis=-1) - self.radius


@dataclass(frozen=True)
class Box(Primitive):
    center: tuple
    half_extents: tuple
    class_id: int = CLASS_OBJECT_BASE
    color: tuple = (0.3, 0.5, 0.8)

    def distance(self, p):
        q = np.abs(p - np.asarray(self.center)) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Plane(Primitive):
    """Half-space: d(p) = n·p - offset, negative on the side opposite n."""
    normal: tuple
    offset: float
    class_id: int = CLASS_FLOOR
    color: tuple = (0.6, 0.6, 0.6)

    def distance(self, p):
        n = np.asarray(self.normal, dtype=np.float64)
        n = n / np.linalg.norm(n)
        return p @ n - self.offset


@dataclass(frozen=True)
class RoomShell(Primitive):
    """Negated box: the solid is everything outside the room volume.

    Zero set is the room's walls/floor/ceiling; the interior of the room is
    positive (empty space). Exact SDF on both sides.
    """
    center: tuple
    half_extents: tuple
    class_id: int = CLASS_WALL
    color: tuple = (0.75, 0.72, 0.65)

    def distance(self, p):
        q = np.abs(p - np.asarray(self.center)) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return -(outside + inside)

    def face_class(self, p):
        """floor / ceiling / wall by the nearest face of the room box."""
        p = _pts(p)
        rel = p - np.asarray(self.center)
        gap = np.asarray(self.half_extents) - np.abs(rel)   # distance to each slab
        nearest_axis = np.argmin(gap, axis=-1)
        cls = np.full(len(p), CLASS_WALL, dtype=np.int64)
        z_face = nearest_axis == 2
        cls[z_face & (rel[:, 2] < 0)] = CLASS_FLOOR
        cls[z_face & (rel[:, 2] >= 0)] = CLASS_CEILING
        return cls


@dataclass(frozen=True)
class Translate(Primitive):
    base: Primitive
    offset: tuple

    def distance(self, p):
        return self.base.distance(p - np.asarray(self.offset))

    @property
    def class_id(self):
        return self.base.class_id

    @property
    def color(self):
        return self.base.color


@dataclass
class SdfField:
    """Union (pointwise min) of primitives forming one field."""
    primitives: list

    def __post_init__(self):
        if not self.primitives:
            raise SceneError("field needs at least one primitive")

    def distances(self, p):
        """(n_prims, ...) per-primitive distances."""
        p = _pts(p)
        return np.stack([prim.distance(p) for prim in self.primitives])

    def __call__(self, p):
        p = np.asarray(p, dtype=np.float64)
        d = self.distances(p).min(axis=0)
        return d.reshape(p.shape[:-1])

    def nearest_primitive(self, p):
        return self.distances(p).argmin(axis=0)

    def class_ids(self, p):
        """Semantic class of the nearest primitive at each point."""
        p2 = _pts(p)
        idx = self.nearest_primitive(p2)
        cls = np.empty(len(p2), dtype=np.int64)
        for k, prim in enumerate(self.primitives):
            sel = idx == k
            if not sel.any():
                continue
            if isinstance(prim, RoomShell):
                cls[sel] = prim.face_class(p2[sel])
            else:
                cls[sel] = prim.class_id
        return cls

    def colors(self, p):
        idx = self.nearest_primitive(_pts(p))
        palette = np.array([prim.color for prim in self.primitives])
        return palette[idx]


@dataclass
class ComposedScene:
    foreground: SdfField
    background: SdfField
    beta: float = 0.05
    n_classes: int = 16
    feature_dim: int = 8
    # per foreground primitive: unit feature prototype row, (n_fg_prims, D)
    feature_prototypes: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.beta <= 0:
            raise SceneError("beta must be positive")
        if self.feature_prototypes is None:
            rng = np.random.default_rng(0)
            protos = rng.normal(size=(len(self.foreground.primitives), self.feature_dim))
            self.feature_prototypes = protos / np.linalg.norm(protos, axis=1, keepdims=True)

    def sdf(self, p):
        """Composed distance min(d_F, d_B)."""
        p = np.asarray(p, dtype=np.float64)
        return np.minimum(self.foreground(p), self.background(p))

    def scene_sdf(self, p):
        """(d_omega, argmin tags); ties resolve to FOREGROUND."""
        p = np.asarray(p, dtype=np.float64)
        df, db = self.foreground(p), self.background(p)
        d = np.minimum(df, db)
        tags = np.where(df <= db, FOREGROUND, BACKGROUND)
        if p.ndim == 1:
            return float(d), str(tags)
        return d, tags

    def semantic_class(self, p):
        """Class id of the nearest primitive of the achieving field."""
        p2 = _pts(np.asarray(p, dtype=np.float64))
        df, db = self.foreground(p2), self.background(p2)
        fg = df <= db
        cls = np.empty(len(p2), dtype=np.int64)
        if fg.any():
            cls[fg] = self.foreground.class_ids(p2[fg])
        if (~fg).any():
            cls[~fg] = self.background.class_ids(p2[~fg])
        return cls


def density(d, beta):
    """Piecewise-exponential conversion of signed distance to volume density."""
    if beta <= 0:
        raise SceneError("beta must be positive")
    d = np.asarray(d, dtype=np.float64)
    sigma = np.where(d >= 0,
                     0.5 / beta * np.exp(-np.clip(d, 0, None) / beta),
                     1.0 / beta - 0.5 / beta * np.exp(np.clip(d, None, 0) / beta))
    return float(sigma) if sigma.ndim == 0 else sigma


def sdf_gradient(f, p, h=1e-4):
    """Central finite-difference gradient of a scalar field, per point."""
    if h <= 0:
        raise SceneError("step must be positive")
    p = np.asarray(p, dtype=np.float64)
    pts = _pts(p)
    grad = np.empty_like(pts)
    for ax in range(3):
        dp = np.zeros(3)
        dp[ax] = h
        grad[:, ax] = (f(pts + dp) - f(pts - dp)) / (2 * h)
    return grad.reshape(p.shape)


def surface_normal(f, p, h=1e-4):
    g = sdf_gradient(f, p, h)
    n = np.linalg.norm(np.atleast_2d(g), axis=-1, keepdims=True)
    n = np.where(n > 0, n, 1.0)
    return (np.atleast_2d(g) / n).reshape(np.asarray(p, dtype=float).shape)


# ---------------------------------------------------------------------------
# Scene description JSON

_PRIM_BUILDERS = {
    "sphere": lambda s: Sphere(tuple(s["center"]), float(s["radius"]),
                               class_id=int(s.get("class_id", CLASS_OBJECT_BASE)),
                               color=tuple(s.get("color", (0.8, 0.3, 0.3)))),
    "box": lambda s: Box(tuple(s["center"]), tuple(s["half_extents"]),
                         class_id=int(s.get("class_id", CLASS_OBJECT_BASE)),
                         color=tuple(s.get("color", (0.3, 0.5, 0.8)))),
    "plane": lambda s: Plane(tuple(s["normal"]), float(s["offset"]),
                             class_id=int(s.get("class_id", CLASS_FLOOR)),
                             color=tuple(s.get("color", (0.6, 0.6, 0.6)))),
    "room": lambda s: RoomShell(tuple(s["center"]), tuple(s["half_extents"]),
                                class_id=int(s.get("class_id", CLASS_WALL)),
                                color=tuple(s.get("color", (0.75, 0.72, 0.65)))),
}


def scene_from_dict(doc) -> ComposedScene:
    fg, bg = [], []
    for spec in doc.get("primitives", []):
        kind = spec.get("kind")
        if kind not in _PRIM_BUILDERS:
            raise SceneError(f"unknown primitive kind {kind!r}")
        prim = _PRIM_BUILDERS[kind](spec)
        tag = spec.get("field", FOREGROUND)
        if tag == FOREGROUND:
            fg.append(prim)
        elif tag == BACKGROUND:
            bg.append(prim)
        else:
            raise SceneError(f"unknown field tag {tag!r}")
    if not fg or not bg:
        raise SceneError("scene needs at least one foreground and one background primitive")
    params = doc.get("params", {})
    protos = params.get("feature_prototypes")
    return ComposedScene(
        SdfField(fg), SdfField(bg),
        beta=float(params.get("beta", 0.05)),
        n_classes=int(params.get("n_classes", 16)),
        feature_dim=int(params.get("feature_dim", 8)),
        feature_prototypes=None if protos is None else np.asarray(protos, dtype=np.float64),
    )


def load_scene(path) -> ComposedScene:
    with open(path) as fh:
        return scene_from_dict(json.load(fh))
