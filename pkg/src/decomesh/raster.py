"""Software rasterizer: pinhole projection, z-buffer, barycentric attributes.

Conventions: camera looks along +z of the camera frame, +y is down in the
image, pixel centers sit at integer + 0.5. Interpolation is perspective
correct (screen barycentrics reweighted by 1/z). No backface culling, no
anti-aliasing: one sample per pixel center so the pixel-to-vertex
correspondence stays unambiguous.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import NeuralMesh

MISS_ID = np.uint32(0xFFFFFFFF)


class CameraError(ValueError):
    pass


@dataclass
class Camera:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_from_camera: np.ndarray   # 4x4 rigid, row-major

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise CameraError("focal lengths must be positive")
        self.world_from_camera = np.asarray(self.world_from_camera, dtype=np.float64).reshape(4, 4)
        r = self.world_from_camera[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise CameraError("rotation block is not orthonormal")

    @property
    def camera_from_world(self):
        r = self.world_from_camera[:3, :3]
        t = self.world_from_camera[:3, 3]
        out = np.eye(4)
        out[:3, :3] = r.T
        out[:3, 3] = -r.T @ t
        return out

    def to_dict(self):
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height,
                "world_from_camera": self.world_from_camera.reshape(-1).tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]),
                   width=int(d["width"]), height=int(d["height"]),
                   world_from_camera=np.asarray(d["world_from_camera"], dtype=np.float64))

    def pixel_rays(self, pixels):
        """World-space (origins, unit directions) through the given pixel centers."""
        pixels = np.atleast_2d(np.asarray(pixels, dtype=np.float64))
        x = (pixels[:, 0] + 0.5 - self.cx) / self.fx
        y = (pixels[:, 1] + 0.5 - self.cy) / self.fy
        dirs_cam = np.stack([x, y, np.ones_like(x)], axis=1)
        r = self.world_from_camera[:3, :3]
        t = self.world_from_camera[:3, 3]
        dirs = dirs_cam @ r.T
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        return np.broadcast_to(t, dirs.shape).copy(), dirs


def look_at_camera(eye, target, up=(0, 0, 1), fx=160.0, fy=160.0,
                   width=160, height=120) -> Camera:
    """Camera at eye looking toward target; +y in image points down."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd /= np.linalg.norm(fwd)
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, up)
    if np.linalg.norm(right) < 1e-9:
        right = np.cross(fwd, np.array([0.0, 1.0, 0.0]))
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    pose = np.eye(4)
    pose[:3, 0] = right
    pose[:3, 1] = down
    pose[:3, 2] = fwd
    pose[:3, 3] = eye
    return Camera(fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0,
                  width=width, height=height, world_from_camera=pose)


@dataclass
class RasterBuffers:
    depth: np.ndarray       # (h, w) float64, +inf = miss
    vertex_id: np.ndarray   # (h, w) uint32, MISS_ID = miss
    feature: np.ndarray     # (h, w, d) float32, zero rows at misses
    normal: np.ndarray      # (h, w, 3)
    color: np.ndarray       # (h, w, 3)
    label: np.ndarray       # (h, w) uint32, MISS_ID at misses

    @property
    def hit(self):
        return np.isfinite(self.depth)


def vertex_normals(mesh: NeuralMesh):
    """Area-weighted per-vertex normals."""
    v = mesh.positions
    f = mesh.faces
    fn = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    out = np.zeros_like(v)
    for k in range(3):
        np.add.at(out, f[:, k], fn)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    return out / np.where(norms > 0, norms, 1.0)


def rasterize(mesh: NeuralMesh, camera: Camera, colors=None) -> RasterBuffers:
    if mesh.n_vertices == 0:
        raise CameraError("empty mesh")
    h, w = camera.height, camera.width
    vn = vertex_normals(mesh)
    if colors is None:
        colors = 0.5 + 0.5 * vn
    colors = np.asarray(colors, dtype=np.float64)
    feat_dim = mesh.feature_dim
    feats = mesh.features if feat_dim else np.zeros((mesh.n_vertices, 0), dtype=np.float32)
    labels = mesh.labels if mesh.labels is not None else None

    depth = np.full((h, w), np.inf)
    vid = np.full((h, w), MISS_ID, dtype=np.uint32)
    feature = np.zeros((h, w, feat_dim), dtype=np.float32)
    normal = np.zeros((h, w, 3))
    color = np.zeros((h, w, 3))
    label = np.full((h, w), MISS_ID, dtype=np.uint32)

    cfw = camera.camera_from_world
    p_cam = mesh.positions @ cfw[:3, :3].T + cfw[:3, 3]
    z = p_cam[:, 2]
    sx = camera.fx * p_cam[:, 0] / np.where(z > 0, z, 1.0) + camera.cx
    sy = camera.fy * p_cam[:, 1] / np.where(z > 0, z, 1.0) + camera.cy

    for face in mesh.faces:
        tz = z[face]
        if np.any(tz <= 1e-9):
            continue   # near-plane clipping not needed for our scenes
        tx, ty = sx[face], sy[face]
        x0 = max(int(np.floor(tx.min() - 0.5)), 0)
        x1 = min(int(np.ceil(tx.max() - 0.5)), w - 1)
        y0 = max(int(np.floor(ty.min() - 0.5)), 0)
        y1 = min(int(np.ceil(ty.max() - 0.5)), h - 1)
        if x1 < x0 or y1 < y0:
            continue
        area = (tx[1] - tx[0]) * (ty[2] - ty[0]) - (ty[1] - ty[0]) * (tx[2] - tx[0])
        if abs(area) < 1e-12:
            continue
        gx, gy = np.meshgrid(np.arange(x0, x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5)
        l0 = ((tx[1] - gx) * (ty[2] - gy) - (ty[1] - gy) * (tx[2] - gx)) / area
        l1 = ((tx[2] - gx) * (ty[0] - gy) - (ty[2] - gy) * (tx[0] - gx)) / area
        l2 = 1.0 - l0 - l1
        inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if not inside.any():
            continue
        lam = np.stack([l0[inside], l1[inside], l2[inside]], axis=1)
        # perspective-correct weights and depth
        lam_z = lam / tz
        inv_z = lam_z.sum(axis=1)
        pix_z = 1.0 / inv_z
        lam_pc = lam_z * pix_z[:, None]

        ys, xs = np.nonzero(inside)
        ys += y0
        xs += x0
        closer = pix_z < depth[ys, xs]
        if not closer.any():
            continue
        ys, xs, pix_z, lam_pc = ys[closer], xs[closer], pix_z[closer], lam_pc[closer]
        depth[ys, xs] = pix_z
        # winning vertex: largest weight, ties to the lowest vertex index
        order = np.argsort(face, kind="stable")
        best = order[np.argmax(lam_pc[:, order], axis=1)]
        vid[ys, xs] = face[best].astype(np.uint32)
        if feat_dim:
            feature[ys, xs] = (lam_pc @ feats[face]).astype(np.float32)
        n = lam_pc @ vn[face]
        nn = np.linalg.norm(n, axis=1, keepdims=True)
        normal[ys, xs] = n / np.where(nn > 0, nn, 1.0)
        color[ys, xs] = lam_pc @ colors[face]
        if labels is not None:
            label[ys, xs] = labels[face[best]]

    return RasterBuffers(depth=depth, vertex_id=vid, feature=feature,
                         normal=normal, color=color, label=label)


def pixels_to_vertices(buffers: RasterBuffers, pixels):
    """Vertex ids hit by the given (x, y) pixels; misses contribute nothing."""
    out = set()
    vid = buffers.vertex_id
    h, w = vid.shape
    for x, y in pixels:
        if not (0 <= x < w and 0 <= y < h):
            raise CameraError(f"pixel ({x}, {y}) out of bounds")
        v = vid[y, x]
        if v != MISS_ID:
            out.add(int(v))
    return out
