"""Triangle meshes with per-vertex feature vectors and PLY / sidecar I/O.

A NeuralMesh is immutable after construction: positions, faces, adjacency
and the optional feature / label arrays are frozen numpy arrays, so
instances can be shared freely across threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SIDECAR_MAGIC = b"NMF1"


class MeshError(ValueError):
    pass


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


def build_adjacency(n_vertices, faces):
    """Per-vertex sorted neighbor lists from the unique undirected edges."""
    adj = [set() for _ in range(n_vertices)]
    for a, b, c in faces:
        adj[a].update((b, c))
        adj[b].update((a, c))
        adj[c].update((a, b))
    return [np.array(sorted(s), dtype=np.int64) for s in adj]


@dataclass
class NeuralMesh:
    positions: np.ndarray            # (n, 3) float64, meters
    faces: np.ndarray                # (m, 3) int64
    features: np.ndarray | None = None   # (n, D) float32
    labels: np.ndarray | None = None     # (n,) uint32, fixture ground truth
    adjacency: list = field(default=None, repr=False)

    def __post_init__(self):
        self.positions = _frozen(np.asarray(self.positions, dtype=np.float64).reshape(-1, 3))
        self.faces = _frozen(np.asarray(self.faces, dtype=np.int64).reshape(-1, 3))
        n = len(self.positions)
        if self.faces.size:
            if self.faces.min() < 0 or self.faces.max() >= n:
                raise MeshError("face index out of range")
            f = self.faces
            if np.any((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])):
                raise MeshError("degenerate face (repeated vertex index)")
        if self.features is not None:
            self.features = _frozen(np.asarray(self.features, dtype=np.float32).reshape(n, -1))
        if self.labels is not None:
            self.labels = _frozen(np.asarray(self.labels, dtype=np.uint32).reshape(n))
        if self.adjacency is None:
            self.adjacency = build_adjacency(n, self.faces)

    @property
    def n_vertices(self):
        return len(self.positions)

    @property
    def n_faces(self):
        return len(self.faces)

    @property
    def feature_dim(self):
        return 0 if self.features is None else self.features.shape[1]

    def neighbors(self, i):
        return self.adjacency[i]

    def with_features(self, features):
        features = np.asarray(features, dtype=np.float32)
        if features.shape[0] != self.n_vertices:
            raise MeshError(
                f"feature count {features.shape[0]} != vertex count {self.n_vertices}")
        return NeuralMesh(self.positions, self.faces, features=features,
                          labels=self.labels, adjacency=self.adjacency)

    def with_labels(self, labels):
        labels = np.asarray(labels, dtype=np.uint32)
        if labels.shape[0] != self.n_vertices:
            raise MeshError("label count != vertex count")
        return NeuralMesh(self.positions, self.faces, features=self.features,
                          labels=labels, adjacency=self.adjacency)

    def mean_edge_length(self):
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        d = np.linalg.norm(self.positions[e[:, 0]] - self.positions[e[:, 1]], axis=1)
        return float(d.mean())


def extract_submesh(mesh: NeuralMesh, vertex_set) -> NeuralMesh:
    """Submesh of faces whose three vertices are all selected, densely re-indexed."""
    idx = np.asarray(sorted(vertex_set), dtype=np.int64)
    if idx.size == 0:
        raise MeshError("empty vertex set")
    if idx.min() < 0 or idx.max() >= mesh.n_vertices:
        raise MeshError("vertex set out of range")
    keep = np.zeros(mesh.n_vertices, dtype=bool)
    keep[idx] = True
    remap = np.full(mesh.n_vertices, -1, dtype=np.int64)
    remap[idx] = np.arange(idx.size)
    face_mask = keep[mesh.faces].all(axis=1)
    faces = remap[mesh.faces[face_mask]]
    return NeuralMesh(
        mesh.positions[idx], faces,
        features=None if mesh.features is None else mesh.features[idx],
        labels=None if mesh.labels is None else mesh.labels[idx])


# ---------------------------------------------------------------------------
# PLY I/O (ASCII and binary little-endian, triangle faces only)

def load_mesh(path) -> NeuralMesh:
    path = Path(path)
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"ply"):
        raise MeshError(f"{path}: not a PLY file")
    end = data.find(b"end_header\n")
    if end < 0:
        raise MeshError(f"{path}: unterminated PLY header")
    header = data[:end].decode("ascii", "replace").splitlines()
    body = data[end + len(b"end_header\n"):]

    fmt = None
    elements = []   # (name, count, [(proptype, name) or ("list", counttype, itemtype, name)])
    for line in header[1:]:
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt = tok[1]
        elif tok[0] == "element":
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise MeshError(f"{path}: property before element")
            if tok[1] == "list":
                elements[-1][2].append(("list", tok[2], tok[3], tok[4]))
            else:
                elements[-1][2].append((tok[1], tok[2]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshError(f"{path}: unsupported PLY format {fmt!r}")

    if fmt == "ascii":
        verts, faces = _parse_ascii(body, elements, path)
    else:
        verts, faces = _parse_binary(body, elements, path)

    mesh = NeuralMesh(verts, faces)
    return mesh


_PLY_STRUCT = {"char": "b", "int8": "b", "uchar": "B", "uint8": "B",
               "short": "h", "int16": "h", "ushort": "H", "uint16": "H",
               "int": "i", "int32": "i", "uint": "I", "uint32": "I",
               "float": "f", "float32": "f", "double": "d", "float64": "d"}


def _vertex_columns(props):
    cols = {}
    for k, p in enumerate(props):
        if p[0] != "list":
            cols[p[1]] = k
    for axis in "xyz":
        if axis not in cols:
            raise MeshError(f"vertex element missing property {axis!r}")
    return cols


def _check_face(counts, path):
    if np.any(counts != 3):
        raise MeshError(f"{path}: non-triangle face (size {int(counts[counts != 3][0])})")


def _parse_ascii(body, elements, path):
    lines = body.decode("ascii").splitlines()
    pos = 0
    verts, faces = None, np.zeros((0, 3), dtype=np.int64)
    for name, count, props in elements:
        rows = lines[pos:pos + count]
        if len(rows) < count:
            raise MeshError(f"{path}: truncated element {name}")
        pos += count
        if name == "vertex":
            cols = _vertex_columns(props)
            arr = np.array([r.split() for r in rows], dtype=np.float64)
            verts = arr[:, [cols["x"], cols["y"], cols["z"]]]
        elif name == "face":
            parsed = [r.split() for r in rows]
            counts = np.array([int(r[0]) for r in parsed])
            if count:
                _check_face(counts, path)
                faces = np.array([[int(v) for v in r[1:4]] for r in parsed], dtype=np.int64)
    if verts is None:
        raise MeshError(f"{path}: no vertex element")
    return verts, faces


def _parse_binary(body, elements, path):
    off = 0
    verts, faces = None, np.zeros((0, 3), dtype=np.int64)
    for name, count, props in elements:
        has_list = any(p[0] == "list" for p in props)
        if not has_list:
            fmt = "<" + "".join(_PLY_STRUCT[p[0]] for p in props)
            size = struct.calcsize(fmt)
            raw = body[off:off + size * count]
            if len(raw) < size * count:
                raise MeshError(f"{path}: truncated element {name}")
            off += size * count
            if name == "vertex":
                cols = _vertex_columns(props)
                rows = np.array(list(struct.iter_unpack(fmt, raw)), dtype=np.float64)
                rows = rows.reshape(count, -1)
                verts = rows[:, [cols["x"], cols["y"], cols["z"]]]
        else:
            rows = []
            for _ in range(count):
                row = []
                for p in props:
                    if p[0] == "list":
                        cfmt, ifmt = _PLY_STRUCT[p[1]], _PLY_STRUCT[p[2]]
                        (n,) = struct.unpack_from("<" + cfmt, body, off)
                        off += struct.calcsize(cfmt)
                        items = struct.unpack_from("<" + str(n) + ifmt, body, off)
                        off += struct.calcsize(ifmt) * n
                        row.append(items)
                    else:
                        (v,) = struct.unpack_from("<" + _PLY_STRUCT[p[0]], body, off)
                        off += struct.calcsize(_PLY_STRUCT[p[0]])
                        row.append(v)
                rows.append(row)
            if name == "face" and count:
                lists = [r[0] for r in rows]
                counts = np.array([len(l) for l in lists])
                _check_face(counts, path)
                faces = np.array(lists, dtype=np.int64)
    if verts is None:
        raise MeshError(f"{path}: no vertex element")
    return verts, faces


def save_mesh(mesh: NeuralMesh, path):
    """Binary little-endian PLY; byte-deterministic for identical meshes."""
    path = Path(path)
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property float x\nproperty float y\nproperty float z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(mesh.positions.astype("<f4").tobytes())
        if mesh.n_faces:
            face_rec = np.empty(mesh.n_faces, dtype=[("n", "u1"), ("v", "<i4", 3)])
            face_rec["n"] = 3
            face_rec["v"] = mesh.faces
            fh.write(face_rec.tobytes())


# ---------------------------------------------------------------------------
# Feature / label sidecars: "NMF1" | u32 vertex_count | u32 dim | payload

def save_sidecar(path, data, dtype="<f4"):
    data = np.ascontiguousarray(data)
    if data.ndim == 1:
        data = data[:, None]
    with open(path, "wb") as fh:
        fh.write(SIDECAR_MAGIC)
        fh.write(struct.pack("<II", data.shape[0], data.shape[1]))
        fh.write(data.astype(dtype).tobytes())


def load_sidecar(path, dtype="<f4"):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SIDECAR_MAGIC:
            raise MeshError(f"{path}: bad sidecar magic {magic!r}")
        count, dim = struct.unpack("<II", fh.read(8))
        payload = fh.read()
    expected = count * dim * np.dtype(dtype).itemsize
    if len(payload) != expected:
        raise MeshError(f"{path}: sidecar payload size mismatch")
    return np.frombuffer(payload, dtype=dtype).reshape(count, dim)


def save_features(path, features):
    save_sidecar(path, features, "<f4")


def load_features(path):
    return load_sidecar(path, "<f4")


def save_labels(path, labels):
    save_sidecar(path, np.asarray(labels, dtype=np.uint32), "<u4")


def load_labels(path):
    return load_sidecar(path, "<u4")[:, 0]


def attach_features(mesh: NeuralMesh, path) -> NeuralMesh:
    return mesh.with_features(load_features(path))


def attach_labels(mesh: NeuralMesh, path) -> NeuralMesh:
    return mesh.with_labels(load_labels(path))
