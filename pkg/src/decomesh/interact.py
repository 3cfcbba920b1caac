"""Click prompts to 2D masks, contours, and 3D seed / boundary vertices.

The mask generator is a feature-similarity flood fill over the rendered
feature map: a stand-in for a promptable mask decoder that keeps the
pipeline self-contained. Externally produced masks (PNG / RLE) can be fed
to build_seed directly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .raster import RasterBuffers, pixels_to_vertices


class InteractionError(ValueError):
    pass


@dataclass(frozen=True)
class Click:
    x: int
    y: int
    positive: bool = True


@dataclass
class ClickPrompt:
    clicks: list

    def __post_init__(self):
        if not any(c.positive for c in self.clicks):
            raise InteractionError("need at least one positive click")

    @property
    def positives(self):
        return [c for c in self.clicks if c.positive]

    @property
    def negatives(self):
        return [c for c in self.clicks if not c.positive]

    @classmethod
    def from_dicts(cls, items):
        return cls([Click(int(c["x"]), int(c["y"]), bool(c.get("positive", True)))
                    for c in items])


@dataclass
class SegmentationSeed:
    mask: np.ndarray          # (h, w) bool
    contour: set              # {(x, y)}
    seeds: set                # vertex indices from mask interior
    boundary: set             # vertex indices from contour
    view_id: str = ""


def _cosine_map(feature_map, proto):
    norms = np.linalg.norm(feature_map, axis=-1)
    pn = np.linalg.norm(proto)
    denom = norms * pn
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = (feature_map @ proto) / np.where(denom > 0, denom, 1.0)
    cos[denom == 0] = -1.0
    return cos


def _flood(passes, start_pixels):
    """4-connected flood over a boolean admission grid from the given pixels."""
    h, w = passes.shape
    out = np.zeros_like(passes)
    queue = deque()
    for x, y in start_pixels:
        if passes[y, x] and not out[y, x]:
            out[y, x] = True
            queue.append((x, y))
    while queue:
        x, y = queue.popleft()
        for nx, ny in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
            if 0 <= nx < w and 0 <= ny < h and passes[ny, nx] and not out[ny, nx]:
                out[ny, nx] = True
                queue.append((nx, ny))
    return out


def click_to_mask(buffers: RasterBuffers, prompt: ClickPrompt, tau_2d=0.85):
    """Feature flood fill from positive clicks, carved by negative clicks."""
    hit = buffers.hit
    h, w = hit.shape
    fmap = buffers.feature.astype(np.float64)
    for c in prompt.clicks:
        if not (0 <= c.x < w and 0 <= c.y < h):
            raise InteractionError(f"click ({c.x}, {c.y}) out of bounds")
    for c in prompt.positives:
        if not hit[c.y, c.x]:
            raise InteractionError(f"click ({c.x}, {c.y}) misses geometry")

    pos_feats = np.stack([fmap[c.y, c.x] for c in prompt.positives])
    proto = pos_feats.mean(axis=0)
    pn = np.linalg.norm(proto)
    if pn > 0:
        proto = proto / pn
    passes = hit & (_cosine_map(fmap, proto) > tau_2d)
    for c in prompt.positives:   # click pixels are always admissible
        passes[c.y, c.x] = True
    mask = _flood(passes, [(c.x, c.y) for c in prompt.positives])

    for c in prompt.negatives:
        if not hit[c.y, c.x]:
            continue
        neg_proto = fmap[c.y, c.x]
        neg_passes = mask & (_cosine_map(fmap, neg_proto) > tau_2d)
        neg_passes[c.y, c.x] = True
        carve = _flood(neg_passes, [(c.x, c.y)])
        mask &= ~carve
    for c in prompt.positives:
        mask[c.y, c.x] = True
    return mask


def mask_contour(mask):
    """Mask pixels with a non-mask pixel among their 8 neighbors (border counts)."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise InteractionError("empty mask")
    padded = np.pad(mask, 1, constant_values=False)
    interior = np.ones_like(mask)
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx == 0 and dy == 0:
                continue
            interior &= padded[1 + dy:1 + dy + mask.shape[0],
                               1 + dx:1 + dx + mask.shape[1]]
    edge = mask & ~interior
    ys, xs = np.nonzero(edge)
    return {(int(x), int(y)) for x, y in zip(xs, ys)}


def build_seed(buffers: RasterBuffers, mask, view_id="") -> SegmentationSeed:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != buffers.depth.shape:
        raise InteractionError("mask shape does not match buffers")
    contour = mask_contour(mask)
    ys, xs = np.nonzero(mask)
    seeds = pixels_to_vertices(buffers, zip(xs.tolist(), ys.tolist()))
    if not seeds:
        raise InteractionError("mask maps to no vertices (empty seed)")
    boundary = pixels_to_vertices(buffers, contour)
    seeds -= boundary   # overlap resolves in favor of the boundary fence
    return SegmentationSeed(mask=mask, contour=contour, seeds=seeds,
                            boundary=boundary, view_id=view_id)


# ---------------------------------------------------------------------------
# RLE mask interchange: {width, height, runs: [start, len, ...]} row-major

def mask_to_rle(mask):
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    flat = mask.reshape(-1)
    runs = []
    diff = np.diff(flat.astype(np.int8))
    starts = np.nonzero(diff == 1)[0] + 1
    ends = np.nonzero(diff == -1)[0] + 1
    if flat[0]:
        starts = np.concatenate([[0], starts])
    if flat[-1]:
        ends = np.concatenate([ends, [flat.size]])
    for s, e in zip(starts, ends):
        runs.extend([int(s), int(e - s)])
    return {"width": w, "height": h, "runs": runs}


def rle_to_mask(rle):
    w, h = int(rle["width"]), int(rle["height"])
    flat = np.zeros(w * h, dtype=bool)
    runs = rle["runs"]
    for i in range(0, len(runs), 2):
        s, n = runs[i], runs[i + 1]
        flat[s:s + n] = True
    return flat.reshape(h, w)
