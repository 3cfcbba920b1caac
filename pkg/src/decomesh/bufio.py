"""Flat binary image buffers and PNG export shared by renderers.

Layout: u32 width, u32 height, u32 channels (little-endian), then
float32 row-major data.
"""

from __future__ import annotations

import struct

import numpy as np
from PIL import Image


def save_buffer(path, array):
    a = np.asarray(array, dtype=np.float32)
    if a.ndim == 2:
        a = a[:, :, None]
    h, w, c = a.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<III", w, h, c))
        fh.write(np.ascontiguousarray(a).tobytes())


def load_buffer(path):
    with open(path, "rb") as fh:
        w, h, c = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != w * h * c:
        raise ValueError(f"{path}: buffer payload size mismatch")
    a = data.reshape(h, w, c)
    return a[:, :, 0] if c == 1 else a


def save_png(path, rgb, alpha=None):
    """8-bit RGBA PNG from float [0,1] channels."""
    rgb = np.clip(np.asarray(rgb, dtype=np.float64), 0.0, 1.0)
    if rgb.ndim == 2:
        rgb = np.repeat(rgb[:, :, None], 3, axis=2)
    h, w = rgb.shape[:2]
    if alpha is None:
        alpha = np.ones((h, w))
    rgba = np.dstack([rgb, np.clip(alpha, 0, 1)])
    Image.fromarray((rgba * 255.0 + 0.5).astype(np.uint8), "RGBA").save(path, format="PNG")


def save_mask_png(path, mask):
    Image.fromarray(np.where(np.asarray(mask, dtype=bool), 255, 0).astype(np.uint8), "L").save(path, format="PNG")


def load_mask_png(path):
    return np.asarray(Image.open(path).convert("L")) >= 128
