"""Procedural toy dataset in the "files" layout.

Each image is a dark textured background with one bright elliptical object,
which keeps desk-scale experiments and tests free of downloads.
"""
from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .imaging import Rect, mask_bbox, save_image, save_mask


def toy_image(rng: np.random.Generator, height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float32)
    base = rng.uniform(0.1, 0.3, size=3).astype(np.float32)
    freq = rng.uniform(0.05, 0.2, size=2)
    stripes = 0.1 * np.sin(freq[0] * xx + freq[1] * yy)
    ramp = 0.15 * yy / max(height - 1, 1)
    image = base[:, None, None] + stripes[None] + ramp[None]

    ry = rng.uniform(0.15, 0.3) * height
    rx = rng.uniform(0.15, 0.3) * width
    cy = rng.uniform(ry + 1, height - ry - 1)
    cx = rng.uniform(rx + 1, width - rx - 1)
    seg = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
    colour = rng.uniform(0.8, 1.0, size=3).astype(np.float32)
    shade = 1.0 - 0.15 * (((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2)
    image = np.where(seg[None], colour[:, None, None] * shade[None], image)
    return np.clip(image, 0.0, 1.0).astype(np.float32), seg


def make_toy_dataset(root: str | os.PathLike, n: int = 8, size: tuple[int, int] = (96, 128),
                     seed: int = 0, empty: int = 0) -> Path:
    """Write ``n`` images plus annotations under ``root``; the last ``empty``
    images get an all-background segmentation."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    lines = []
    for i in range(n):
        h, w = size
        image, seg = toy_image(rng, h, w)
        stem = f"toy_{i:04d}"
        if i >= n - empty:
            seg = np.zeros_like(seg)
            box = Rect(0, 0, w, h)
        else:
            box = mask_bbox(seg)
        save_image(image, root / "images" / f"{stem}.png")
        save_mask(seg, root / "segmentations" / f"{stem}.png")
        lines.append(f"{stem} {box.left} {box.top} {box.width} {box.height}\n")
    (root / "bounding_boxes.txt").write_text("".join(lines))
    return root
