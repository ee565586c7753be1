"""Image arrays, rectangles, resizing, padding and file IO.

Images are float32 numpy arrays laid out channels-first ``[C, H, W]`` with
values in ``[0, 1]``. Binary masks are boolean ``[H, W]`` arrays.
"""
from __future__ import annotations

import math
import os
from pathlib import Path
from typing import NamedTuple

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .errors import RetargetError


class Rect(NamedTuple):
    left: int
    top: int
    width: int
    height: int

    @property
    def right(self) -> int:
        return self.left + self.width

    @property
    def bottom(self) -> int:
        return self.top + self.height

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, other: "Rect") -> bool:
        return (self.left <= other.left and self.top <= other.top
                and other.right <= self.right and other.bottom <= self.bottom)

    def within(self, width: int, height: int) -> bool:
        return (self.left >= 0 and self.top >= 0 and self.width >= 1 and self.height >= 1
                and self.right <= width and self.bottom <= height)

    def shifted(self, dx: int, dy: int) -> "Rect":
        return Rect(self.left + dx, self.top + dy, self.width, self.height)

    def slices(self) -> tuple[slice, slice]:
        """(row slice, column slice) for indexing ``[..., H, W]`` arrays."""
        return slice(self.top, self.bottom), slice(self.left, self.right)


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def scaled_dim(dim: int, scale: float) -> int:
    return max(1, round_half_up(dim * scale))


def scale_rect(rect: Rect, sx: float, sy: float, width: int, height: int) -> Rect:
    """Scale a rectangle outward (floor start, ceil end), clipped to ``width x height``."""
    left = min(int(math.floor(rect.left * sx)), width - 1)
    top = min(int(math.floor(rect.top * sy)), height - 1)
    right = min(max(int(math.ceil(rect.right * sx)), left + 1), width)
    bottom = min(max(int(math.ceil(rect.bottom * sy)), top + 1), height)
    return Rect(left, top, right - left, bottom - top)


def mask_bbox(mask: np.ndarray) -> Rect | None:
    """Tight bounding box of the ``True`` pixels, or None for an empty mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.any(axis=0))
    return Rect(int(cols[0]), int(rows[0]), int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))


def resize_image(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a ``[C, H, W]`` image (antialiased when shrinking)."""
    if image.shape[1:] == (height, width):
        return image.copy()
    t = torch.from_numpy(np.ascontiguousarray(image, dtype=np.float32))[None]
    out = F.interpolate(t, size=(height, width), mode="bilinear", align_corners=False, antialias=True)
    return out[0].clamp_(0.0, 1.0).numpy()


def resize_mask(mask: np.ndarray, height: int, width: int) -> np.ndarray:
    """Nearest-neighbour resize of a boolean ``[H, W]`` mask."""
    if mask.shape == (height, width):
        return mask.copy()
    h, w = mask.shape
    rows = np.minimum((np.arange(height) + 0.5) * h / height, h - 1).astype(np.int64)
    cols = np.minimum((np.arange(width) + 0.5) * w / width, w - 1).astype(np.int64)
    return mask[rows[:, None], cols[None, :]]


def pad_to_canvas(image: np.ndarray, canvas: int) -> np.ndarray:
    """Zero-pad ``[C, H, W]`` to ``[C, canvas, canvas]`` with content anchored top-left."""
    c, h, w = image.shape
    if h > canvas or w > canvas:
        raise RetargetError(f"canvas overflow: image {h}x{w} does not fit canvas {canvas}")
    out = np.zeros((c, canvas, canvas), dtype=np.float32)
    out[:, :h, :w] = image
    return out


def crop_valid(padded: np.ndarray, valid: Rect) -> np.ndarray:
    """Copy the top-left anchored valid region out of a padded canvas."""
    _, h, w = padded.shape
    if valid.left != 0 or valid.top != 0:
        raise RetargetError(f"valid region must be anchored at (0, 0), got {tuple(valid)}")
    if not valid.within(w, h):
        raise RetargetError(f"valid region {tuple(valid)} exceeds canvas {h}x{w}")
    rows, cols = valid.slices()
    return padded[:, rows, cols].copy()


def load_image(path: str | os.PathLike) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def load_mask(path: str | os.PathLike, threshold: float = 0.5) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float32) / 255.0
    return arr > threshold


def to_uint8(image: np.ndarray) -> np.ndarray:
    """``[C, H, W]`` float in [0, 1] to ``[H, W, C]`` uint8."""
    if image.shape[0] == 1:
        image = np.repeat(image, 3, axis=0)
    return (np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8).transpose(1, 2, 0)


def save_image(image: np.ndarray, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(image)).save(path)
    return path


def save_mask(mask: np.ndarray, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray((mask.astype(np.uint8) * 255)).save(path)
    return path
