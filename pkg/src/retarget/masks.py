"""Conditioning masks: the segmented object composited on a white canvas of
the requested output size, zero-padded to the training canvas."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MaskError
from .imaging import Rect, mask_bbox, resize_image, resize_mask

WHITE = 1.0


@dataclass(frozen=True)
class RetargetSpec:
    target_w: int
    target_h: int
    object_rect: Rect

    def validate(self, canvas: int) -> None:
        if not (1 <= self.target_w <= canvas and 1 <= self.target_h <= canvas):
            raise MaskError(
                f"target {self.target_w}x{self.target_h} outside [1, {canvas}]")
        if not Rect(*self.object_rect).within(self.target_w, self.target_h):
            raise MaskError(
                f"object_rect {tuple(self.object_rect)} outside target canvas "
                f"{self.target_w}x{self.target_h}")


@dataclass
class ExtractedObject:
    rgb: np.ndarray      # [3, h, w] crop of the tight box, zero where alpha is False
    alpha: np.ndarray    # [h, w] bool
    bbox: Rect           # tight box in source coordinates


@dataclass
class MaskImage:
    data: np.ndarray     # [3, canvas, canvas]
    valid: Rect
    object_alpha: np.ndarray  # [canvas, canvas] bool, where object pixels were composited


def extract_object(image: np.ndarray, seg: np.ndarray) -> ExtractedObject:
    if seg.shape != image.shape[1:]:
        raise MaskError(f"segmentation {seg.shape} not aligned with image {image.shape[1:]}")
    seg = seg.astype(bool)
    bbox = mask_bbox(seg)
    if bbox is None:
        raise MaskError("empty segmentation")
    rows, cols = bbox.slices()
    alpha = seg[rows, cols].copy()
    rgb = image[:, rows, cols] * alpha[None]
    return ExtractedObject(rgb.astype(np.float32), alpha, bbox)


def build_target_mask(obj: ExtractedObject, spec: RetargetSpec, canvas: int) -> MaskImage:
    """White ``target_h x target_w`` canvas with the object stretched into
    ``spec.object_rect`` (hard alpha), zero-padded to ``canvas x canvas``."""
    spec.validate(canvas)
    rect = Rect(*spec.object_rect)
    rgb = resize_image(obj.rgb, rect.height, rect.width)
    alpha = resize_mask(obj.alpha, rect.height, rect.width)

    data = np.zeros((3, canvas, canvas), dtype=np.float32)
    data[:, :spec.target_h, :spec.target_w] = WHITE
    rows, cols = rect.slices()
    region = data[:, rows, cols]
    region[:, alpha] = rgb[:, alpha]

    placed = np.zeros((canvas, canvas), dtype=bool)
    placed[rows, cols] = alpha
    return MaskImage(data, Rect(0, 0, spec.target_w, spec.target_h), placed)


def assemble_model_input(input_img: np.ndarray, mask: MaskImage | np.ndarray) -> np.ndarray:
    """Stack the padded image (channels 0-2) and mask (channels 3-5)."""
    mask_data = mask.data if isinstance(mask, MaskImage) else mask
    if input_img.shape != mask_data.shape or input_img.shape[0] != 3:
        raise MaskError(
            f"size mismatch: image {input_img.shape} vs mask {mask_data.shape}")
    return np.concatenate([input_img, mask_data], axis=0).astype(np.float32, copy=False)


def jitter_rect(rect: Rect, width: int, height: int, max_shift: int, rng: np.random.Generator) -> Rect:
    """Translate ``rect`` by up to ``max_shift`` px per axis, kept inside ``width x height``."""
    dx = int(rng.integers(-max_shift, max_shift + 1)) if max_shift > 0 else 0
    dy = int(rng.integers(-max_shift, max_shift + 1)) if max_shift > 0 else 0
    left = min(max(rect.left + dx, 0), width - rect.width)
    top = min(max(rect.top + dy, 0), height - rect.height)
    return Rect(left, top, rect.width, rect.height)
