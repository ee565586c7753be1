"""Retarget an image to a requested size and object placement with a trained generator."""
from __future__ import annotations

import os
from typing import Callable, Optional, Union

import numpy as np
import torch

from .data import ObjectAnnotation, fit_to_canvas
from .errors import InferenceError, RetargetError
from .generator import Generator, generator_forward
from .imaging import Rect, crop_valid, load_mask, mask_bbox, pad_to_canvas, scale_rect
from .masks import RetargetSpec, assemble_model_input, build_target_mask, extract_object
from .train import TrainState, load_checkpoint

__all__ = ["retarget", "crop_valid", "proportional_spec", "annotation_from_bbox", "annotation_from_mask_file"]

Annotator = Callable[[np.ndarray], Optional[ObjectAnnotation]]


def annotation_from_bbox(image: np.ndarray, bbox: Rect) -> ObjectAnnotation:
    """Treat the whole box as the object (manual override without a segmenter)."""
    _, h, w = image.shape
    seg = np.zeros((h, w), dtype=bool)
    rows, cols = bbox.slices()
    seg[rows, cols] = True
    return ObjectAnnotation.clipped(bbox, seg)


def annotation_from_mask_file(image: np.ndarray, path: str | os.PathLike) -> ObjectAnnotation:
    seg = load_mask(path)
    if seg.shape != image.shape[1:]:
        raise InferenceError(f"mask {path} is {seg.shape}, image is {image.shape[1:]}")
    box = mask_bbox(seg)
    if box is None:
        raise InferenceError(f"mask {path} has no foreground pixels")
    return ObjectAnnotation(box, seg)


def proportional_spec(ann: ObjectAnnotation, image_hw: tuple[int, int], target_w: int, target_h: int) -> RetargetSpec:
    """Place the object's tight box scaled by the target/source size ratios."""
    h, w = image_hw
    tight = mask_bbox(ann.seg)
    rect = scale_rect(tight, target_w / w, target_h / h, target_w, target_h)
    return RetargetSpec(target_w, target_h, rect)


def _resolve(ckpt: Union[str, os.PathLike, TrainState, Generator]) -> tuple[Generator, Optional[int]]:
    """(generator, training canvas or None)."""
    if isinstance(ckpt, Generator):
        return ckpt, None
    state = ckpt if isinstance(ckpt, TrainState) else load_checkpoint(ckpt)
    return state.generator, state.config.canvas


def _annotate(image, ann_provider) -> ObjectAnnotation:
    ann = ann_provider(image) if callable(ann_provider) else ann_provider
    if ann is None or ann.empty:
        raise InferenceError("no object found; pass --bbox or --mask-file to annotate manually")
    return ann


def retarget(image: np.ndarray, spec: RetargetSpec | None, ckpt, ann_provider: Annotator | ObjectAnnotation,
             canvas: int | None = None, target_size: tuple[int, int] | None = None,
             return_mask: bool = False):
    """Run annotate -> extract -> mask -> pad -> generator -> crop.

    ``spec=None`` with ``target_size=(w, h)`` uses proportional placement.
    Returns ``[3, target_h, target_w]`` (and the MaskImage if requested).
    """
    model, trained_canvas = _resolve(ckpt)
    canvas = canvas or trained_canvas or 512
    ann = _annotate(image, ann_provider)
    try:
        image, ann = fit_to_canvas(image, ann, canvas)
        if spec is None:
            if target_size is None:
                raise InferenceError("either a RetargetSpec or a target size is required")
            spec = proportional_spec(ann, image.shape[1:], *target_size)
        if spec.target_w > canvas or spec.target_h > canvas:
            raise InferenceError(
                f"target {spec.target_w}x{spec.target_h} exceeds the {canvas}px training canvas")
        obj = extract_object(image, ann.seg)
        mask = build_target_mask(obj, spec, canvas)
        x6 = assemble_model_input(pad_to_canvas(image, canvas), mask)
    except InferenceError:
        raise
    except RetargetError as exc:
        raise InferenceError(str(exc)) from exc

    model.eval()
    with torch.no_grad():
        out = generator_forward(torch.from_numpy(x6), model).numpy()
    result = crop_valid(out, mask.valid)
    return (result, mask) if return_mask else result

