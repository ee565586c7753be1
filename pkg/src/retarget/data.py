"""Dataset indexing and supervised pair synthesis.

Originals are the ground truth; inputs are produced by resizing and cropping
the original while keeping the annotated object inside the crop.

"files" provider layout::

    root/
      images/**/<stem>.jpg|png
      bounding_boxes.txt        # "<id> <left> <top> <width> <height>"
      images.txt                # optional "<id> <relative image path>" (CUB)
      segmentations/**/<stem>.png

Without ``images.txt`` the id in ``bounding_boxes.txt`` is the image stem.
"""
from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import DatasetError, RetargetError
from .imaging import (Rect, load_image, load_mask, mask_bbox, pad_to_canvas, resize_image,
                      resize_mask, scale_rect, scaled_dim)
from .masks import RetargetSpec, assemble_model_input, build_target_mask, extract_object, jitter_rect

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png")
SCALE_RANGE = (0.5, 1.0)
MIN_CROP_AREA = 0.6
MAX_CROP_TRIES = 1000


@dataclass
class ObjectAnnotation:
    bbox: Rect
    seg: np.ndarray  # [H, W] bool

    @classmethod
    def clipped(cls, bbox: Rect, seg: np.ndarray) -> "ObjectAnnotation":
        """Clip ``bbox`` to the image and ``seg`` to ``bbox``."""
        h, w = seg.shape
        left, top = max(0, bbox.left), max(0, bbox.top)
        right, bottom = min(w, bbox.right), min(h, bbox.bottom)
        if right <= left or bottom <= top:
            raise DatasetError(f"bounding box {tuple(bbox)} lies outside the {w}x{h} image")
        box = Rect(left, top, right - left, bottom - top)
        inside = np.zeros_like(seg, dtype=bool)
        rows, cols = box.slices()
        inside[rows, cols] = True
        return cls(box, seg.astype(bool) & inside)

    @property
    def empty(self) -> bool:
        return not self.seg.any()


@dataclass(frozen=True)
class AugParams:
    scale_x: float
    scale_y: float
    crop_window: Rect
    rng_seed: int
    mask_rect: Optional[Rect] = None  # jittered placement; None keeps the tight bbox


@dataclass
class PairedSample:
    model_input: np.ndarray   # [6, canvas, canvas]
    ground_truth: np.ndarray  # [3, canvas, canvas]
    input_valid: Rect
    gt_valid: Rect
    sample_id: str = ""


@dataclass(frozen=True)
class IndexEntry:
    sample_id: str
    image_path: Path
    bbox: Optional[Rect] = None
    seg_path: Optional[Path] = None
    annotation: Optional[ObjectAnnotation] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DatasetIndex:
    samples: tuple[IndexEntry, ...]
    canvas_size: int = 512
    provider: str = "files"
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.samples)

    def load(self, i: int) -> tuple[np.ndarray, ObjectAnnotation]:
        """Image and annotation for entry ``i``, pre-scaled to fit the canvas."""
        entry = self.samples[i]
        image = load_image(entry.image_path)
        if entry.annotation is not None:
            ann = entry.annotation
        else:
            ann = ObjectAnnotation.clipped(entry.bbox, load_mask(entry.seg_path))
        return fit_to_canvas(image, ann, self.canvas_size)


# -- annotation providers ---------------------------------------------------

AnnotationPlugin = Callable[[np.ndarray], Optional[ObjectAnnotation]]
_MODEL_PLUGINS: dict[str, AnnotationPlugin] = {}


def register_model_provider(name: str, plugin: AnnotationPlugin) -> None:
    """Register an external detector/segmenter. ``plugin(image)`` returns an
    ObjectAnnotation for the most salient object, or None."""
    _MODEL_PLUGINS[name] = plugin


def get_model_provider(name: str = "model") -> AnnotationPlugin:
    try:
        return _MODEL_PLUGINS[name]
    except KeyError:
        raise DatasetError(
            f"no annotation plug-in registered under {name!r}; "
            f"available: {sorted(_MODEL_PLUGINS) or 'none'}") from None


def _read_id_table(path: Path) -> dict[str, list[str]]:
    table = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) < 2:
            raise DatasetError(f"{path}:{lineno}: malformed line {line!r}")
        table[parts[0]] = parts[1:]
    return table


def _list_images(folder: Path) -> list[Path]:
    return sorted(p for p in folder.rglob("*") if p.suffix.lower() in IMAGE_SUFFIXES and p.is_file())


def _load_files_index(root: Path) -> tuple[list[IndexEntry], int]:
    images_dir = root / "images"
    if not images_dir.is_dir():
        raise DatasetError(f"{images_dir} is not a directory")
    box_file = root / "bounding_boxes.txt"
    if not box_file.is_file():
        raise DatasetError(f"missing {box_file}")
    boxes = _read_id_table(box_file)
    segs = {p.stem: p for p in (root / "segmentations").rglob("*.png")}

    if (root / "images.txt").is_file():
        ids = {rel[0]: key for key, rel in _read_id_table(root / "images.txt").items()}
        images = [(ids.get(str(p.relative_to(images_dir)), p.stem), p) for p in _list_images(images_dir)]
    else:
        images = [(p.stem, p) for p in _list_images(images_dir)]

    entries, skipped = [], 0
    for sample_id, path in images:
        seg_path = segs.get(path.stem)
        if sample_id not in boxes or seg_path is None:
            log.debug("skipping %s: missing annotation", path)
            skipped += 1
            continue
        left, top, w, h = (int(round(float(v))) for v in boxes[sample_id][:4])
        try:
            seg = load_mask(seg_path)
            ann = ObjectAnnotation.clipped(Rect(left, top, w, h), seg)
        except (OSError, DatasetError) as exc:
            log.debug("skipping %s: %s", path, exc)
            skipped += 1
            continue
        if ann.empty:
            log.debug("skipping %s: empty segmentation", path)
            skipped += 1
            continue
        entries.append(IndexEntry(sample_id, path, ann.bbox, seg_path))
    return entries, skipped


def _load_model_index(root: Path, plugin: AnnotationPlugin) -> tuple[list[IndexEntry], int]:
    folder = root / "images" if (root / "images").is_dir() else root
    entries, skipped = [], 0
    for path in _list_images(folder):
        ann = plugin(load_image(path))
        if ann is None or ann.empty:
            skipped += 1
            continue
        ann = ObjectAnnotation.clipped(ann.bbox, ann.seg)
        entries.append(IndexEntry(path.stem, path, ann.bbox, None, ann))
    return entries, skipped


def load_dataset(root_path: str | os.PathLike, provider: str = "files", canvas: int = 512) -> DatasetIndex:
    root = Path(root_path)
    if not root.is_dir() or not os.access(root, os.R_OK):
        raise DatasetError(f"dataset root {root} is not a readable directory")
    if provider == "files":
        entries, skipped = _load_files_index(root)
    elif provider == "model" or provider in _MODEL_PLUGINS:
        entries, skipped = _load_model_index(root, get_model_provider(provider))
    else:
        raise DatasetError(f"unknown annotation provider {provider!r}")
    if not entries:
        raise DatasetError(f"no usable samples under {root} ({skipped} skipped)")
    log.info("indexed %d samples under %s (%d skipped)", len(entries), root, skipped)
    return DatasetIndex(tuple(entries), canvas, provider, skipped)


# -- augmentation -------------------------------------------------------------

def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    digest = hashlib.blake2b("/".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def fit_to_canvas(image: np.ndarray, ann: ObjectAnnotation, canvas: int) -> tuple[np.ndarray, ObjectAnnotation]:
    """Aspect-preserving downscale so that max(H, W) <= canvas."""
    _, h, w = image.shape
    if max(h, w) <= canvas:
        return image, ann
    scale = canvas / max(h, w)
    nh, nw = min(canvas, scaled_dim(h, scale)), min(canvas, scaled_dim(w, scale))
    seg = resize_mask(ann.seg, nh, nw)
    bbox = scale_rect(ann.bbox, nw / w, nh / h, nw, nh)
    scaled = ObjectAnnotation.clipped(bbox, seg)
    if scaled.empty:
        raise DatasetError("segmentation vanished when scaling to the canvas")
    return resize_image(image, nh, nw), scaled


def sample_aug_params(seed: int, image_dims: tuple[int, int], bbox: Rect,
                      scale_range: tuple[float, float] = SCALE_RANGE,
                      min_crop_area: float = MIN_CROP_AREA,
                      shift_prob: float = 0.0, max_shift: float = 0.1,
                      canvas: int = 512, seg_bbox: Optional[Rect] = None) -> AugParams:
    """Draw a resize+crop whose crop window keeps the scaled ``bbox``.

    Crop windows are uniform over all integer windows containing the scaled
    box with area >= ``min_crop_area`` of the resized image (rejection
    sampling; falls back to the full image). With probability ``shift_prob``
    the mask placement of ``seg_bbox`` is jittered by up to ``max_shift``
    of the canvas per axis.
    """
    h, w = image_dims
    if not bbox.within(w, h):
        raise DatasetError(f"bbox {tuple(bbox)} outside image {w}x{h}")
    rng = np.random.default_rng(seed)
    sx = float(rng.uniform(*scale_range))
    sy = float(rng.uniform(*scale_range))
    rw, rh = scaled_dim(w, sx), scaled_dim(h, sy)
    box = scale_rect(bbox, rw / w, rh / h, rw, rh)

    window = Rect(0, 0, rw, rh)
    for _ in range(MAX_CROP_TRIES):
        x0 = int(rng.integers(0, box.left + 1))
        x1 = int(rng.integers(box.right, rw + 1))
        y0 = int(rng.integers(0, box.top + 1))
        y1 = int(rng.integers(box.bottom, rh + 1))
        if (x1 - x0) * (y1 - y0) >= min_crop_area * rw * rh:
            window = Rect(x0, y0, x1 - x0, y1 - y0)
            break

    mask_rect = None
    if shift_prob > 0 and rng.uniform() < shift_prob:
        mask_rect = jitter_rect(seg_bbox or bbox, w, h, int(max_shift * canvas), rng)
    return AugParams(sx, sy, window, seed, mask_rect)


def identity_params(image_dims: tuple[int, int], seed: int = 0) -> AugParams:
    h, w = image_dims
    return AugParams(1.0, 1.0, Rect(0, 0, w, h), seed)


def augment_image(original: np.ndarray, params: AugParams) -> np.ndarray:
    _, h, w = original.shape
    resized = resize_image(original, scaled_dim(h, params.scale_y), scaled_dim(w, params.scale_x))
    _, rh, rw = resized.shape
    if not params.crop_window.within(rw, rh):
        raise DatasetError(f"crop window {tuple(params.crop_window)} outside resized {rw}x{rh}")
    rows, cols = params.crop_window.slices()
    return resized[:, rows, cols]


def synthesize_pair(original: np.ndarray, ann: ObjectAnnotation, params: AugParams,
                    canvas: int = 512, sample_id: str = "") -> PairedSample:
    if original.ndim != 3 or original.shape[0] != 3:
        raise DatasetError(f"expected a 3-channel image, got shape {original.shape}")
    _, h, w = original.shape
    if h > canvas or w > canvas:
        raise DatasetError(f"canvas overflow: {w}x{h} image on a {canvas} canvas")
    try:
        obj = extract_object(original, ann.seg)
    except RetargetError as exc:
        raise DatasetError(str(exc)) from exc

    distorted = augment_image(original, params)
    placement = params.mask_rect if params.mask_rect is not None else obj.bbox
    mask = build_target_mask(obj, RetargetSpec(w, h, placement), canvas)
    model_input = assemble_model_input(pad_to_canvas(distorted, canvas), mask)
    return PairedSample(
        model_input=model_input,
        ground_truth=pad_to_canvas(original, canvas),
        input_valid=Rect(0, 0, distorted.shape[2], distorted.shape[1]),
        gt_valid=Rect(0, 0, w, h),
        sample_id=sample_id,
    )


def sample_pair(index: DatasetIndex, i: int, seed: int, epoch: int = 0,
                shift_prob: float = 0.5) -> PairedSample:
    """Fresh pair for entry ``i`` seeded by ``(seed, epoch, sample_id)``."""
    image, ann = index.load(i)
    entry = index.samples[i]
    tight = mask_bbox(ann.seg)
    params = sample_aug_params(derive_seed(seed, epoch, entry.sample_id), image.shape[1:], ann.bbox,
                               shift_prob=shift_prob, canvas=index.canvas_size, seg_bbox=tight)
    return synthesize_pair(image, ann, params, index.canvas_size, entry.sample_id)
