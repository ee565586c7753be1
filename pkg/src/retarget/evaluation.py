"""Full-reference metrics, pluggable no-reference scoring and comparison grids."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from PIL import Image, ImageDraw, ImageFont
from scipy import ndimage

from .errors import EvaluationError
from .imaging import to_uint8

PSNR_CAP = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1, SSIM_K2 = 0.01, 0.03


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB for data range 1; ``inf`` for identical images."""
    mse = float(np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(ax ** 2) / (2 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()


def _filter_valid(x: np.ndarray, win: np.ndarray) -> np.ndarray:
    out = ndimage.correlate(x, win, mode="constant")
    r = win.shape[0] // 2
    return out[r:x.shape[0] - r, r:x.shape[1] - r]


def ssim(a: np.ndarray, b: np.ndarray, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> float:
    """Mean SSIM over channels and all fully-covered window positions."""
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    if a.ndim == 2:
        a, b = a[None], b[None]
    size = min(window, a.shape[1], a.shape[2])
    size -= 1 - size % 2
    win = gaussian_window(size, sigma)
    c1, c2 = SSIM_K1 ** 2, SSIM_K2 ** 2
    vals = []
    for x, y in zip(a, b):
        mx, my = _filter_valid(x, win), _filter_valid(y, win)
        sxx = _filter_valid(x * x, win) - mx * mx
        syy = _filter_valid(y * y, win) - my * my
        sxy = _filter_valid(x * y, win) - mx * my
        s = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx ** 2 + my ** 2 + c1) * (sxx + syy + c2))
        vals.append(s.mean())
    return float(np.mean(vals))


def full_reference(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    if a.shape != b.shape:
        raise EvaluationError(f"shape mismatch: {a.shape} vs {b.shape}")
    return psnr(a, b), ssim(a, b)


def log_psnr(value: float) -> float:
    return min(value, PSNR_CAP)


# -- no-reference scoring -----------------------------------------------------

@dataclass(frozen=True)
class NRScore:
    score: float
    scorer_id: str
    version: str


@dataclass(frozen=True)
class Scorer:
    fn: Callable[[np.ndarray], float]
    version: str


def _gray(image: np.ndarray) -> np.ndarray:
    if image.shape[0] == 1:
        return image[0].astype(np.float64)
    return (0.299 * image[0] + 0.587 * image[1] + 0.114 * image[2]).astype(np.float64)


def sharpness(image: np.ndarray) -> float:
    """Variance of the Laplacian of the luminance."""
    return float(ndimage.laplace(_gray(image), mode="nearest").var())


SCORERS: dict[str, Scorer] = {"sharpness": Scorer(sharpness, "1")}


def register_scorer(name: str, fn: Callable[[np.ndarray], float], version: str) -> None:
    """Plug in an external IQA model; ``fn`` maps ``[3, H, W]`` to a score
    where higher means better quality."""
    SCORERS[name] = Scorer(fn, version)


def score_no_reference(image: np.ndarray, scorer: str = "sharpness") -> NRScore:
    if scorer not in SCORERS:
        raise EvaluationError(f"unregistered scorer {scorer!r}; available: {sorted(SCORERS)}")
    if image.ndim != 3 or image.shape[0] != 3:
        raise EvaluationError(f"expected a 3-channel image, got shape {image.shape}")
    s = SCORERS[scorer]
    return NRScore(float(s.fn(image)), scorer, s.version)


# -- comparison grid --------------------------------------------------------------

BACKGROUND = (128, 128, 128)
MARGIN = 8
LABEL_H = 28


@dataclass
class GridLayout:
    size: tuple[int, int]              # (width, height) of the sheet
    panels: list[tuple[int, int, int, int]]  # (left, top, width, height) per entry


def layout_grid(shapes: Sequence[tuple[int, int]]) -> GridLayout:
    """One column per image, top-aligned, images shown at native size."""
    x, panels = MARGIN, []
    max_h = max(h for h, _ in shapes)
    for h, w in shapes:
        panels.append((x, MARGIN, w, h))
        x += w + MARGIN
    return GridLayout((x, MARGIN + max_h + LABEL_H + MARGIN), panels)


def comparison_grid(entries: Sequence[tuple[str, np.ndarray]], out_path: str | os.PathLike,
                    scores: Optional[Sequence[Optional[float]]] = None) -> GridLayout:
    if not entries:
        raise EvaluationError("comparison grid needs at least one entry")
    layout = layout_grid([img.shape[1:] for _, img in entries])
    sheet = Image.new("RGB", layout.size, BACKGROUND)
    draw = ImageDraw.Draw(sheet)
    font = ImageFont.load_default()
    for i, ((label, img), (left, top, w, h)) in enumerate(zip(entries, layout.panels)):
        sheet.paste(Image.fromarray(to_uint8(img)), (left, top))
        text = label
        if scores is not None and scores[i] is not None:
            text += f" ({scores[i]:.3g})"
        draw.text((left, top + h + 4), text, fill=(255, 255, 255), font=font)
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        sheet.save(out_path, format="PNG")
    except OSError as exc:
        raise EvaluationError(f"cannot write {out_path}: {exc}") from exc
    return layout
