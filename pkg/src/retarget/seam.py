"""Seam carving baseline: backward (gradient-magnitude) energy, dynamic
programming for the minimal vertical seam, iterative removal and
original-image seam duplication for enlargement."""
from __future__ import annotations

import numpy as np

from .errors import SeamError


def energy_map(image: np.ndarray) -> np.ndarray:
    """``|dI/dx| + |dI/dy|`` summed over channels (central differences
    inside, one-sided at the borders)."""
    if image.ndim == 2:
        image = image[None]
    _, h, w = image.shape
    if h < 2 or w < 2:
        raise SeamError(f"energy needs at least 2x2 pixels, got {h}x{w}")
    img = image.astype(np.float64)
    dy, dx = np.gradient(img, axis=(1, 2))
    return (np.abs(dx) + np.abs(dy)).sum(axis=0)


def cumulative_energy(energy: np.ndarray) -> np.ndarray:
    """M(y, x) = e(y, x) + min(M(y-1, x-1), M(y-1, x), M(y-1, x+1))."""
    h, w = energy.shape
    m = energy.astype(np.float64).copy()
    for y in range(1, h):
        prev = m[y - 1]
        left = np.concatenate(([np.inf], prev[:-1]))
        right = np.concatenate((prev[1:], [np.inf]))
        m[y] += np.minimum(np.minimum(left, prev), right)
    return m


def min_seam(energy: np.ndarray) -> np.ndarray:
    """Column index per row of the minimal connected vertical seam.

    Ties go to the smallest column at every backtracking step.
    """
    h, w = energy.shape
    if w < 2:
        raise SeamError("seam search needs width >= 2")
    m = cumulative_energy(energy)
    seam = np.empty(h, dtype=np.int64)
    seam[-1] = int(np.argmin(m[-1]))
    for y in range(h - 2, -1, -1):
        x = seam[y + 1]
        lo = max(x - 1, 0)
        seam[y] = lo + int(np.argmin(m[y, lo:min(x + 2, w)]))
    return seam


def seam_cost(energy: np.ndarray, seam: np.ndarray) -> float:
    return float(energy[np.arange(len(seam)), seam].sum())


def remove_seam(image: np.ndarray, seam: np.ndarray) -> np.ndarray:
    c, h, w = image.shape
    keep = np.ones((h, w), dtype=bool)
    keep[np.arange(h), seam] = False
    return image[:, keep].reshape(c, h, w - 1)


def remove_seams(image: np.ndarray, k: int) -> tuple[np.ndarray, list[float]]:
    """Remove ``k`` vertical seams, recomputing energy each time.

    Returns the narrowed image and the energy of each removed seam.
    """
    costs = []
    for _ in range(k):
        e = energy_map(image)
        seam = min_seam(e)
        costs.append(seam_cost(e, seam))
        image = remove_seam(image, seam)
    return image, costs


def _original_seams(image: np.ndarray, k: int) -> list[np.ndarray]:
    """The first ``k`` removal seams, expressed in original column indices."""
    _, h, w = image.shape
    index = np.tile(np.arange(w), (h, 1))
    work = image
    seams = []
    for _ in range(k):
        seam = min_seam(energy_map(work))
        rows = np.arange(h)
        seams.append(index[rows, seam].copy())
        keep = np.ones(index.shape, dtype=bool)
        keep[rows, seam] = False
        index = index[keep].reshape(h, -1)
        work = remove_seam(work, seam)
    return seams


def insert_seams(image: np.ndarray, k: int) -> np.ndarray:
    """Widen by ``k`` columns, duplicating the ``k`` lowest-energy seams of
    the original; each inserted pixel averages the seam pixel and its
    right neighbour (left neighbour on the last column)."""
    c, h, w = image.shape
    out = image
    while k > 0:
        step = min(k, out.shape[2] - 1)
        seams = _original_seams(out, step)
        dup = np.zeros((h, out.shape[2]), dtype=bool)
        for s in seams:
            dup[np.arange(h), s] = True
        cur_w = out.shape[2]
        res = np.empty((c, h, cur_w + step), dtype=image.dtype)
        for y in range(h):
            reps = dup[y].astype(np.int64) + 1
            row = out[:, y, np.repeat(np.arange(cur_w), reps)]
            xs = np.flatnonzero(dup[y])
            nb = np.where(xs + 1 < cur_w, xs + 1, xs - 1)
            row[:, np.cumsum(reps)[xs] - 1] = (out[:, y, xs] + out[:, y, nb]) / 2
            res[:, y, :] = row
        out = res
        k -= step
    return out


def _resize_width(image: np.ndarray, target_w: int) -> np.ndarray:
    w = image.shape[2]
    if target_w < w:
        return remove_seams(image, w - target_w)[0]
    if target_w > w:
        return insert_seams(image, target_w - w)
    return image


def seam_retarget(image: np.ndarray, target_w: int, target_h: int, height_first: bool = False) -> np.ndarray:
    """Seam-carve ``[C, H, W]`` to ``[C, target_h, target_w]``; the height
    pass runs on the transposed image."""
    if target_w < 2 or target_h < 2:
        raise SeamError(f"targets must be >= 2, got {target_w}x{target_h}")
    out = image.copy()

    def width_pass(img):
        return _resize_width(img, target_w)

    def height_pass(img):
        return _resize_width(img.transpose(0, 2, 1), target_h).transpose(0, 2, 1)

    for op in ((height_pass, width_pass) if height_first else (width_pass, height_pass)):
        out = op(out)
    return np.ascontiguousarray(out)
