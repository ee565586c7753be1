"""Single-file checkpoint container.

Layout (a ``torch.save`` dict)::

    format         "retarget-ckpt/1"
    config         TrainConfig as a plain dict
    generator      state dict
    discriminator  state dict (absent in inference-only files)
    optim          {"generator": ..., "discriminator": ...} (optional)
    meta           {"step", "epoch", "seed", "generator_params", ...}

Writes go to a temporary file that is renamed into place.
"""
from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path

import torch

from .errors import CheckpointError

FORMAT_VERSION = "retarget-ckpt/1"


def atomic_save(obj, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            torch.save(obj, fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def read_container(path: str | os.PathLike) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint {path} not found")
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(
            f"checkpoint {path} is corrupt or not a {FORMAT_VERSION} file ({exc.__class__.__name__})") from exc
    if not isinstance(blob, dict) or "format" not in blob:
        raise CheckpointError(f"checkpoint {path} has no format version; expected {FORMAT_VERSION}")
    if blob["format"] != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has format {blob['format']!r}; this build reads {FORMAT_VERSION!r}")
    return blob


def load_state(module: torch.nn.Module, state: dict, namespace: str) -> None:
    """Strict load; fails loudly on missing, unexpected or mis-shaped tensors."""
    own = module.state_dict()
    missing = sorted(set(own) - set(state))
    unexpected = sorted(set(state) - set(own))
    shapes = [k for k in own if k in state and tuple(own[k].shape) != tuple(state[k].shape)]
    if missing or unexpected or shapes:
        raise CheckpointError(
            f"{namespace} parameters do not match: missing={missing[:5]} "
            f"unexpected={unexpected[:5]} shape_mismatch={shapes[:5]}")
    module.load_state_dict(state, strict=True)


def tensor_hash(tensors) -> str:
    """Digest of named tensors; identical iff every value is bit-identical."""
    h = hashlib.sha256()
    for name, t in tensors:
        h.update(name.encode())
        h.update(t.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def parameter_hash(module: torch.nn.Module) -> str:
    return tensor_hash(module.named_parameters())
