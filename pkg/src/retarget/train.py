"""Alternating generator/discriminator training with checkpointing.

Each step updates the discriminator on ``kappa*L_D + gamma*R1`` and then the
generator on ``kappa*L_G + alpha*L_HRFPL + beta*L_DiscPL`` using a fresh
generator forward. Because each optimizer only steps its own parameters,
this realises the stop-gradient routing of the composed adversarial loss.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch

from .checkpoint import FORMAT_VERSION, atomic_save, load_state, read_container
from .config import TrainConfig
from .data import DatasetIndex, PairedSample, derive_seed, sample_pair
from .discriminator import Discriminator, init_discriminator
from .errors import CheckpointError, NonFiniteLossError, TrainError
from .generator import Generator, init_generator, parameter_count
from .losses import (adversarial_losses, feature_matching_loss, hrf_perceptual_loss, make_backbone,
                     r1_penalty)

log = logging.getLogger(__name__)

LOG_COLUMNS = ("step", "epoch", "L_D", "L_G", "L_Adv", "L_HRFPL", "L_DiscPL", "R1", "L_final")
ADAM_BETAS = (0.9, 0.999)


@dataclass
class TrainState:
    generator: Generator
    discriminator: Optional[Discriminator]
    opt_g: Optional[torch.optim.Optimizer]
    opt_d: Optional[torch.optim.Optimizer]
    config: TrainConfig
    step: int = 0
    epoch: int = 0
    inference_only: bool = False
    backbone: Optional[torch.nn.Module] = field(default=None, repr=False)

    def perceptual(self):
        if self.backbone is None:
            self.backbone = make_backbone(self.config.backbone)
        return self.backbone


def init_state(cfg: TrainConfig) -> TrainState:
    gen = init_generator(cfg.generator_config, derive_seed(cfg.seed, "generator"))
    disc = init_discriminator(cfg.discriminator_config, derive_seed(cfg.seed, "discriminator"))
    opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr_generator, betas=ADAM_BETAS)
    opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr_discriminator, betas=ADAM_BETAS)
    return TrainState(gen, disc, opt_g, opt_d, cfg)


def collate(batch: Sequence[PairedSample]) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Stack inputs, ground truths and ground-truth valid masks."""
    x = torch.from_numpy(np.stack([s.model_input for s in batch]))
    y = torch.from_numpy(np.stack([s.ground_truth for s in batch]))
    valid = torch.zeros(len(batch), 1, *y.shape[-2:])
    for i, s in enumerate(batch):
        rows, cols = s.gt_valid.slices()
        valid[i, :, rows, cols] = 1.0
    return x, y, valid


def _check_finite(metrics: dict, batch: Sequence[PairedSample]):
    bad = [k for k, v in metrics.items() if not math.isfinite(v)]
    if bad:
        ids = [s.sample_id for s in batch]
        raise NonFiniteLossError(f"non-finite loss ({', '.join(bad)}) on batch {ids}", ids)


def train_step(batch: Sequence[PairedSample], state: TrainState, cfg: TrainConfig | None = None):
    """One discriminator update followed by one generator update."""
    cfg = cfg or state.config
    if state.inference_only or state.discriminator is None:
        raise TrainError("cannot train from an inference-only state")
    w = cfg.weights
    gen, disc = state.generator, state.discriminator
    gen.train()
    disc.train()
    x, real, valid = collate(batch)

    def region(fake):
        if cfg.loss_region == "valid":
            return fake * valid + real * (1.0 - valid)
        return fake

    # discriminator phase
    with torch.no_grad():
        fake = region(gen(x))
    disc.requires_grad_(True)
    state.opt_d.zero_grad(set_to_none=True)
    real_logits, _ = disc(real)
    fake_logits, _ = disc(fake)
    l_d, _ = adversarial_losses(real_logits, fake_logits)
    r1 = r1_penalty(real, disc) if w.gamma > 0 else real.new_zeros(())
    d_total = w.kappa * l_d + w.gamma * r1
    if not torch.isfinite(d_total):
        _check_finite({"L_D": l_d.item(), "R1": r1.item()}, batch)
    d_total.backward()
    state.opt_d.step()

    # generator phase
    disc.requires_grad_(False)
    state.opt_g.zero_grad(set_to_none=True)
    fake = region(gen(x))
    fake_logits, fake_feats = disc(fake)
    with torch.no_grad():
        _, real_feats = disc(real)
    _, l_g = adversarial_losses(real_logits.detach(), fake_logits)
    l_hrfpl = hrf_perceptual_loss(real, fake, state.perceptual()) if w.alpha > 0 else real.new_zeros(())
    l_discpl = feature_matching_loss(real_feats, fake_feats)
    g_total = w.kappa * l_g + w.alpha * l_hrfpl + w.beta * l_discpl
    metrics = {
        "L_D": l_d.item(), "L_G": l_g.item(), "L_Adv": l_d.item() + l_g.item(),
        "L_HRFPL": l_hrfpl.item(), "L_DiscPL": l_discpl.item(), "R1": r1.item(),
    }
    metrics["L_final"] = (w.kappa * metrics["L_Adv"] + w.alpha * metrics["L_HRFPL"]
                          + w.beta * metrics["L_DiscPL"] + w.gamma * metrics["R1"])
    _check_finite(metrics, batch)
    g_total.backward()
    state.opt_g.step()
    disc.requires_grad_(True)

    state.step += 1
    record = {"step": state.step, "epoch": state.epoch, **metrics}
    return state, record


def format_record(record: dict) -> str:
    return "\t".join(str(record[c]) if c in ("step", "epoch") else repr(float(record[c]))
                     for c in LOG_COLUMNS)


def parse_loss_log(path: str | os.PathLike) -> list[dict]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("step"):
            continue
        parts = line.split("\t")
        rows.append({c: (int(v) if c in ("step", "epoch") else float(v)) for c, v in zip(LOG_COLUMNS, parts)})
    return rows


# -- checkpoints ---------------------------------------------------------------

def save_checkpoint(state: TrainState, path: str | os.PathLike, include_discriminator: bool = True) -> Path:
    blob = {
        "format": FORMAT_VERSION,
        "config": state.config.to_dict(),
        "generator": state.generator.state_dict(),
        "meta": {
            "step": state.step,
            "epoch": state.epoch,
            "seed": state.config.seed,
            "generator_params": parameter_count(state.generator),
        },
    }
    if include_discriminator and state.discriminator is not None:
        blob["discriminator"] = state.discriminator.state_dict()
        blob["meta"]["discriminator_params"] = parameter_count(state.discriminator)
        if state.opt_g is not None and state.opt_d is not None:
            blob["optim"] = {"generator": state.opt_g.state_dict(),
                             "discriminator": state.opt_d.state_dict()}
    return atomic_save(blob, path)


def load_checkpoint(path: str | os.PathLike) -> TrainState:
    blob = read_container(path)
    try:
        cfg = TrainConfig.from_dict(blob["config"])
        gen = Generator(cfg.generator_config)
        load_state(gen, blob["generator"], "generator")
    except KeyError as exc:
        raise CheckpointError(f"checkpoint {path} lacks section {exc}") from exc
    meta = blob.get("meta", {})
    state = TrainState(gen, None, None, None, cfg, meta.get("step", 0), meta.get("epoch", 0),
                       inference_only=True)
    if "discriminator" in blob:
        disc = Discriminator(cfg.discriminator_config)
        load_state(disc, blob["discriminator"], "discriminator")
        state.discriminator = disc
        state.inference_only = False
        state.opt_g = torch.optim.Adam(gen.parameters(), lr=cfg.lr_generator, betas=ADAM_BETAS)
        state.opt_d = torch.optim.Adam(disc.parameters(), lr=cfg.lr_discriminator, betas=ADAM_BETAS)
        if "optim" in blob:
            state.opt_g.load_state_dict(blob["optim"]["generator"])
            state.opt_d.load_state_dict(blob["optim"]["discriminator"])
    return state


# -- training loop --------------------------------------------------------------

def preflight(out_dir: Path) -> None:
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_test"
        probe.write_bytes(b"\0" * 4096)
        probe.unlink()
    except OSError as exc:
        raise TrainError(f"checkpoint directory {out_dir} is not writable: {exc}") from exc


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng(derive_seed(seed, "order", epoch)).permutation(n)


def set_deterministic(seed: int) -> None:
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def train(index: DatasetIndex, cfg: TrainConfig, resume: str | os.PathLike | None = None,
          max_steps: int | None = None) -> Path:
    """Train over ``index``; returns the path of the last checkpoint written.

    Pairs are synthesized on the fly with parameters seeded by
    ``(seed, epoch, sample_id)``, so a resumed run sees the same data.
    """
    if len(index) == 0:
        raise TrainError("dataset index is empty")
    out_dir = cfg.checkpoint_dir
    preflight(out_dir)
    if cfg.deterministic:
        set_deterministic(cfg.seed)

    state = load_checkpoint(resume) if resume else init_state(cfg)
    if resume:
        state.config = cfg
    steps_per_epoch = math.ceil(len(index) / cfg.batch_size)
    total = cfg.epochs * steps_per_epoch
    if max_steps is not None:
        total = min(total, max_steps)
    log_path = out_dir / "loss_log.tsv"
    if not resume or not log_path.exists():
        log_path.write_text("\t".join(LOG_COLUMNS) + "\n")
    latest = out_dir / "latest.ckpt"
    pool = ThreadPoolExecutor(cfg.workers) if cfg.workers > 0 else None

    try:
        with log_path.open("a") as log_fh:
            while state.step < total:
                epoch, offset = divmod(state.step, steps_per_epoch)
                state.epoch = epoch
                order = epoch_order(len(index), cfg.seed, epoch)
                ids = order[offset * cfg.batch_size:(offset + 1) * cfg.batch_size]
                make = lambda i: sample_pair(index, int(i), cfg.seed, epoch, cfg.shift_prob)  # noqa: E731
                batch = list(pool.map(make, ids)) if pool else [make(i) for i in ids]
                state, record = train_step(batch, state, cfg)
                log_fh.write(format_record(record) + "\n")
                log_fh.flush()
                if state.step % cfg.checkpoint_every == 0:
                    save_checkpoint(state, latest)
                    log.info("step %d: L_final=%.4f (checkpoint)", state.step, record["L_final"])
    finally:
        if pool:
            pool.shutdown()
    state.epoch = state.step // steps_per_epoch
    save_checkpoint(state, latest)
    return latest
