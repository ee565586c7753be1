"""Training objectives.

Discriminator outputs are raw logits everywhere; probabilities are formed
here with ``sigmoid`` and logs are clamped at ``LOG_EPS``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import torch
import torch.nn as nn

from .errors import LossError

LOG_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    kappa: float = 10.0   # adversarial
    alpha: float = 30.0   # high-receptive-field perceptual
    beta: float = 100.0   # discriminator feature matching
    gamma: float = 0.001  # R1

    def __post_init__(self):
        values = (self.kappa, self.alpha, self.beta, self.gamma)
        if any(v < 0 or not math.isfinite(v) for v in values):
            raise LossError(f"loss weights must be finite and >= 0, got {values}")
        if not any(v > 0 for v in values):
            raise LossError("at least one loss weight must be positive")


# -- perceptual backbone ------------------------------------------------------

class DilatedPyramid(nn.Module):
    """Frozen dilated-convolution feature pyramid with fixed-seed weights.

    Dilation grows 1, 2, 4, 8 so the receptive field expands quickly without
    pretrained weights. Any module returning a list of feature maps can
    replace it.
    """

    def __init__(self, widths: Sequence[int] = (16, 32, 64, 64), seed: int = 1234):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        layers, c_in = [], 3
        for i, c_out in enumerate(widths):
            d = 2 ** i
            conv = nn.Conv2d(c_in, c_out, 3, stride=2 if i else 1, padding=d, dilation=d)
            with torch.no_grad():
                conv.weight.normal_(0.0, math.sqrt(2.0 / (9 * c_in)), generator=gen)
                conv.bias.zero_()
            layers.append(conv)
            c_in = c_out
        self.layers = nn.ModuleList(layers)
        freeze(self)

    def forward(self, x):
        feats = []
        for conv in self.layers:
            x = torch.relu(conv(x))
            feats.append(x)
        return feats


def freeze(module: nn.Module) -> nn.Module:
    module.eval()
    for p in module.parameters():
        p.requires_grad_(False)
    return module


BACKBONES: dict[str, Callable[[], nn.Module]] = {"dilated": DilatedPyramid}


def register_backbone(name: str, factory: Callable[[], nn.Module]) -> None:
    BACKBONES[name] = factory


def make_backbone(name: str = "dilated") -> nn.Module:
    try:
        return freeze(BACKBONES[name]())
    except KeyError:
        raise LossError(f"unknown perceptual backbone {name!r}; available: {sorted(BACKBONES)}") from None


def _as_list(feats):
    return list(feats) if isinstance(feats, (list, tuple)) else [feats]


def hrf_perceptual_loss(x, xhat, backbone: Callable) -> torch.Tensor:
    """Mean over layers of the per-layer mean squared feature difference."""
    if x.shape != xhat.shape:
        raise LossError(f"shape mismatch: {tuple(x.shape)} vs {tuple(xhat.shape)}")
    fx, fxh = _as_list(backbone(x)), _as_list(backbone(xhat))
    per_layer = [((a - b) ** 2).mean() for a, b in zip(fx, fxh)]
    return torch.stack(per_layer).mean()


# -- adversarial ----------------------------------------------------------------

def _log_prob(p):
    return torch.log(p.clamp(min=LOG_EPS))


def adversarial_losses(real_logits, fake_logits) -> tuple[torch.Tensor, torch.Tensor]:
    """(L_D, L_G) with the non-saturating generator objective."""
    p_real, p_fake = torch.sigmoid(real_logits), torch.sigmoid(fake_logits)
    l_d = -_log_prob(p_real).mean() - _log_prob(1.0 - p_fake).mean()
    l_g = -_log_prob(p_fake).mean()
    return l_d, l_g


def discriminator_loss(real_logits, fake_logits) -> torch.Tensor:
    return adversarial_losses(real_logits, fake_logits)[0]


def generator_adv_loss(fake_logits) -> torch.Tensor:
    return -_log_prob(torch.sigmoid(fake_logits)).mean()


def compose_adversarial(l_d, l_g, generator_params: Iterable[torch.Tensor],
                        discriminator_params: Iterable[torch.Tensor]) -> torch.Tensor:
    """``L_D + L_G`` whose gradient reaches the generator only through L_G
    and the discriminator only through L_D.

    Built as a surrogate: the value is ``(L_D + L_G)`` detached, plus terms
    ``(p - p.detach()) * g`` that are exactly zero in value and carry the
    routed gradient ``g`` for each parameter ``p``.
    """
    g_params = [p for p in generator_params if p.requires_grad]
    d_params = [p for p in discriminator_params if p.requires_grad]
    g_grads = torch.autograd.grad(l_g, g_params, retain_graph=True, allow_unused=True)
    d_grads = torch.autograd.grad(l_d, d_params, retain_graph=True, allow_unused=True)
    total = (l_d + l_g).detach()
    for p, g in list(zip(g_params, g_grads)) + list(zip(d_params, d_grads)):
        if g is not None:
            total = total + ((p - p.detach()) * g.detach()).sum()
    return total


# -- regularizers -----------------------------------------------------------------

def _score(output):
    logits = output[0] if isinstance(output, (tuple, list)) else output
    return logits.reshape(logits.shape[0], -1).mean(dim=1)


def r1_penalty(real_batch, discriminator: Callable, create_graph: bool = True) -> torch.Tensor:
    """Batch mean of ||d score / d input||^2 with score = mean of the logits map."""
    x = real_batch.detach().requires_grad_(True)
    score = _score(discriminator(x))
    (grad,) = torch.autograd.grad(score.sum(), x, create_graph=create_graph)
    return grad.reshape(grad.shape[0], -1).pow(2).sum(dim=1).mean()


def feature_matching_loss(real_feats, fake_feats) -> torch.Tensor:
    """Mean over layers of mean |real - fake|; real features are constants."""
    real_feats, fake_feats = _as_list(real_feats), _as_list(fake_feats)
    if len(real_feats) != len(fake_feats):
        raise LossError(f"feature lists differ in length: {len(real_feats)} vs {len(fake_feats)}")
    terms = []
    for r, f in zip(real_feats, fake_feats):
        if r.shape != f.shape:
            raise LossError(f"feature shape mismatch: {tuple(r.shape)} vs {tuple(f.shape)}")
        terms.append((r.detach() - f).abs().mean())
    return torch.stack(terms).mean()


def final_loss(l_adv, l_hrfpl, l_discpl, r1, w: LossWeights):
    """``kappa*L_Adv + alpha*L_HRFPL + beta*L_DiscPL + gamma*R1``."""
    named = {"L_Adv": l_adv, "L_HRFPL": l_hrfpl, "L_DiscPL": l_discpl, "R1": r1}
    for name, value in named.items():
        v = value.detach() if torch.is_tensor(value) else torch.tensor(float(value))
        if not torch.isfinite(v).all():
            raise LossError(f"non-finite loss component {name}")
    return w.kappa * l_adv + w.alpha * l_hrfpl + w.beta * l_discpl + w.gamma * r1
