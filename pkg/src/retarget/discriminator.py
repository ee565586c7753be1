"""N-layer patch discriminator returning raw logits and intermediate features."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn

from .errors import DiscriminatorError

KERNEL = 4
PAD = 1


@dataclass(frozen=True)
class DiscriminatorConfig:
    n_layers: int = 4
    base_width: int = 64
    max_width: int = 512
    in_channels: int = 3

    def to_dict(self):
        return asdict(self)

    def layer_geometry(self) -> list[tuple[int, int, int]]:
        """(kernel, stride, padding) for every conv, input to logits."""
        return [(KERNEL, 2, PAD)] * self.n_layers + [(KERNEL, 1, PAD)] * 2

    def receptive_field(self) -> tuple[int, int, int]:
        """(size, stride, offset): logits cell ``i`` sees input pixels
        ``[i * stride + offset, i * stride + offset + size)``."""
        size, stride, offset = 1, 1, 0
        for k, s, p in self.layer_geometry():
            size += (k - 1) * stride
            offset -= p * stride
            stride *= s
        return size, stride, offset

    def output_size(self, n: int) -> int:
        for k, s, p in self.layer_geometry():
            n = (n + 2 * p - k) // s + 1
        return n


class Discriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig = DiscriminatorConfig()):
        super().__init__()
        self.config = config
        width = lambda i: min(config.base_width * 2 ** i, config.max_width)  # noqa: E731

        stages = [nn.Sequential(
            nn.Conv2d(config.in_channels, width(0), KERNEL, stride=2, padding=PAD),
            nn.LeakyReLU(0.2, inplace=True))]
        for i in range(1, config.n_layers):
            stages.append(nn.Sequential(
                nn.Conv2d(width(i - 1), width(i), KERNEL, stride=2, padding=PAD, bias=False),
                nn.BatchNorm2d(width(i)),
                nn.LeakyReLU(0.2, inplace=True)))
        last = width(config.n_layers - 1)
        stages.append(nn.Sequential(
            nn.Conv2d(last, width(config.n_layers), KERNEL, stride=1, padding=PAD, bias=False),
            nn.BatchNorm2d(width(config.n_layers)),
            nn.LeakyReLU(0.2, inplace=True)))
        self.stages = nn.ModuleList(stages)
        self.head = nn.Conv2d(width(config.n_layers), 1, KERNEL, stride=1, padding=PAD)

    @property
    def min_size(self) -> int:
        return self.config.receptive_field()[0]

    def forward(self, x):
        h, w = x.shape[-2:]
        if min(h, w) < self.min_size:
            raise DiscriminatorError(
                f"input {h}x{w} smaller than the {self.min_size}px receptive field")
        features = []
        for stage in self.stages:
            x = stage(x)
            features.append(x)
        return self.head(x), features


def init_discriminator(config: DiscriminatorConfig = DiscriminatorConfig(), seed: int = 0) -> Discriminator:
    gen = torch.Generator().manual_seed(seed)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(torch.randint(0, 2**62, (1,), generator=gen)))
        model = Discriminator(config)
    return model


def discriminator_forward(img, model: Discriminator):
    """Logits and features for one ``[3, H, W]`` image or a batch."""
    single = img.dim() == 3
    logits, feats = model(img[None] if single else img)
    if single:
        return logits[0], [f[0] for f in feats]
    return logits, feats
