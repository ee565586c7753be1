"""Six-channel-in, three-channel-out ResNet-style generator with FFC residual blocks."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
import torch.nn as nn

from .errors import GeneratorError
from .ffc import FFCResidualBlock


@dataclass(frozen=True)
class GeneratorConfig:
    base_width: int = 64
    max_width: int = 256
    n_down: int = 3
    n_residual: int = 9
    n_up: int = 3
    global_ratio: float = 0.75
    kernel_size: int = 3
    in_channels: int = 6
    out_channels: int = 3

    def widths(self) -> list[int]:
        """Feature widths after the stem and after each downsampling block."""
        return [min(self.base_width * 2 ** i, self.max_width) for i in range(self.n_down + 1)]

    def to_dict(self):
        return asdict(self)


def _conv_bn_relu(c_in, c_out, k, stride=1):
    return [
        nn.Conv2d(c_in, c_out, k, stride=stride, padding=k // 2, padding_mode="reflect", bias=False),
        nn.BatchNorm2d(c_out),
        nn.ReLU(inplace=True),
    ]


class Generator(nn.Module):
    def __init__(self, config: GeneratorConfig = GeneratorConfig()):
        super().__init__()
        if config.n_down != config.n_up:
            raise GeneratorError("n_down must equal n_up so the output size matches the input")
        self.config = config
        widths = config.widths()

        self.stem = nn.Sequential(*_conv_bn_relu(config.in_channels, widths[0], 7))
        self.down = nn.Sequential(*[
            nn.Sequential(*_conv_bn_relu(widths[i], widths[i + 1], 3, stride=2))
            for i in range(config.n_down)
        ])
        self.residual = nn.Sequential(*[
            FFCResidualBlock(widths[-1], config.global_ratio, config.kernel_size)
            for _ in range(config.n_residual)
        ])
        up = []
        for i in reversed(range(config.n_up)):
            up.append(nn.Sequential(nn.Upsample(scale_factor=2, mode="nearest"),
                                    *_conv_bn_relu(widths[i + 1], widths[i], 3)))
        self.up = nn.Sequential(*up)
        self.head = nn.Sequential(
            nn.Conv2d(widths[0], config.out_channels, 7, padding=3, padding_mode="reflect"),
            nn.Sigmoid(),
        )

    @property
    def multiple(self) -> int:
        return 2 ** self.config.n_down

    def forward(self, x):
        h, w = x.shape[-2:]
        if h % self.multiple or w % self.multiple:
            raise GeneratorError(f"dims must be divisible by {self.multiple}, got {h}x{w}")
        return self.head(self.up(self.residual(self.down(self.stem(x)))))


def init_generator(config: GeneratorConfig = GeneratorConfig(), seed: int = 0) -> Generator:
    gen = torch.Generator().manual_seed(seed)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(torch.randint(0, 2**62, (1,), generator=gen)))
        model = Generator(config)
    return model


def generator_forward(x6, model: Generator) -> torch.Tensor:
    """Run the generator on one ``[6, H, W]`` input or an ``[N, 6, H, W]`` batch."""
    single = x6.dim() == 3
    if single:
        x6 = x6[None]
    if x6.shape[1] != model.config.in_channels:
        raise GeneratorError(f"expected {model.config.in_channels} input channels, got {x6.shape[1]}")
    out = model(x6)
    return out[0] if single else out


def parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
