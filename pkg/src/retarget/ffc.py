"""Fast Fourier Convolution building blocks.

The global branch of an FFC block runs a spectral transform: a pointwise
convolution over the stacked real/imaginary parts of the channel-wise real
FFT, which gives every output pixel a receptive field covering the whole
image.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from .errors import FFCError


def real_fft2d(x: torch.Tensor, norm: str = "backward") -> torch.Tensor:
    """Channel-wise 2-D real FFT over the last two dims -> ``[..., H, W//2 + 1]``."""
    return torch.fft.rfft2(x, dim=(-2, -1), norm=norm)


def inverse_real_fft2d(spectrum: torch.Tensor, size: tuple[int, int], norm: str = "backward") -> torch.Tensor:
    return torch.fft.irfft2(spectrum, s=size, dim=(-2, -1), norm=norm)


@dataclass(frozen=True)
class FFCConfig:
    channels_in: int
    channels_out: int
    global_ratio: float = 0.75
    kernel_size: int = 3

    def split(self, channels: int) -> tuple[int, int]:
        """(local, global) channel counts."""
        if not 0.0 <= self.global_ratio <= 1.0:
            raise FFCError(f"global_ratio {self.global_ratio} outside [0, 1]")
        n_global = int(round(self.global_ratio * channels))
        return channels - n_global, n_global

    @property
    def in_split(self) -> tuple[int, int]:
        return self.split(self.channels_in)

    @property
    def out_split(self) -> tuple[int, int]:
        return self.split(self.channels_out)


class FourierUnit(nn.Module):
    """1x1 conv + norm + ReLU applied to stacked (real, imag) spectra."""

    def __init__(self, channels: int, use_norm: bool = True, use_activation: bool = True):
        super().__init__()
        self.conv = nn.Conv2d(2 * channels, 2 * channels, 1, bias=not use_norm)
        self.norm = nn.BatchNorm2d(2 * channels) if use_norm else nn.Identity()
        self.act = nn.ReLU(inplace=True) if use_activation else nn.Identity()

    def forward(self, x):
        n, c, h, w = x.shape
        spec = real_fft2d(x, norm="ortho")
        stacked = torch.cat([spec.real, spec.imag], dim=1)
        stacked = self.act(self.norm(self.conv(stacked)))
        real, imag = stacked.chunk(2, dim=1)
        return inverse_real_fft2d(torch.complex(real, imag), (h, w), norm="ortho")


class SpectralTransform(nn.Module):
    """1x1 conv -> Fourier unit -> 1x1 conv; spatial size is preserved.

    ``use_norm=False, use_activation=False`` together with
    :meth:`set_identity` turns the transform into an FFT round trip.
    """

    def __init__(self, channels_in: int, channels_out: int | None = None, hidden: int | None = None,
                 use_norm: bool = True, use_activation: bool = True):
        super().__init__()
        channels_out = channels_out or channels_in
        hidden = hidden or max(1, channels_out // 2)
        # bias required: without it an impulse on a zero field maps to an impulse
        self.conv_in = nn.Conv2d(channels_in, hidden, 1, bias=True)
        self.fourier = FourierUnit(hidden, use_norm, use_activation)
        self.conv_out = nn.Conv2d(hidden, channels_out, 1, bias=False)

    @torch.no_grad()
    def set_identity(self):
        for conv in (self.conv_in, self.fourier.conv, self.conv_out):
            out_c, in_c = conv.weight.shape[:2]
            if out_c != in_c:
                raise FFCError("identity weights need equal in/out/hidden widths")
            conv.weight.copy_(torch.eye(out_c, dtype=conv.weight.dtype)[:, :, None, None])
            if conv.bias is not None:
                conv.bias.zero_()
        return self

    def forward(self, x):
        y = self.conv_out(self.fourier(self.conv_in(x)))
        if not torch.isfinite(y).all():
            raise FFCError("non-finite activations in spectral transform")
        return y


def spectral_transform(x: torch.Tensor, module: SpectralTransform) -> torch.Tensor:
    """Apply ``module`` to a single ``[C, H, W]`` tensor or a batch."""
    if x.dim() == 3:
        return module(x[None])[0]
    return module(x)


def _conv(c_in, c_out, k):
    if c_in == 0 or c_out == 0:
        return None
    return nn.Conv2d(c_in, c_out, k, padding=k // 2, padding_mode="reflect", bias=False)


class FFCBlock(nn.Module):
    """Four-path local/global convolution.

    y_local  = conv_ll(x_local) + conv_gl(x_global)
    y_global = conv_lg(x_local) + spectral(x_global)

    each followed by BatchNorm + ReLU.
    """

    def __init__(self, cfg: FFCConfig):
        super().__init__()
        self.cfg = cfg
        in_l, in_g = cfg.in_split
        out_l, out_g = cfg.out_split
        k = cfg.kernel_size
        self.conv_ll = _conv(in_l, out_l, k)
        self.conv_gl = _conv(in_g, out_l, k)
        self.conv_lg = _conv(in_l, out_g, k)
        self.spectral = SpectralTransform(in_g, out_g) if in_g and out_g else None
        self.norm_l = nn.BatchNorm2d(out_l) if out_l else None
        self.norm_g = nn.BatchNorm2d(out_g) if out_g else None
        self.act = nn.ReLU(inplace=True)

    def _check(self, x_local, x_global):
        in_l, in_g = self.cfg.in_split
        c_g = 0 if x_global is None else x_global.shape[1]
        if x_local.shape[1] != in_l or c_g != in_g:
            raise FFCError(
                f"channel split mismatch: got ({x_local.shape[1]}, {c_g}), expected ({in_l}, {in_g})")

    def preactivation(self, x_local, x_global=None):
        self._check(x_local, x_global)
        out_l, out_g = self.cfg.out_split
        n, _, h, w = x_local.shape
        y_l = y_g = None
        if out_l:
            terms = [m(x) for m, x in ((self.conv_ll, x_local), (self.conv_gl, x_global)) if m is not None]
            y_l = sum(terms) if terms else x_local.new_zeros(n, out_l, h, w)
        if out_g:
            terms = []
            if self.conv_lg is not None:
                terms.append(self.conv_lg(x_local))
            if self.spectral is not None:
                terms.append(self.spectral(x_global))
            y_g = sum(terms) if terms else x_local.new_zeros(n, out_g, h, w)
        if y_l is None:
            y_l = x_local.new_zeros(n, 0, h, w)
        if y_g is None:
            y_g = x_local.new_zeros(n, 0, h, w)
        return y_l, y_g

    def forward(self, x_local, x_global=None):
        y_l, y_g = self.preactivation(x_local, x_global)
        if self.norm_l is not None:
            y_l = self.act(self.norm_l(y_l))
        if self.norm_g is not None:
            y_g = self.act(self.norm_g(y_g))
        return y_l, y_g


def ffc_block(x_local, x_global, block: FFCBlock):
    return block(x_local, x_global)


class FFCResidualBlock(nn.Module):
    """Two FFC blocks with identity skips on both branches."""

    def __init__(self, channels: int, global_ratio: float = 0.75, kernel_size: int = 3):
        super().__init__()
        cfg = FFCConfig(channels, channels, global_ratio, kernel_size)
        self.split = cfg.in_split
        self.ffc1 = FFCBlock(cfg)
        self.ffc2 = FFCBlock(cfg)

    def forward(self, x):
        c_l = self.split[0]
        x_l, x_g = x[:, :c_l], x[:, c_l:]
        y_l, y_g = self.ffc2(*self.ffc1(x_l, x_g))
        return torch.cat([x_l + y_l, x_g + y_g], dim=1)
