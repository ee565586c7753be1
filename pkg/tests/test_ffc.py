import numpy as np
import pytest
import torch

from retarget.errors import FFCError
from retarget.ffc import (FFCBlock, FFCConfig, FFCResidualBlock, SpectralTransform, ffc_block,
                          inverse_real_fft2d, real_fft2d, spectral_transform)

from .gradcheck import agreement


def naive_rdft2(x):
    """O(N^2) DFT per channel, keeping the W//2 + 1 non-negative column bins."""
    c, h, w = x.shape
    out = np.zeros((c, h, w // 2 + 1), dtype=np.complex128)
    hh, ww = np.mgrid[0:h, 0:w]
    for u in range(h):
        for v in range(w // 2 + 1):
            basis = np.exp(-2j * np.pi * (u * hh / h + v * ww / w))
            out[:, u, v] = (x * basis).sum(axis=(1, 2))
    return out


def test_constant_signal_has_only_dc():
    x = torch.full((1, 8, 8), 0.7, dtype=torch.float64)
    spec = real_fft2d(x)
    assert spec[0, 0, 0].real.item() == pytest.approx(64 * 0.7)
    rest = spec.clone()
    rest[0, 0, 0] = 0
    assert rest.abs().max().item() < 1e-12


def test_half_spectrum_shape():
    assert real_fft2d(torch.rand(4, 8, 8)).shape == (4, 8, 5)
    assert real_fft2d(torch.rand(2, 6, 7)).shape == (2, 6, 4)


def test_matches_naive_dft_odd_width(rng):
    x = rng.standard_normal((2, 6, 7))
    got = real_fft2d(torch.from_numpy(x)).numpy()
    np.testing.assert_allclose(got, naive_rdft2(x), atol=1e-6, rtol=0)


def test_dc_bin_is_real(rng):
    spec = real_fft2d(torch.from_numpy(rng.standard_normal((3, 5, 6))))
    assert spec[:, 0, 0].imag.abs().max().item() < 1e-12


def test_linearity(rng):
    x, y = (torch.from_numpy(rng.standard_normal((3, 8, 6))) for _ in range(2))
    a, b = 1.7, -0.4
    lhs = real_fft2d(a * x + b * y)
    rhs = a * real_fft2d(x) + b * real_fft2d(y)
    assert (lhs - rhs).abs().max().item() < 1e-5


@pytest.mark.parametrize("shape", [(2, 8, 8), (1, 5, 7), (3, 6, 9)])
def test_parseval(rng, shape):
    x = torch.from_numpy(rng.standard_normal(shape))
    spec = real_fft2d(x)
    _, h, w = shape
    weights = torch.full((w // 2 + 1,), 2.0, dtype=torch.float64)
    weights[0] = 1.0
    if w % 2 == 0:
        weights[-1] = 1.0
    spectral_energy = (spec.abs() ** 2 * weights).sum() / (h * w)
    assert spectral_energy.item() == pytest.approx((x ** 2).sum().item(), rel=1e-4)


def test_round_trip(rng):
    x = torch.from_numpy(rng.standard_normal((4, 8, 7)))
    back = inverse_real_fft2d(real_fft2d(x), (8, 7))
    assert (back - x).abs().max().item() <= 1e-5 * x.abs().max().item()


def test_spectral_transform_identity_mode(rng):
    st = SpectralTransform(4, hidden=4, use_norm=False, use_activation=False).double().set_identity()
    x = torch.from_numpy(rng.standard_normal((2, 4, 16, 12)))
    with torch.no_grad():
        y = st(x)
    assert y.shape == x.shape
    assert (y - x).abs().max().item() < 1e-5


@pytest.mark.parametrize("shape", [(1, 8, 16, 16), (2, 6, 10, 7)])
def test_spectral_transform_preserves_shape(shape):
    st = SpectralTransform(shape[1])
    assert st(torch.rand(shape)).shape == shape
    assert spectral_transform(torch.rand(shape[1:]), st).shape == shape[1:]


def test_spectral_transform_full_receptive_field():
    torch.manual_seed(0)
    st = SpectralTransform(4).eval()
    x = torch.zeros(1, 4, 16, 16)
    xp = x.clone()
    xp[0, :, 0, 0] = 1.0
    with torch.no_grad():
        delta = (st(xp) - st(x)).abs().amax(dim=1)[0]
    assert (delta > 0).all()


def test_spectral_transform_rejects_non_finite():
    st = SpectralTransform(2)
    x = torch.zeros(1, 2, 4, 4)
    x[0, 0, 0, 0] = float("inf")
    with pytest.raises(FFCError):
        st(x)


def test_spectral_transform_gradcheck(float64):
    torch.manual_seed(3)
    st = SpectralTransform(2, hidden=2)
    x = torch.randn(1, 2, 4, 4)
    params = [p for p in st.parameters()]
    frac, _, _ = agreement(lambda: (st(x) * torch.linspace(-1, 1, 16).view(1, 1, 4, 4)).sum(), params)
    assert frac >= 0.99


def test_ffc_zero_global_ratio_is_plain_conv():
    torch.manual_seed(0)
    block = FFCBlock(FFCConfig(8, 8, global_ratio=0.0))
    x = torch.rand(2, 8, 6, 6)
    y_l, y_g = block(x, None)
    assert y_g.shape == (2, 0, 6, 6)
    with torch.no_grad():
        expected = torch.relu(block.norm_l(block.conv_ll(x)))
    assert torch.allclose(y_l, expected)


def test_ffc_shapes():
    block = FFCBlock(FFCConfig(64, 64, global_ratio=0.5))
    y_l, y_g = ffc_block(torch.rand(1, 32, 16, 16), torch.rand(1, 32, 16, 16), block)
    assert y_l.shape == (1, 32, 16, 16) and y_g.shape == (1, 32, 16, 16)


def test_ffc_zero_input_gives_zero_preactivation():
    block = FFCBlock(FFCConfig(16, 16, global_ratio=0.75))
    with torch.no_grad():
        for m in block.modules():
            if isinstance(m, torch.nn.Conv2d) and m.bias is not None:
                m.bias.zero_()
    y_l, y_g = block.preactivation(torch.zeros(1, 4, 8, 8), torch.zeros(1, 12, 8, 8))
    assert y_l.abs().max() == 0 and y_g.abs().max() == 0


def test_ffc_channel_mismatch():
    block = FFCBlock(FFCConfig(16, 16, global_ratio=0.75))
    with pytest.raises(FFCError):
        block(torch.zeros(1, 8, 8, 8), torch.zeros(1, 8, 8, 8))


def test_local_path_is_banded():
    torch.manual_seed(0)
    conv = FFCBlock(FFCConfig(4, 4, global_ratio=0.0)).conv_ll
    x = torch.zeros(1, 4, 16, 16)
    xp = x.clone()
    xp[0, :, 8, 8] = 1.0
    with torch.no_grad():
        changed = (conv(xp) - conv(x)).abs().amax(dim=1)[0] > 0
    rows, cols = torch.nonzero(changed, as_tuple=True)
    assert rows.min() == 7 and rows.max() == 9 and cols.min() == 7 and cols.max() == 9


def test_residual_block_preserves_shape():
    block = FFCResidualBlock(32, 0.75)
    assert block(torch.rand(2, 32, 8, 8)).shape == (2, 32, 8, 8)
