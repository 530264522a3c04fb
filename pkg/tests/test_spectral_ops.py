import numpy as np
import pytest
import torch

from r2rnet import spectral_ops as so
from r2rnet.errors import ChannelMismatch, NonConjugateSpectrum

from helpers import (
    assert_grads_close,
    complex_conv_reference,
    dft2_reference,
)


class TestFFT2:
    def test_dc_only(self):
        x = torch.ones(1, 2, 2)
        spec = so.fft2(x)
        assert torch.allclose(spec.real, torch.tensor([[[4.0, 0.0], [0.0, 0.0]]]))
        assert torch.allclose(spec.imag, torch.zeros(1, 2, 2))

    def test_single_point_identity(self):
        spec = so.fft2(torch.tensor([[[3.7]]]))
        assert spec.real.item() == pytest.approx(3.7)
        assert spec.imag.item() == pytest.approx(0.0)

    def test_impulse_flat_spectrum(self):
        x = torch.zeros(1, 4, 4)
        x[0, 0, 0] = 1.0
        spec = so.fft2(x)
        ref = dft2_reference(x.numpy())
        assert np.allclose(spec.real.numpy(), ref.real, atol=1e-6)
        assert np.allclose(spec.imag.numpy(), ref.imag, atol=1e-6)
        assert torch.allclose(spec.real, torch.ones(1, 4, 4))
        assert torch.allclose(spec.imag, torch.zeros(1, 4, 4))

    def test_matches_direct_dft(self, rng):
        x = rng.uniform(0, 1, size=(2, 5, 3))
        spec = so.fft2(torch.from_numpy(x))
        ref = dft2_reference(x)
        assert np.allclose(spec.real.numpy(), ref.real, atol=1e-9)
        assert np.allclose(spec.imag.numpy(), ref.imag, atol=1e-9)

    def test_linearity(self, rng):
        x = torch.from_numpy(rng.uniform(0, 1, size=(2, 6, 6)))
        y = torch.from_numpy(rng.uniform(0, 1, size=(2, 6, 6)))
        a, b = 0.3, -1.7
        lhs = so.fft2(a * x + b * y)
        rx, ry = so.fft2(x), so.fft2(y)
        assert torch.allclose(lhs.real, a * rx.real + b * ry.real, atol=1e-6)
        assert torch.allclose(lhs.imag, a * rx.imag + b * ry.imag, atol=1e-6)

    def test_parseval(self, rng):
        x = torch.from_numpy(rng.uniform(0, 1, size=(3, 7, 5)))
        spec = so.fft2(x)
        energy = (x**2).sum()
        spectral = (spec.real**2 + spec.imag**2).sum() / (7 * 5)
        assert abs(energy - spectral) / energy <= 1e-5


class TestIFFT2:
    def test_round_trip(self, rng):
        x = torch.from_numpy(rng.uniform(0, 1, size=(2, 8, 6)))
        back = so.ifft2(so.fft2(x))
        assert (back - x).abs().max() <= 1e-6

    def test_zero_spectrum(self):
        zero = so.ComplexFeatureMap(torch.zeros(1, 4, 4), torch.zeros(1, 4, 4))
        assert torch.equal(so.ifft2(zero), torch.zeros(1, 4, 4))

    def test_dc_inverse(self):
        spec = so.ComplexFeatureMap(
            torch.tensor([[[4.0, 0.0], [0.0, 0.0]]]), torch.zeros(1, 2, 2)
        )
        assert torch.allclose(so.ifft2(spec), torch.ones(1, 2, 2))

    def test_strict_rejects_nonconjugate(self):
        spec = so.ComplexFeatureMap(torch.zeros(1, 4, 4), torch.ones(1, 4, 4))
        with pytest.raises(NonConjugateSpectrum):
            so.ifft2(spec, strict=True)

    def test_strict_accepts_real_signal_spectrum(self, rng):
        x = torch.from_numpy(rng.uniform(0, 1, size=(1, 4, 4)))
        so.ifft2(so.fft2(x), strict=True)


class TestComplexConv:
    def _random_case(self, rng, in_ch=2, out_ch=1, k=3, h=3, w=3):
        t = lambda *s: torch.from_numpy(rng.standard_normal(s))
        h_map = so.ComplexFeatureMap(t(in_ch, h, w), t(in_ch, h, w))
        weights = so.ComplexConvWeights(t(out_ch, in_ch, k, k), t(out_ch, in_ch, k, k))
        return h_map, weights

    def test_b_zero_reduces_to_real_convs(self, rng):
        h_map, weights = self._random_case(rng)
        weights = so.ComplexConvWeights(weights.a, torch.zeros_like(weights.b))
        out = so.complex_conv(h_map, weights)
        only_x = so.complex_conv(
            so.ComplexFeatureMap(h_map.real, torch.zeros_like(h_map.imag)), weights
        )
        only_y = so.complex_conv(
            so.ComplexFeatureMap(h_map.imag, torch.zeros_like(h_map.imag)), weights
        )
        assert torch.allclose(out.real, only_x.real, atol=1e-9)
        assert torch.allclose(out.imag, only_y.real, atol=1e-9)

    def test_multiply_by_j(self):
        # 1x1 filters a=0, b=1: (0 + j)(x + jy) = -y + jx
        h_map = so.ComplexFeatureMap(torch.rand(1, 3, 3), torch.rand(1, 3, 3))
        weights = so.ComplexConvWeights(
            torch.zeros(1, 1, 1, 1), torch.ones(1, 1, 1, 1)
        )
        out = so.complex_conv(h_map, weights)
        assert torch.allclose(out.real, -h_map.imag)
        assert torch.allclose(out.imag, h_map.real)

    def test_matches_bruteforce(self, rng):
        for _ in range(5):
            h_map, weights = self._random_case(rng)
            out = so.complex_conv(h_map, weights)
            real, imag = complex_conv_reference(
                h_map.real.numpy(), h_map.imag.numpy(),
                weights.a.numpy(), weights.b.numpy(),
            )
            assert np.allclose(out.real.numpy(), real, atol=1e-6)
            assert np.allclose(out.imag.numpy(), imag, atol=1e-6)

    def test_channel_mismatch(self, rng):
        h_map, _ = self._random_case(rng, in_ch=2)
        bad = so.ComplexConvWeights(torch.zeros(1, 3, 3, 3), torch.zeros(1, 3, 3, 3))
        with pytest.raises(ChannelMismatch):
            so.complex_conv(h_map, bad)

    @pytest.mark.parametrize("wrt", ["x", "y", "a", "b"])
    def test_gradients_match_finite_differences(self, rng, wrt):
        t = lambda *s: torch.from_numpy(rng.standard_normal(s))
        parts = {"x": t(2, 4, 4), "y": t(2, 4, 4),
                 "a": t(1, 2, 3, 3), "b": t(1, 2, 3, 3)}
        probe = t(1, 4, 4), t(1, 4, 4)  # fixed cotangent for a scalar output

        def fn(v):
            p = dict(parts)
            p[wrt] = v
            out = so.complex_conv(
                so.ComplexFeatureMap(p["x"], p["y"]),
                so.ComplexConvWeights(p["a"], p["b"]),
            )
            return (out.real * probe[0]).sum() + (out.imag * probe[1]).sum()

        assert_grads_close(fn, parts[wrt], rel=1e-4)


class TestCReLU:
    def test_clips_parts_independently(self):
        h = so.ComplexFeatureMap(torch.tensor([[[-1.0]]]), torch.tensor([[[2.0]]]))
        out = so.crelu(h)
        assert out.real.item() == 0.0
        assert out.imag.item() == 2.0

        h = so.ComplexFeatureMap(torch.tensor([[[3.0]]]), torch.tensor([[[-4.0]]]))
        out = so.crelu(h)
        assert out.real.item() == 3.0
        assert out.imag.item() == 0.0

    def test_nonnegative_fixed_point(self, rng):
        h = so.ComplexFeatureMap(torch.rand(2, 3, 3), torch.rand(2, 3, 3))
        out = so.crelu(h)
        assert torch.equal(out.real, h.real)
        assert torch.equal(out.imag, h.imag)

    def test_idempotent(self, rng):
        h = so.ComplexFeatureMap(
            torch.from_numpy(rng.standard_normal((2, 4, 4))),
            torch.from_numpy(rng.standard_normal((2, 4, 4))),
        )
        once = so.crelu(h)
        twice = so.crelu(once)
        assert torch.equal(once.real, twice.real)
        assert torch.equal(once.imag, twice.imag)

    def test_lipschitz_per_part(self, rng):
        a = torch.from_numpy(rng.standard_normal((2, 4, 4)))
        b = torch.from_numpy(rng.standard_normal((2, 4, 4)))
        ra = so.crelu(so.ComplexFeatureMap(a, torch.zeros_like(a))).real
        rb = so.crelu(so.ComplexFeatureMap(b, torch.zeros_like(b))).real
        assert ((ra - rb).abs() <= (a - b).abs() + 1e-12).all()

    def test_gradient_away_from_zero(self, rng):
        x = torch.from_numpy(rng.standard_normal((2, 4, 4)))
        x = torch.where(x.abs() < 0.3, x + 0.5, x)  # keep away from the kink

        def fn(v):
            out = so.crelu(so.ComplexFeatureMap(v, v * 0.5))
            return (out.real.sum() + out.imag.sum())

        assert_grads_close(fn, x, rel=1e-4)


class TestComplexResBlock:
    def _block(self, channels=4, seed=0):
        torch.manual_seed(seed)
        block = so.ComplexResBlock(channels=channels).double()
        for p in block.parameters():
            with torch.no_grad():
                p.normal_(0, 0.1)
        return block

    def test_zero_weights_identity(self):
        block = so.ComplexResBlock(channels=4).double()
        for p in block.parameters():
            with torch.no_grad():
                p.zero_()
        h = so.ComplexFeatureMap(torch.rand(4, 6, 6).double(), torch.rand(4, 6, 6).double())
        out = block(h)
        assert torch.allclose(out.real, h.real)
        assert torch.allclose(out.imag, h.imag)

    def test_shape_preserved(self):
        block = so.ComplexResBlock(channels=64)
        h = so.ComplexFeatureMap(torch.rand(64, 12, 12), torch.rand(64, 12, 12))
        out = block(h)
        assert out.real.shape == (64, 12, 12)
        assert out.imag.shape == (64, 12, 12)

    def test_matches_explicit_composition(self, rng):
        block = self._block()
        h = so.ComplexFeatureMap(
            torch.from_numpy(rng.standard_normal((4, 5, 5))),
            torch.from_numpy(rng.standard_normal((4, 5, 5))),
        )
        out = block(h)
        inner = so.crelu(block.conv1(h))
        inner = so.crelu(block.conv2(inner))
        assert torch.allclose(out.real, h.real + inner.real, atol=1e-12)
        assert torch.allclose(out.imag, h.imag + inner.imag, atol=1e-12)
