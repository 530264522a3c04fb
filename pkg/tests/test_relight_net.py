import copy

import pytest
import torch

from r2rnet.decom_net import compose
from r2rnet.denoise_net import WIDTH, DEPTH
from r2rnet.errors import ShapeError
from r2rnet.nn_utils import kaiming_init_
from r2rnet.relight_net import (
    BRANCH_CH,
    ContrastEnhancementModule,
    FIPBlock,
    RelightNet,
    SFSCBlock,
    cem_forward,
    fip_forward,
    relight,
    sfsc_forward,
)
from r2rnet.spectral_ops import fft2, ifft2, crelu


def _seeded(net, seed=0):
    kaiming_init_(net, torch.Generator().manual_seed(seed))
    return net


class TestCEM:
    def test_output_shape(self):
        cem = _seeded(ContrastEnhancementModule())
        out = cem_forward(torch.rand(1, 4, 96, 96), cem)
        assert out.shape == (1, BRANCH_CH, 96, 96)

    def test_fusion_channel_count(self):
        cem = ContrastEnhancementModule()
        # depth-3 decoder pyramid at 128 channels each
        assert cem.fuse_channels == DEPTH * WIDTH == 384
        assert cem.project.in_channels == 384

    def test_zero_net_zero_output(self):
        cem = ContrastEnhancementModule()
        for p in cem.parameters():
            with torch.no_grad():
                p.zero_()
        out = cem(torch.zeros(1, 4, 16, 16))
        assert torch.equal(out, torch.zeros(1, BRANCH_CH, 16, 16))


class TestSFSC:
    def test_shape_round_trip(self):
        block = _seeded(SFSCBlock())
        out = sfsc_forward(torch.rand(1, 64, 24, 24), block)
        assert out.shape == (1, 64, 24, 24)

    def test_zero_complex_branch_reduces_to_spatial(self):
        block = _seeded(SFSCBlock())
        for p in block.frequency.parameters():
            with torch.no_grad():
                p.zero_()
        x = torch.rand(1, 64, 8, 8)
        out = block(x)
        assert torch.allclose(out, block.spatial(x), atol=1e-5)

    def test_matches_explicit_composition(self):
        block = _seeded(SFSCBlock(), seed=2)
        x = torch.rand(1, 64, 8, 8)
        spec = fft2(block.spatial(x))
        expected = ifft2(block.frequency(spec))
        assert torch.allclose(block(x), expected, atol=1e-6)

    def test_wrong_channels(self):
        block = SFSCBlock()
        with pytest.raises(ShapeError):
            block(torch.rand(1, 32, 8, 8))


class TestFIP:
    def test_zero_inputs_zero_output(self):
        block = _seeded(FIPBlock())
        for p in (block.conv1.bias_real, block.conv1.bias_imag,
                  block.conv2.bias_real, block.conv2.bias_imag,
                  block.image_lift.bias):
            with torch.no_grad():
                p.zero_()
        out = fip_forward(
            torch.zeros(1, 64, 8, 8), torch.zeros(1, 4, 8, 8), block
        )
        assert torch.allclose(out, torch.zeros(1, 64, 8, 8), atol=1e-7)

    def test_output_shape(self):
        block = _seeded(FIPBlock())
        out = block(torch.rand(2, 64, 12, 20), torch.rand(2, 4, 12, 20))
        assert out.shape == (2, 64, 12, 20)

    def test_spatial_mismatch(self):
        block = FIPBlock()
        with pytest.raises(ShapeError):
            block(torch.rand(1, 64, 8, 8), torch.rand(1, 4, 16, 16))

    def test_block_identity_passthrough(self):
        # a = identity on the first 64 channels, b = 0: the image branch is
        # ignored and DC-dominant features pass through unchanged
        block = FIPBlock()
        with torch.no_grad():
            for conv in (block.conv1, block.conv2):
                conv.a.zero_()
                conv.b.zero_()
                conv.bias_real.zero_()
                conv.bias_imag.zero_()
            k = block.conv1.a.shape[-1] // 2
            for c in range(64):
                block.conv1.a[c, c, k, k] = 1.0
                block.conv2.a[c, c, k, k] = 1.0
        # constant features have a nonnegative (DC-only) spectrum, so the
        # crelu stages are transparent
        features = torch.full((1, 64, 8, 8), 0.3)
        out = block(features, torch.rand(1, 4, 8, 8))
        assert (out - features).abs().max() <= 1e-6


class TestRelight:
    def test_shapes(self):
        net = _seeded(RelightNet())
        result = relight(torch.rand(1, 3, 96, 96), torch.rand(1, 1, 96, 96), net)
        assert result.enhanced_illumination.shape == (1, 1, 96, 96)
        assert result.enhanced_image.shape == (1, 3, 96, 96)

    def test_sigmoid_range(self):
        net = _seeded(RelightNet(), seed=4)
        result = net(torch.rand(1, 3, 16, 16), torch.rand(1, 1, 16, 16))
        assert (result.enhanced_illumination > 0).all()
        assert (result.enhanced_illumination < 1).all()

    def test_self_consistency(self):
        net = _seeded(RelightNet())
        r = torch.rand(1, 3, 16, 16)
        result = net(r, torch.rand(1, 1, 16, 16))
        recomposed = compose(r, result.enhanced_illumination)
        assert torch.equal(result.enhanced_image, recomposed)

    def test_nonmultiple_shape_preserved(self):
        net = _seeded(RelightNet())
        result = net(torch.rand(1, 3, 50, 70), torch.rand(1, 1, 50, 70))
        assert result.enhanced_image.shape == (1, 3, 50, 70)

    def test_disabled_drm_ignores_drm_weights(self):
        net = _seeded(RelightNet(disable_drm=True))
        r, i = torch.rand(1, 3, 16, 16), torch.rand(1, 1, 16, 16)
        before = net(r, i).enhanced_image
        with torch.no_grad():
            for p in net.drm.parameters():
                p.add_(1.0)
        after = net(r, i).enhanced_image
        assert torch.equal(before, after)

    def test_disabled_cem_ignores_cem_weights(self):
        net = _seeded(RelightNet(disable_cem=True))
        r, i = torch.rand(1, 3, 16, 16), torch.rand(1, 1, 16, 16)
        before = net(r, i).enhanced_image
        with torch.no_grad():
            for p in net.cem.parameters():
                p.add_(1.0)
        after = net(r, i).enhanced_image
        assert torch.equal(before, after)

    def test_disabled_branch_gets_no_gradient(self):
        net = _seeded(RelightNet(disable_drm=True))
        result = net(torch.rand(1, 3, 16, 16), torch.rand(1, 1, 16, 16))
        result.enhanced_image.sum().backward()
        assert all(p.grad is None for p in net.drm.parameters())
        assert any(p.grad is not None for p in net.cem.parameters())

    def test_ablation_changes_output(self):
        r, i = torch.rand(1, 3, 16, 16), torch.rand(1, 1, 16, 16)
        full = _seeded(RelightNet())
        no_drm = _seeded(RelightNet(disable_drm=True))
        no_drm.load_state_dict(full.state_dict())
        assert not torch.allclose(
            full(r, i).enhanced_image, no_drm(r, i).enhanced_image
        )

    def test_shape_errors(self):
        net = _seeded(RelightNet())
        with pytest.raises(ShapeError):
            net(torch.rand(1, 3, 16, 16), torch.rand(1, 1, 8, 8))
        with pytest.raises(ShapeError):
            net(torch.rand(1, 4, 16, 16), torch.rand(1, 1, 16, 16))
