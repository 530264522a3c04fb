"""Relighting network: spatial contrast branch + frequency detail branch.

The contrast enhancement module (CEM) is a DN-ResUnet trunk whose decoder
pyramid is upsampled to full resolution and concatenated before a 64-ch
projection. The detail reconstruction module (DRM) runs two
spatial-frequency-spatial conversion (SFSC) blocks and one frequency
information processing (FIP) block over FFT features with complex
convolutions. Both branches emit 64 channels; a 3x3 then 1x1 conv fuse
them into the enhanced illumination map.
"""

from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .decom_net import compose
from .denoise_net import WIDTH, DEPTH, ResUnetTrunk, check_divisible
from .errors import ShapeError
from .nn_utils import crop_back
from .spectral_ops import ComplexConv2d, ComplexFeatureMap, ComplexResBlock, crelu, fft2, ifft2

BRANCH_CH = 64


class EnhancedResult(NamedTuple):
    enhanced_illumination: torch.Tensor  # B x 1 x H x W
    enhanced_image: torch.Tensor         # B x 3 x H x W


class ContrastEnhancementModule(nn.Module):
    """Spatial branch: trunk + multi-scale decoder fusion to 64 channels."""

    def __init__(self):
        super().__init__()
        self.trunk = ResUnetTrunk(in_ch=4)
        # decoder pyramid: DEPTH levels x 128 channels each
        self.fuse_channels = DEPTH * WIDTH
        self.project = nn.Conv2d(self.fuse_channels, BRANCH_CH, 3, padding=1)

    def forward(self, x):
        _, levels = self.trunk(x)
        full = x.shape[-2:]
        upsampled = [
            lv if lv.shape[-2:] == full
            else F.interpolate(lv, size=full, mode="nearest")
            for lv in levels
        ]
        fused = torch.cat(upsampled, dim=-3)
        return F.relu(self.project(fused))


def cem_forward(x, module: ContrastEnhancementModule):
    return module(x)


class SpatialResBlock(nn.Module):
    """Plain 2-conv residual block used on the spatial side of SFSC."""

    def __init__(self, channels=BRANCH_CH):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        return x + self.conv2(F.relu(self.conv1(x)))


class SFSCBlock(nn.Module):
    """Spatial resblock -> FFT -> complex resblock -> inverse FFT."""

    def __init__(self, channels=BRANCH_CH):
        super().__init__()
        self.spatial = SpatialResBlock(channels)
        self.frequency = ComplexResBlock(channels)

    def forward(self, x):
        if x.shape[-3] != BRANCH_CH:
            raise ShapeError(f"expected {BRANCH_CH} channels, got {x.shape}")
        out = self.spatial(x)
        spec = self.frequency(fft2(out))
        return ifft2(spec)


def sfsc_forward(x, block: SFSCBlock):
    return block(x)


class FIPBlock(nn.Module):
    """High-pass-like fusion of feature-level and image-level spectra."""

    def __init__(self, channels=BRANCH_CH, image_ch=4):
        super().__init__()
        self.image_lift = nn.Conv2d(image_ch, channels, 1)
        self.conv1 = ComplexConv2d(2 * channels, channels, 3)
        self.conv2 = ComplexConv2d(channels, channels, 3)

    def forward(self, features, image):
        if features.shape[-2:] != image.shape[-2:]:
            raise ShapeError(
                f"feature/image spatial dims differ: "
                f"{tuple(features.shape)} vs {tuple(image.shape)}"
            )
        feat_spec = fft2(features)
        img_spec = fft2(self.image_lift(image))
        spec = ComplexFeatureMap(
            real=torch.cat([feat_spec.real, img_spec.real], dim=-3),
            imag=torch.cat([feat_spec.imag, img_spec.imag], dim=-3),
        )
        spec = crelu(self.conv1(spec))
        spec = crelu(self.conv2(spec))
        return ifft2(spec)


def fip_forward(features, image, block: FIPBlock):
    return block(features, image)


class DetailReconstructionModule(nn.Module):
    def __init__(self):
        super().__init__()
        self.stem = nn.Conv2d(4, BRANCH_CH, 3, padding=1)
        self.sfsc1 = SFSCBlock()
        self.sfsc2 = SFSCBlock()
        self.fip = FIPBlock()

    def forward(self, x):
        feats = self.sfsc2(self.sfsc1(F.relu(self.stem(x))))
        return self.fip(feats, x)


class RelightNet(nn.Module):
    """Fuses CEM and DRM outputs into the enhanced illumination map.

    Either branch can be disabled (ablation); a disabled branch is not
    evaluated and contributes zeros to the fusion input.
    """

    def __init__(self, disable_cem=False, disable_drm=False, auto_pad=True):
        super().__init__()
        self.disable_cem = disable_cem
        self.disable_drm = disable_drm
        self.auto_pad = auto_pad
        self.cem = ContrastEnhancementModule()
        self.drm = DetailReconstructionModule()
        self.fuse_conv = nn.Conv2d(2 * BRANCH_CH, 2 * BRANCH_CH, 3, padding=1)
        self.head = nn.Conv2d(2 * BRANCH_CH, 1, 1)

    def forward(self, reflectance, illumination) -> EnhancedResult:
        if reflectance.shape[-3] != 3 or illumination.shape[-3] != 1:
            raise ShapeError(
                f"expected 3+1 channels, got {reflectance.shape} / {illumination.shape}"
            )
        if reflectance.shape[-2:] != illumination.shape[-2:]:
            raise ShapeError("reflectance/illumination spatial dims differ")
        x = torch.cat([reflectance, illumination], dim=-3)
        x, size = check_divisible(x, self.auto_pad)
        zeros = x.new_zeros(x.shape[:-3] + (BRANCH_CH,) + x.shape[-2:])
        cem_out = zeros if self.disable_cem else self.cem(x)
        drm_out = zeros if self.disable_drm else self.drm(x)
        fused = F.relu(self.fuse_conv(torch.cat([cem_out, drm_out], dim=-3)))
        illum = torch.sigmoid(self.head(fused))
        illum = crop_back(illum, size)
        enhanced = compose(reflectance, illum)
        return EnhancedResult(enhanced_illumination=illum, enhanced_image=enhanced)


def relight(reflectance, illumination, net: RelightNet) -> EnhancedResult:
    return net(reflectance, illumination)
