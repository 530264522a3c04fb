"""Reflectance denoiser: a deep-narrow Res-UNet conditioned on illumination.

Downsampling uses stride-2 convolutions (never pooling), interior blocks
keep 128 channels, and the first two layers are dilated 3x3 convolutions.
The illumination map enters as a fourth input channel. The trunk is shared
with the relighting contrast branch, which reuses its decoder pyramid.
"""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .decom_net import ResidualModule
from .errors import NonDivisibleDims, OddDims, ShapeError
from .nn_utils import crop_back, pad_to_multiple

WIDTH = 128
DEPTH = 3  # stride-2 levels; spatial dims must divide by 2**DEPTH


class DownsampleConv(nn.Module):
    """2x2 stride-2 convolution replacing max-pooling."""

    def __init__(self, channels=WIDTH):
        super().__init__()
        self.conv = nn.Conv2d(channels, channels, 2, stride=2)

    def forward(self, x):
        if x.shape[-2] % 2 or x.shape[-1] % 2:
            raise OddDims(f"spatial dims must be even, got {tuple(x.shape[-2:])}")
        return self.conv(x)


def strided_downsample(x, module: DownsampleConv):
    return module(x)


class UpsampleConv(nn.Module):
    """Nearest-neighbor resize followed by a 3x3 conv (no checkerboard)."""

    def __init__(self, in_ch=WIDTH, out_ch=WIDTH):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, 3, padding=1)

    def forward(self, x):
        x = F.interpolate(x, scale_factor=2, mode="nearest")
        return F.relu(self.conv(x))


def _narrow_rm():
    return ResidualModule(in_ch=WIDTH, kernels=(1, 3, 3, 3, 1), channels=(WIDTH,) * 5)


class ResUnetTrunk(nn.Module):
    """Encoder/decoder body of the DN-ResUnet; emits the decoder pyramid."""

    def __init__(self, in_ch=4):
        super().__init__()
        self.entry = nn.ModuleList(
            [
                nn.Conv2d(in_ch, WIDTH, 3, padding=2, dilation=2),
                nn.Conv2d(WIDTH, WIDTH, 3, padding=2, dilation=2),
            ]
        )
        self.enc_blocks = nn.ModuleList(_narrow_rm() for _ in range(DEPTH))
        self.down = nn.ModuleList(DownsampleConv() for _ in range(DEPTH))
        self.bottleneck = _narrow_rm()
        self.up = nn.ModuleList(UpsampleConv() for _ in range(DEPTH))
        self.merge = nn.ModuleList(
            nn.Conv2d(2 * WIDTH, WIDTH, 3, padding=1) for _ in range(DEPTH)
        )
        self.dec_blocks = nn.ModuleList(_narrow_rm() for _ in range(DEPTH))

    def forward(self, x):
        """Returns (full-res 128-ch features, decoder outputs coarse->fine)."""
        for conv in self.entry:
            x = F.relu(conv(x))
        skips = []
        for block, down in zip(self.enc_blocks, self.down):
            x = block(x)
            skips.append(x)
            x = down(x)
        x = self.bottleneck(x)
        level_outputs = []
        for up, merge, block, skip in zip(
            self.up, self.merge, self.dec_blocks, reversed(skips)
        ):
            x = up(x)
            if x.shape[-2:] != skip.shape[-2:]:
                raise ShapeError(
                    f"skip shape {tuple(skip.shape)} mismatches decoder {tuple(x.shape)}"
                )
            x = F.relu(merge(torch.cat([x, skip], dim=-3)))
            x = block(x)
            level_outputs.append(x)
        return x, level_outputs


def check_divisible(x, auto_pad):
    """Pad to a stride-compatible size or fail; returns (x, original size)."""
    multiple = 2**DEPTH
    if auto_pad:
        return pad_to_multiple(x, multiple)
    if x.shape[-2] % multiple or x.shape[-1] % multiple:
        raise NonDivisibleDims(
            f"spatial dims must divide by {multiple}, got {tuple(x.shape[-2:])}"
        )
    return x, x.shape[-2:]


class DenoiseNet(nn.Module):
    def __init__(self, auto_pad=True):
        super().__init__()
        self.auto_pad = auto_pad
        self.trunk = ResUnetTrunk(in_ch=4)
        self.exit = nn.Conv2d(WIDTH, 3, 1)

    def forward(self, reflectance, illumination):
        if reflectance.shape[-3] != 3 or illumination.shape[-3] != 1:
            raise ShapeError(
                f"expected 3+1 channels, got {reflectance.shape} / {illumination.shape}"
            )
        if reflectance.shape[-2:] != illumination.shape[-2:]:
            raise ShapeError("reflectance/illumination spatial dims differ")
        x = torch.cat([reflectance, illumination], dim=-3)
        x, size = check_divisible(x, self.auto_pad)
        feats, _ = self.trunk(x)
        out = torch.sigmoid(self.exit(feats))
        return crop_back(out, size)


def denoise(reflectance, illumination, net: DenoiseNet):
    return net(reflectance, illumination)
