"""Retinex decomposition network.

A stem conv, a chain of residual modules bracketed by 64x3x3 convs, and a
1x1 head emitting 4 sigmoid channels: 3 reflectance + 1 illumination.
The same weights decompose both the low and the normal image.
"""

from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ChannelMismatch, ShapeError

RM_KERNELS = (1, 3, 3, 3, 1)
RM_CHANNELS = (64, 128, 256, 128, 64)


class Decomposition(NamedTuple):
    reflectance: torch.Tensor  # B x 3 x H x W in (0,1)
    illumination: torch.Tensor  # B x 1 x H x W in (0,1)


class ResidualModule(nn.Module):
    """5-conv residual block with a 1x1 shortcut convolution.

    Kernel sizes and channel widths default to the decomposition variant
    {1,3,3,3,1} / {64,128,256,128,64}; the denoiser keeps 128 throughout.
    """

    def __init__(self, in_ch=64, kernels=RM_KERNELS, channels=RM_CHANNELS):
        super().__init__()
        assert len(kernels) == len(channels) == 5
        convs = []
        prev = in_ch
        for k, c in zip(kernels, channels):
            convs.append(nn.Conv2d(prev, c, k, padding=k // 2))
            prev = c
        self.convs = nn.ModuleList(convs)
        self.shortcut = nn.Conv2d(in_ch, channels[-1], 1)

    def forward(self, x):
        if x.shape[-3] != self.convs[0].in_channels:
            raise ChannelMismatch(
                f"expected {self.convs[0].in_channels} channels, got {x.shape[-3]}"
            )
        out = x
        for i, conv in enumerate(self.convs):
            out = conv(out)
            if i < len(self.convs) - 1:
                out = F.relu(out)
        return out + self.shortcut(x)


def residual_module_forward(x, module: ResidualModule):
    return module(x)


class DecomNet(nn.Module):
    def __init__(self, num_rm=3, width=64):
        super().__init__()
        self.stem = nn.Conv2d(3, width, 3, padding=1)
        self.pre_convs = nn.ModuleList(
            nn.Conv2d(width, width, 3, padding=1) for _ in range(num_rm)
        )
        self.rm_blocks = nn.ModuleList(
            ResidualModule(in_ch=width) for _ in range(num_rm)
        )
        self.post_convs = nn.ModuleList(
            nn.Conv2d(width, width, 3, padding=1) for _ in range(num_rm)
        )
        self.head = nn.Conv2d(width, 4, 1)

    def forward(self, image: torch.Tensor) -> Decomposition:
        if image.shape[-3] != 3:
            raise ShapeError(f"expected 3-channel input, got {image.shape}")
        out = F.relu(self.stem(image))
        for pre, rm, post in zip(self.pre_convs, self.rm_blocks, self.post_convs):
            out = F.relu(pre(out))
            out = rm(out)
            out = F.relu(post(out))
        out = torch.sigmoid(self.head(out))
        return Decomposition(
            reflectance=out[..., 0:3, :, :], illumination=out[..., 3:4, :, :]
        )


def decompose(image: torch.Tensor, net: DecomNet) -> Decomposition:
    return net(image)


def compose(reflectance: torch.Tensor, illumination: torch.Tensor) -> torch.Tensor:
    """S = R * I with the single illumination channel broadcast over RGB."""
    if illumination.shape[-3] != 1:
        raise ShapeError(f"illumination must be 1-channel, got {illumination.shape}")
    if reflectance.shape[-2:] != illumination.shape[-2:]:
        raise ShapeError(
            f"spatial dims differ: {reflectance.shape} vs {illumination.shape}"
        )
    return reflectance * illumination
