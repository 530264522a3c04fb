"""Shared network helpers: seeded init and reflect pad/crop."""

import math

import torch
import torch.nn as nn
import torch.nn.functional as F


def kaiming_init_(module: nn.Module, generator: torch.Generator) -> None:
    """Kaiming fan-in init for every conv weight, zero biases.

    Uses an explicit generator so identical seeds give identical nets.
    """
    from .spectral_ops import ComplexConv2d

    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            std = math.sqrt(2.0 / fan_in)
            with torch.no_grad():
                m.weight.normal_(0.0, std, generator=generator)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, ComplexConv2d):
            fan_in = m.a.shape[1] * m.a.shape[2] * m.a.shape[3]
            std = math.sqrt(2.0 / fan_in) / math.sqrt(2.0)
            with torch.no_grad():
                m.a.normal_(0.0, std, generator=generator)
                m.b.normal_(0.0, std, generator=generator)
                m.bias_real.zero_()
                m.bias_imag.zero_()
    _zero_residual_tails_(module)


def _zero_residual_tails_(module: nn.Module) -> None:
    """Start every residual block at its shortcut (zero the chain's last conv)
    and scale linear shortcuts for unit gain, keeping deep stacks from
    saturating the sigmoid heads at init."""
    from .decom_net import ResidualModule
    from .spectral_ops import ComplexResBlock

    with torch.no_grad():
        for m in module.modules():
            if isinstance(m, ResidualModule):
                m.convs[-1].weight.zero_()
                m.convs[-1].bias.zero_()
                m.shortcut.weight.mul_(math.sqrt(0.5))  # no ReLU after shortcut
            elif isinstance(m, ComplexResBlock):
                m.conv2.a.zero_()
                m.conv2.b.zero_()
            elif m.__class__.__name__ == "SpatialResBlock":
                m.conv2.weight.zero_()
                m.conv2.bias.zero_()


def pad_to_multiple(x: torch.Tensor, multiple: int):
    """Reflect-pad the last two dims up to a multiple; returns (x, (H, W))."""
    h, w = x.shape[-2], x.shape[-1]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph or pw:
        x = F.pad(x, (0, pw, 0, ph), mode="reflect")
    return x, (h, w)


def crop_back(x: torch.Tensor, size):
    h, w = size
    return x[..., :h, :w]
