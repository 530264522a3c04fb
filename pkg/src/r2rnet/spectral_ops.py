"""Frequency-domain primitives: 2-D FFT, complex convolution, CReLU.

Complex feature maps are carried as explicit (real, imag) tensor pairs so
that every op stays differentiable through plain real autograd. The FFT
convention is unnormalized forward / 1/(HW) inverse, DC at the corner.
"""

from typing import NamedTuple

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ChannelMismatch, NonConjugateSpectrum


class ComplexFeatureMap(NamedTuple):
    real: torch.Tensor
    imag: torch.Tensor

    @property
    def shape(self):
        return self.real.shape


class ComplexConvWeights(NamedTuple):
    a: torch.Tensor  # real filter bank, out x in x k x k
    b: torch.Tensor  # imaginary filter bank, same shape


def fft2(x: torch.Tensor) -> ComplexFeatureMap:
    """Per-channel 2-D DFT over the last two dims (unnormalized forward)."""
    spec = torch.fft.fft2(x, norm="backward")
    return ComplexFeatureMap(real=spec.real, imag=spec.imag)


def ifft2(X: ComplexFeatureMap, strict: bool = False) -> torch.Tensor:
    """1/(HW)-normalized inverse DFT; the imaginary residue is discarded.

    With strict=True the residue must be negligible relative to the
    spectrum's magnitude (i.e. X is the spectrum of a real signal).
    """
    if X.real.shape != X.imag.shape:
        raise ChannelMismatch("real/imag shapes differ")
    spec = torch.complex(X.real, X.imag)
    out = torch.fft.ifft2(spec, norm="backward")
    if strict:
        scale = spec.abs().max()
        residue = out.imag.abs().max()
        if scale > 0 and residue > 1e-5 * scale:
            raise NonConjugateSpectrum(
                f"imaginary residue {residue:.3g} exceeds 1e-5 * {scale:.3g}"
            )
    return out.real


def complex_conv(
    h: ComplexFeatureMap, w: ComplexConvWeights, bias=None
) -> ComplexFeatureMap:
    """(A + jB) * (x + jy) = (A*x - B*y) + j(B*x + A*y), stride 1, same pad."""
    if h.real.shape != h.imag.shape or w.a.shape != w.b.shape:
        raise ChannelMismatch("real/imag shapes differ")
    in_ch = h.real.shape[-3]
    if w.a.shape[1] != in_ch:
        raise ChannelMismatch(f"weights expect {w.a.shape[1]} channels, got {in_ch}")
    pad = w.a.shape[-1] // 2
    ax = F.conv2d(h.real, w.a, padding=pad)
    by = F.conv2d(h.imag, w.b, padding=pad)
    bx = F.conv2d(h.real, w.b, padding=pad)
    ay = F.conv2d(h.imag, w.a, padding=pad)
    real = ax - by
    imag = bx + ay
    if bias is not None:
        real = real + bias[0].view(-1, 1, 1)
        imag = imag + bias[1].view(-1, 1, 1)
    return ComplexFeatureMap(real=real, imag=imag)


def crelu(h: ComplexFeatureMap) -> ComplexFeatureMap:
    """ReLU applied independently to the real and imaginary parts."""
    return ComplexFeatureMap(real=F.relu(h.real), imag=F.relu(h.imag))


class ComplexConv2d(nn.Module):
    """Learnable complex convolution with per-part bias."""

    def __init__(self, in_ch, out_ch, kernel_size=3):
        super().__init__()
        shape = (out_ch, in_ch, kernel_size, kernel_size)
        self.a = nn.Parameter(torch.empty(shape))
        self.b = nn.Parameter(torch.empty(shape))
        self.bias_real = nn.Parameter(torch.zeros(out_ch))
        self.bias_imag = nn.Parameter(torch.zeros(out_ch))

    def forward(self, h: ComplexFeatureMap) -> ComplexFeatureMap:
        return complex_conv(
            h, ComplexConvWeights(self.a, self.b), (self.bias_real, self.bias_imag)
        )


class ComplexResBlock(nn.Module):
    """h + crelu(conv2(crelu(conv1(h)))); shape preserving."""

    def __init__(self, channels=64, kernel_size=3):
        super().__init__()
        self.conv1 = ComplexConv2d(channels, channels, kernel_size)
        self.conv2 = ComplexConv2d(channels, channels, kernel_size)

    def forward(self, h: ComplexFeatureMap) -> ComplexFeatureMap:
        out = crelu(self.conv2(crelu(self.conv1(h))))
        return ComplexFeatureMap(real=h.real + out.real, imag=h.imag + out.imag)


def complex_resblock(h: ComplexFeatureMap, block: ComplexResBlock) -> ComplexFeatureMap:
    return block(h)
