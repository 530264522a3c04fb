"""Stage losses: decomposition, denoise, and relight objectives.

All L1/L2 terms are mean-reduced over batch and pixels so the loss
weights stay batch-size invariant. The perceptual distance reads frozen
backbone features before the activation; the frequency term is an
empirical Wasserstein-1 between sorted FFT coefficients per part.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .decom_net import compose
from .errors import InputTooSmall, ShapeError
from .nn_utils import kaiming_init_
from .spectral_ops import fft2

_IMAGENET_MEAN = (0.485, 0.456, 0.406)
_IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 0.01
    lambda2: float = 0.01
    lambda3: float = 0.1
    lambda4: float = 0.1
    lambda5: float = 0.1
    lambda6: float = 0.01

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if value < 0:
                raise ValueError(f"{name} must be nonnegative, got {value}")


class PerceptualExtractor(nn.Module):
    """Frozen VGG16-style feature extractor tapped before the activation.

    The tap is the last third-stage conv output (pre-ReLU). When pretrained
    weights are unavailable the backbone is a fixed-seed random init, which
    still defines a valid (if weaker) feature distance for training and an
    exact target for the dual-path tests.
    """

    MIN_INPUT = 8  # two 2x pools inside the tapped prefix

    def __init__(self, pretrained=False, seed=0):
        super().__init__()
        cfg = [(3, 64), (64, 64), "pool", (64, 128), (128, 128), "pool",
               (128, 256), (256, 256), (256, 256)]
        layers = []
        for item in cfg:
            if item == "pool":
                layers.append(nn.MaxPool2d(2))
            else:
                cin, cout = item
                layers.append(nn.Conv2d(cin, cout, 3, padding=1))
        # ReLUs between convs are applied in forward; the final conv output
        # is returned pre-activation.
        self.layers = nn.ModuleList(layers)
        if pretrained:
            self._load_pretrained()
        else:
            gen = torch.Generator().manual_seed(seed)
            kaiming_init_(self, gen)
        self.register_buffer("mean", torch.tensor(_IMAGENET_MEAN).view(3, 1, 1))
        self.register_buffer("std", torch.tensor(_IMAGENET_STD).view(3, 1, 1))
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def _load_pretrained(self):
        from torchvision.models import VGG16_Weights, vgg16

        src = vgg16(weights=VGG16_Weights.IMAGENET1K_V1).features
        src_convs = [m for m in src[:15] if isinstance(m, nn.Conv2d)]
        own_convs = [m for m in self.layers if isinstance(m, nn.Conv2d)]
        with torch.no_grad():
            for dst, ref in zip(own_convs, src_convs):
                dst.weight.copy_(ref.weight)
                dst.bias.copy_(ref.bias)

    def forward(self, x):
        if x.shape[-2] < self.MIN_INPUT or x.shape[-1] < self.MIN_INPUT:
            raise InputTooSmall(
                f"need at least {self.MIN_INPUT}px per side, got {tuple(x.shape[-2:])}"
            )
        x = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        convs = [i for i, m in enumerate(self.layers) if isinstance(m, nn.Conv2d)]
        last_conv = convs[-1]
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if isinstance(layer, nn.Conv2d) and i != last_conv:
                x = F.relu(x)
        return x


def _check_same_shape(x, y):
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {tuple(x.shape)} vs {tuple(y.shape)}")


def perceptual_loss(x, y, extractor: PerceptualExtractor):
    """Squared feature distance normalized by C*H*W (and batch)."""
    _check_same_shape(x, y)
    fx = extractor(x)
    fy = extractor(y)
    return ((fx - fy) ** 2).mean()


def decom_content_loss(r_low, i_low, r_nor, i_nor, s_low, s_nor,
                       lambda1=0.01, lambda2=0.01):
    """L1 reconstruction plus cross-composition consistency terms."""
    _check_same_shape(s_low, s_nor)
    loss = (compose(r_low, i_low) - s_low).abs().mean()
    loss = loss + (compose(r_nor, i_nor) - s_nor).abs().mean()
    loss = loss + lambda1 * (compose(r_nor, i_low) - s_low).abs().mean()
    loss = loss + lambda2 * (compose(r_low, i_nor) - s_nor).abs().mean()
    return loss


def decom_loss(r_low, i_low, r_nor, i_nor, s_low, s_nor, weights: LossWeights,
               extractor=None):
    loss = decom_content_loss(
        r_low, i_low, r_nor, i_nor, s_low, s_nor, weights.lambda1, weights.lambda2
    )
    if weights.lambda3 != 0:
        perc = perceptual_loss(compose(r_low, i_low), s_low, extractor)
        perc = perc + perceptual_loss(compose(r_nor, i_nor), s_nor, extractor)
        loss = loss + weights.lambda3 * perc
    return loss


def denoise_loss(r_hat, r_nor, lambda4=0.1, extractor=None):
    _check_same_shape(r_hat, r_nor)
    loss = (r_hat - r_nor).abs().mean()
    if lambda4 != 0:
        loss = loss + lambda4 * perceptual_loss(r_hat, r_nor, extractor)
    return loss


def frequency_loss(s_hat, s_nor):
    """Sorted-coefficient Wasserstein-1 between FFT parts, scaled by 1/N^2.

    Per channel the real (resp. imaginary) coefficients of both spectra
    are flattened and sorted; the mean absolute difference of the sorted
    sequences is the empirical 1-D Wasserstein distance. N = max(H, W).
    """
    _check_same_shape(s_hat, s_nor)
    h, w = s_hat.shape[-2], s_hat.shape[-1]
    spec_a = fft2(s_hat)
    spec_b = fft2(s_nor)
    total = 0.0
    for pa, pb in ((spec_a.real, spec_b.real), (spec_a.imag, spec_b.imag)):
        fa = pa.flatten(-2).sort(dim=-1).values
        fb = pb.flatten(-2).sort(dim=-1).values
        total = total + (fa - fb).abs().mean()
    n = max(h, w)
    return total / (n * n)


def relight_loss(s_hat, s_nor, lambda5=0.1, lambda6=0.01, extractor=None,
                 mse_content=False):
    _check_same_shape(s_hat, s_nor)
    if mse_content:
        loss = ((s_hat - s_nor) ** 2).mean()
    else:
        loss = (s_hat - s_nor).abs().mean()
    if lambda5 != 0:
        loss = loss + lambda5 * perceptual_loss(s_hat, s_nor, extractor)
    if lambda6 != 0:
        loss = loss + lambda6 * frequency_loss(s_hat, s_nor)
    return loss
