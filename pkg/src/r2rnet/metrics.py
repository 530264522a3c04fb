"""Full-reference quality metrics: PSNR, SSIM, MAE, GMSD.

PSNR and MAE operate on RGB; SSIM and GMSD on ITU-R 601 luma. All inputs
are H x W x 3 arrays in [0, 1].
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve

from .errors import ShapeError, TooSmall

_LUMA = np.array([0.299, 0.587, 0.114])


def _check(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch: {x.shape} vs {y.shape}")
    return x, y


def _luma(x):
    return x @ _LUMA if x.ndim == 3 else x


def psnr(x, y):
    """10*log10(1/MSE) on [0,1]-scaled inputs; +inf on identical images."""
    x, y = _check(x, y)
    mse = np.mean((x - y) ** 2)
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def mae(x, y):
    x, y = _check(x, y)
    return float(np.mean(np.abs(x - y)))


def _gaussian_window(size=11, sigma=1.5):
    half = size // 2
    coords = np.arange(-half, half + 1, dtype=np.float64)
    g = np.exp(-(coords**2) / (2 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(x, y, k1=0.01, k2=0.03, win_size=11, sigma=1.5):
    """Single-scale SSIM on luma with an 11x11 Gaussian window."""
    x, y = _check(x, y)
    lx, ly = _luma(x), _luma(y)
    if min(lx.shape) < win_size:
        raise TooSmall(f"need at least {win_size}px per side, got {lx.shape}")
    win = _gaussian_window(win_size, sigma)
    c1, c2 = k1**2, k2**2

    def filt(a):
        return convolve(a, win, mode="nearest")

    mu_x, mu_y = filt(lx), filt(ly)
    sxx = filt(lx * lx) - mu_x**2
    syy = filt(ly * ly) - mu_y**2
    sxy = filt(lx * ly) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    # crop to the fully-valid interior to avoid border effects
    half = win_size // 2
    ssim_map = (num / den)[half:-half, half:-half]
    return float(ssim_map.mean())


_PREWITT_X = np.array([[1, 0, -1], [1, 0, -1], [1, 0, -1]], dtype=np.float64) / 3.0
_PREWITT_Y = _PREWITT_X.T


def gmsd(x, y, c=0.0026):
    """Gradient magnitude similarity deviation on luma.

    Standard recipe: 2x average-downsample, Prewitt gradients, similarity
    map (2*mx*my + c)/(mx^2 + my^2 + c), then its population std-dev.
    """
    x, y = _check(x, y)
    lx, ly = _luma(x), _luma(y)

    def down2(a):
        h, w = a.shape[0] // 2 * 2, a.shape[1] // 2 * 2
        a = a[:h, :w]
        return (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2]) / 4.0

    lx, ly = down2(lx), down2(ly)
    gx = np.hypot(convolve(lx, _PREWITT_X, mode="nearest"),
                  convolve(lx, _PREWITT_Y, mode="nearest"))
    gy = np.hypot(convolve(ly, _PREWITT_X, mode="nearest"),
                  convolve(ly, _PREWITT_Y, mode="nearest"))
    gms = (2 * gx * gy + c) / (gx**2 + gy**2 + c)
    return float(np.std(gms))


@dataclass(frozen=True)
class MetricReport:
    per_image: tuple  # (id, psnr, ssim, mae, gmsd)

    @property
    def means(self):
        cols = list(zip(*[row[1:] for row in self.per_image]))
        return tuple(float(np.mean(c)) for c in cols)

    def to_csv(self) -> str:
        lines = ["id,psnr,ssim,mae,gmsd"]
        for row in self.per_image:
            lines.append(",".join([row[0]] + [_fmt(v) for v in row[1:]]))
        lines.append(",".join(["mean"] + [_fmt(v) for v in self.means]))
        return "\n".join(lines) + "\n"


def _fmt(v):
    return "inf" if math.isinf(v) else f"{v:.6f}"


def evaluate_pairs(pairs):
    """pairs: iterable of (id, prediction, ground_truth) arrays."""
    rows = [
        (pid, psnr(pred, gt), ssim(pred, gt), mae(pred, gt), gmsd(pred, gt))
        for pid, pred, gt in pairs
    ]
    return MetricReport(per_image=tuple(rows))
