"""Shared test utilities: brute-force oracles, finite differences, toy data."""

import numpy as np
import torch
from scipy.ndimage import gaussian_filter

from r2rnet.data_io import ImagePair, PairedDataset


def dft2_reference(x):
    """Direct O(N^2) per-channel 2-D DFT of a C x H x W array."""
    x = np.asarray(x, dtype=np.float64)
    c, h, w = x.shape
    out = np.zeros((c, h, w), dtype=np.complex128)
    for ch in range(c):
        for u in range(h):
            for v in range(w):
                acc = 0.0
                for m in range(h):
                    for n in range(w):
                        acc += x[ch, m, n] * np.exp(-2j * np.pi * (u * m / h + v * n / w))
                out[ch, u, v] = acc
    return out


def complex_conv_reference(x, y, a, b):
    """Nested-loop (A*x - B*y) + j(B*x + A*y) with zero same-padding.

    x, y: in_ch x H x W; a, b: out_ch x in_ch x k x k. Cross-correlation
    convention, matching the framework's conv2d.
    """
    out_ch, in_ch, k, _ = a.shape
    _, h, w = x.shape
    pad = k // 2
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    yp = np.pad(y, ((0, 0), (pad, pad), (pad, pad)))

    def corr(img, weights):
        out = np.zeros((out_ch, h, w))
        for o in range(out_ch):
            for c in range(in_ch):
                for i in range(h):
                    for j in range(w):
                        out[o, i, j] += np.sum(
                            img[c, i : i + k, j : j + k] * weights[o, c]
                        )
        return out

    real = corr(xp, a) - corr(yp, b)
    imag = corr(xp, b) + corr(yp, a)
    return real, imag


def finite_difference_grad(fn, x, step=1e-4):
    """Central-difference gradient of scalar fn w.r.t. tensor x (float64)."""
    x = x.detach().clone().to(torch.float64)
    grad = torch.zeros_like(x)
    flat = x.view(-1)
    gflat = grad.view(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + step
            hi = float(fn(x))
            flat[i] = orig - step
            lo = float(fn(x))
            flat[i] = orig
            gflat[i] = (hi - lo) / (2 * step)
    return grad


def autograd_grad(fn, x):
    x = x.detach().clone().to(torch.float64).requires_grad_(True)
    out = fn(x)
    out.backward()
    return x.grad.detach()


def assert_grads_close(fn, x, rel=1e-4, step=1e-4):
    fd = finite_difference_grad(fn, x, step)
    ag = autograd_grad(fn, x)
    denom = fd.norm().clamp(min=1e-8)
    err = (fd - ag).norm() / denom
    assert err <= rel, f"gradient rel err {err:.3g} > {rel}"


def make_toy_pairs(n=8, size=64, noise_sigma=0.03, gamma=2.2, seed=1234):
    """Synthetic pairs: smoothed random normals, gamma-darkened noisy lows."""
    rng = np.random.default_rng(seed)
    pairs = []
    for i in range(n):
        normal = rng.uniform(0, 1, size=(size, size, 3))
        normal = gaussian_filter(normal, sigma=(4, 4, 0))
        normal = (normal - normal.min()) / (normal.max() - normal.min() + 1e-9)
        normal = 0.15 + 0.8 * normal  # keep away from the sigmoid rails
        low = normal**gamma + rng.normal(0, noise_sigma, size=normal.shape)
        low = np.clip(low, 0.0, 1.0)
        pairs.append(ImagePair(low=low, normal=normal, id=f"toy{i:02d}"))
    return PairedDataset(pairs=tuple(pairs), root=None, manifest_hash="toy")


def write_lol_fixture(root, n=6, size=32, seed=7):
    """Write an n-pair LOL-format dataset of PNGs under root."""
    from r2rnet.data_io import save_image

    root.joinpath("low").mkdir(parents=True)
    root.joinpath("high").mkdir(parents=True)
    dataset = make_toy_pairs(n=n, size=size, seed=seed)
    for pair in dataset.pairs:
        save_image(pair.low, root / "low" / f"{pair.id}.png")
        save_image(pair.normal, root / "high" / f"{pair.id}.png")
    return root
