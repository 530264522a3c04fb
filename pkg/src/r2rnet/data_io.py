"""Paired low/normal-light image loading and aligned patch sampling.

Dataset layout follows the LOL convention::

    <root>/low/<name>.{png|jpg}
    <root>/high/<name>.{png|jpg}

Names are matched exactly. Images are 8-bit PNG/JPEG, normalized to
[0, 1] floats on load (v / 255).
"""

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptImage,
    MissingDirectory,
    PatchTooLarge,
    RangeError,
    ShapeMismatch,
    UnmatchedPair,
    UnsupportedFormat,
)

_EXTENSIONS = {".png", ".jpg", ".jpeg"}


@dataclass(frozen=True)
class ImagePair:
    """A low-light image and its normal-light counterpart."""

    low: np.ndarray
    normal: np.ndarray
    id: str


@dataclass(frozen=True)
class PairedDataset:
    pairs: tuple
    root: Path
    manifest_hash: str

    def __len__(self):
        return len(self.pairs)

    def __getitem__(self, i):
        return self.pairs[i]


@dataclass(frozen=True)
class PatchBatch:
    """Aligned crops: low[k] and normal[k] come from the same origin."""

    low: torch.Tensor        # B x 3 x p x p
    normal: torch.Tensor     # B x 3 x p x p
    coords: tuple            # (pair_id, y, x) per batch index


def load_image(path) -> np.ndarray:
    """Load a PNG/JPEG as an H x W x 3 float array in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    if path.suffix.lower() not in _EXTENSIONS:
        raise UnsupportedFormat(f"unsupported extension {path.suffix!r}")
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")  # grayscale replicated, alpha dropped
            arr = np.asarray(img, dtype=np.float64) / 255.0
    except UnidentifiedImageError as e:
        raise CorruptImage(str(path)) from e
    except OSError as e:
        raise CorruptImage(str(path)) from e
    return arr


def save_image(image: np.ndarray, path) -> None:
    """Write an H x W x 3 array in [0, 1] as an 8-bit PNG."""
    image = np.asarray(image, dtype=np.float64)
    if image.min() < -1e-6 or image.max() > 1.0 + 1e-6:
        raise RangeError(
            f"values outside [0,1]: min={image.min():.6g} max={image.max():.6g}"
        )
    image = np.clip(image, 0.0, 1.0)
    data = np.rint(image * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(Path(path), format="PNG")


def _list_images(directory: Path):
    return {
        p.stem: p
        for p in sorted(directory.iterdir())
        if p.suffix.lower() in _EXTENSIONS
    }


def load_pair_dataset(root) -> PairedDataset:
    """Scan <root>/low and <root>/high and match pairs by filename stem."""
    root = Path(root)
    low_dir, high_dir = root / "low", root / "high"
    for d in (low_dir, high_dir):
        if not d.is_dir():
            raise MissingDirectory(str(d))
    low_files = _list_images(low_dir)
    high_files = _list_images(high_dir)
    for stem in sorted(set(low_files) ^ set(high_files)):
        path = low_files.get(stem) or high_files.get(stem)
        raise UnmatchedPair(path.name)
    if not low_files:
        raise UnmatchedPair("<empty dataset>")

    pairs = []
    digest_items = []
    for stem in sorted(low_files):
        low = load_image(low_files[stem])
        high = load_image(high_files[stem])
        if low.shape != high.shape:
            raise ShapeMismatch(
                f"pair {stem!r}: low {low.shape} vs high {high.shape}"
            )
        pairs.append(ImagePair(low=low, normal=high, id=stem))
        digest_items.append(f"{stem}:{low_files[stem].stat().st_size}")
    manifest_hash = hashlib.sha256("\n".join(digest_items).encode()).hexdigest()
    return PairedDataset(pairs=tuple(pairs), root=root, manifest_hash=manifest_hash)


def to_tensor(image: np.ndarray, dtype=torch.float32) -> torch.Tensor:
    """H x W x 3 array -> 3 x H x W tensor."""
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).to(dtype)


def to_image(tensor: torch.Tensor) -> np.ndarray:
    """3 x H x W (or 1 x H x W) tensor -> H x W x C array."""
    return tensor.detach().cpu().numpy().transpose(1, 2, 0)


def crop_pair(pair: ImagePair, y: int, x: int, patch_size: int):
    p = patch_size
    return pair.low[y : y + p, x : x + p], pair.normal[y : y + p, x : x + p]


def sample_aligned_patches(
    dataset: PairedDataset,
    batch_size: int,
    patch_size: int,
    rng: np.random.Generator,
    indices=None,
) -> PatchBatch:
    """Draw aligned random crops; identical origin for both images of a pair.

    `indices` overrides the uniform pair selection (used by the trainer for
    shuffled epochs); crop origins stay random either way.
    """
    p = patch_size
    for pair in dataset.pairs:
        h, w = pair.low.shape[:2]
        if h < p or w < p:
            raise PatchTooLarge(
                f"pair {pair.id!r} is {h}x{w}, smaller than patch {p}"
            )
    if indices is None:
        indices = rng.integers(0, len(dataset.pairs), size=batch_size)
    lows, nors, coords = [], [], []
    for i in indices:
        pair = dataset.pairs[int(i)]
        h, w = pair.low.shape[:2]
        y = int(rng.integers(0, h - p + 1))
        x = int(rng.integers(0, w - p + 1))
        lo, no = crop_pair(pair, y, x, p)
        lows.append(to_tensor(lo))
        nors.append(to_tensor(no))
        coords.append((pair.id, y, x))
    return PatchBatch(
        low=torch.stack(lows), normal=torch.stack(nors), coords=tuple(coords)
    )
