"""Retinex-based low-light enhancement: decompose, denoise, relight."""

from .decom_net import DecomNet, Decomposition, compose, decompose
from .denoise_net import DenoiseNet, denoise
from .relight_net import EnhancedResult, RelightNet, relight
from .losses import LossWeights, PerceptualExtractor
from .trainer import StageCheckpoint, TrainConfig, train_stage
from .pipeline import enhance_image, load_pipeline

__all__ = [
    "DecomNet", "Decomposition", "compose", "decompose",
    "DenoiseNet", "denoise",
    "RelightNet", "EnhancedResult", "relight",
    "LossWeights", "PerceptualExtractor",
    "StageCheckpoint", "TrainConfig", "train_stage",
    "enhance_image", "load_pipeline",
]

__version__ = "0.1.0"
