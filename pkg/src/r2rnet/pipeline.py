"""Inference pipeline: decompose -> denoise -> relight -> compose."""

import torch

from .data_io import to_image, to_tensor
from .trainer import StageCheckpoint, TrainConfig, net_from_checkpoint, _frozen


def load_pipeline(decom_ckpt: StageCheckpoint, denoise_ckpt: StageCheckpoint,
                  relight_ckpt: StageCheckpoint, config: TrainConfig = None):
    return {
        "decom": _frozen(net_from_checkpoint(decom_ckpt, config)),
        "denoise": _frozen(net_from_checkpoint(denoise_ckpt, config)),
        "relight": _frozen(net_from_checkpoint(relight_ckpt, config)),
    }


@torch.no_grad()
def enhance_image(image, nets):
    """Enhance one H x W x 3 array; returns all intermediates as arrays."""
    x = to_tensor(image).unsqueeze(0)
    d = nets["decom"](x)
    r_hat = nets["denoise"](d.reflectance, d.illumination)
    result = nets["relight"](r_hat, d.illumination)
    return {
        "reflectance": to_image(d.reflectance[0]),
        "illumination": to_image(d.illumination[0]),
        "denoised_reflectance": to_image(r_hat[0]),
        "enhanced_illumination": to_image(result.enhanced_illumination[0]),
        "enhanced": to_image(result.enhanced_image[0]),
    }
