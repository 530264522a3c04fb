"""Three-stage training: decomposition, denoising, then relighting.

Each stage owns its parameters; upstream networks are loaded frozen.
Optimization is plain Adam with the bias-corrected moment recurrence and
a single learning-rate drop at the configured epoch. Checkpoints are a
versioned binary blob (JSON header + little-endian float32 tensors + CRC
trailer) carrying weights, optimizer moments, and the data RNG state.
"""

import json
import math
import os
import zlib
from dataclasses import dataclass, field, replace

import numpy as np
import torch

from .data_io import PairedDataset, sample_aligned_patches
from .decom_net import DecomNet
from .denoise_net import DenoiseNet
from .errors import (
    ChecksumMismatch,
    DivergedLoss,
    MissingUpstream,
    NonFiniteGrad,
    ShapeError,
    VersionMismatch,
)
from .losses import (
    LossWeights,
    PerceptualExtractor,
    decom_loss,
    denoise_loss,
    relight_loss,
)
from .nn_utils import kaiming_init_
from .relight_net import RelightNet

STAGES = ("decom", "denoise", "relight")
FORMAT_VERSION = 1
_MAGIC = b"R2RN"


@dataclass(frozen=True)
class AblationConfig:
    disable_cem: bool = False
    disable_drm: bool = False
    mse_content: bool = False
    no_perceptual: bool = False
    no_frequency: bool = False


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 4
    patch_size: int = 96
    epochs: int = 20
    lr_decay_epoch: int = 10
    lr_after_decay: float = 1e-4
    loss_weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    ablation: AblationConfig = field(default_factory=AblationConfig)
    perceptual_pretrained: bool = False

    def __post_init__(self):
        if not (0 < self.lr_after_decay <= self.lr):
            raise ValueError("require 0 < lr_after_decay <= lr")
        if self.lr_decay_epoch > self.epochs:
            raise ValueError("lr_decay_epoch must not exceed epochs")

    def effective_weights(self) -> LossWeights:
        w = self.loss_weights
        if self.ablation.no_perceptual:
            w = replace(w, lambda3=0.0, lambda4=0.0, lambda5=0.0)
        if self.ablation.no_frequency:
            w = replace(w, lambda6=0.0)
        return w


@dataclass
class StageCheckpoint:
    stage: str
    weights: dict              # name -> float32 tensor
    optimizer_state: dict      # {"step": int, "m": {...}, "v": {...}}
    rng_state: dict            # numpy Generator bit-generator state
    epoch: int
    format_version: int = FORMAT_VERSION


def adam_step(params, grads, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update over parallel tensor lists."""
    if len(params) != len(grads):
        raise ShapeError("params/grads length mismatch")
    if state is None:
        state = {
            "step": 0,
            "m": [torch.zeros_like(p) for p in params],
            "v": [torch.zeros_like(p) for p in params],
        }
    state["step"] += 1
    t = state["step"]
    bc1 = 1 - beta1**t
    bc2 = 1 - beta2**t
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state["m"], state["v"]):
            if g is None:
                g = torch.zeros_like(p)
            if g.shape != p.shape:
                raise ShapeError(f"grad shape {tuple(g.shape)} vs param {tuple(p.shape)}")
            if not torch.isfinite(g).all():
                raise NonFiniteGrad("non-finite gradient")
            m.mul_(beta1).add_(g, alpha=1 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1 - beta2)
            p.add_(-lr * (m / bc1) / ((v / bc2).sqrt() + eps))
    return params, state


def build_net(stage, config: TrainConfig):
    gen = torch.Generator().manual_seed(config.seed + 1000 * STAGES.index(stage))
    if stage == "decom":
        net = DecomNet()
    elif stage == "denoise":
        net = DenoiseNet()
    elif stage == "relight":
        net = RelightNet(
            disable_cem=config.ablation.disable_cem,
            disable_drm=config.ablation.disable_drm,
        )
    else:
        raise ValueError(f"unknown stage {stage!r}")
    kaiming_init_(net, gen)
    return net


def net_from_checkpoint(ckpt: StageCheckpoint, config: TrainConfig = None):
    config = config or TrainConfig()
    net = build_net(ckpt.stage, config)
    net.load_state_dict({k: v for k, v in ckpt.weights.items()})
    return net


def _frozen(net):
    for p in net.parameters():
        p.requires_grad_(False)
    net.eval()
    return net


class RunLog:
    def __init__(self, path=None, echo=False):
        self.path = path
        self.echo = echo
        self._fh = open(path, "w") if path else None

    def write(self, line):
        if self._fh:
            self._fh.write(line + "\n")
            self._fh.flush()
        if self.echo:
            print(line)

    def close(self):
        if self._fh:
            self._fh.close()


def train_stage(stage, dataset: PairedDataset, config: TrainConfig,
                upstream=None, log=None, max_steps=None):
    """Train one subnet and return its checkpoint.

    upstream: dict of stage name -> StageCheckpoint for frozen prerequisites.
    max_steps truncates the epoch schedule (used by desk-scale runs/tests).
    """
    upstream = upstream or {}
    required = {"decom": (), "denoise": ("decom",), "relight": ("decom", "denoise")}
    for dep in required[stage]:
        if dep not in upstream:
            raise MissingUpstream(f"stage {stage!r} requires a {dep!r} checkpoint")

    net = build_net(stage, config)
    decom = denoiser = None
    if "decom" in upstream:
        decom = _frozen(net_from_checkpoint(upstream["decom"], config))
    if "denoise" in upstream:
        denoiser = _frozen(net_from_checkpoint(upstream["denoise"], config))

    weights = config.effective_weights()
    needs_perceptual = {
        "decom": weights.lambda3, "denoise": weights.lambda4, "relight": weights.lambda5,
    }[stage] != 0
    extractor = (
        PerceptualExtractor(pretrained=config.perceptual_pretrained, seed=config.seed)
        if needs_perceptual else None
    )

    rng = np.random.default_rng(config.seed)
    params = [p for p in net.parameters() if p.requires_grad]
    state = None
    own_log = log is None
    log = log or RunLog()
    step = 0
    steps_per_epoch = math.ceil(len(dataset) / config.batch_size)
    epoch = 0
    try:
        for epoch in range(config.epochs):
            lr = config.lr if epoch < config.lr_decay_epoch else config.lr_after_decay
            order = rng.permutation(len(dataset))
            epoch_losses = []
            for b in range(steps_per_epoch):
                if max_steps is not None and step >= max_steps:
                    break
                indices = order[b * config.batch_size : (b + 1) * config.batch_size]
                batch = sample_aligned_patches(
                    dataset, len(indices), config.patch_size, rng, indices=indices
                )
                loss = _stage_loss(
                    stage, net, batch, weights, extractor, config, decom, denoiser
                )
                if not torch.isfinite(loss):
                    raise DivergedLoss(step, float(loss))
                net.zero_grad(set_to_none=True)
                loss.backward()
                grads = [p.grad for p in params]
                params, state = adam_step(
                    params, grads, state, lr, config.beta1, config.beta2, config.eps
                )
                log.write(f"epoch={epoch} step={step} loss={loss.item():.6f} lr={lr:g}")
                epoch_losses.append(loss.item())
                step += 1
            if epoch_losses:
                log.write(
                    f"epoch={epoch} mean_loss={float(np.mean(epoch_losses)):.6f} lr={lr:g}"
                )
            if max_steps is not None and step >= max_steps:
                break
    finally:
        if own_log:
            log.close()

    return StageCheckpoint(
        stage=stage,
        weights={k: v.detach().clone() for k, v in net.state_dict().items()},
        optimizer_state={
            "step": state["step"] if state else 0,
            "m": {_param_names(net)[i]: t for i, t in enumerate(state["m"])} if state else {},
            "v": {_param_names(net)[i]: t for i, t in enumerate(state["v"])} if state else {},
        },
        rng_state=rng.bit_generator.state,
        epoch=epoch,
    )


def _param_names(net):
    return [n for n, p in net.named_parameters() if p.requires_grad]


def _stage_loss(stage, net, batch, weights, extractor, config, decom, denoiser):
    s_low, s_nor = batch.low, batch.normal
    if stage == "decom":
        d_low = net(s_low)
        d_nor = net(s_nor)
        return decom_loss(
            d_low.reflectance, d_low.illumination,
            d_nor.reflectance, d_nor.illumination,
            s_low, s_nor, weights, extractor,
        )
    with torch.no_grad():
        d_low = decom(s_low)
        d_nor = decom(s_nor)
    if stage == "denoise":
        r_hat = net(d_low.reflectance, d_low.illumination)
        return denoise_loss(r_hat, d_nor.reflectance, weights.lambda4, extractor)
    with torch.no_grad():
        r_hat = denoiser(d_low.reflectance, d_low.illumination)
    result = net(r_hat, d_low.illumination)
    return relight_loss(
        result.enhanced_image, s_nor, weights.lambda5, weights.lambda6,
        extractor, mse_content=config.ablation.mse_content,
    )


# ---------------------------------------------------------------------------
# checkpoint serialization

def _tensor_manifest(ckpt: StageCheckpoint):
    entries = []
    for name in sorted(ckpt.weights):
        entries.append(("w", name, ckpt.weights[name]))
    for kind in ("m", "v"):
        for name in sorted(ckpt.optimizer_state[kind]):
            entries.append((kind, name, ckpt.optimizer_state[kind][name]))
    return entries


def save_checkpoint(ckpt: StageCheckpoint, path):
    entries = _tensor_manifest(ckpt)
    header = {
        "format_version": ckpt.format_version,
        "stage": ckpt.stage,
        "epoch": ckpt.epoch,
        "optimizer_step": ckpt.optimizer_state["step"],
        "rng_state": _jsonable(ckpt.rng_state),
        "tensors": [
            {"kind": kind, "name": name, "shape": list(t.shape)}
            for kind, name, t in entries
        ],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode()
    body = bytearray()
    body += _MAGIC
    body += FORMAT_VERSION.to_bytes(4, "little")
    body += len(header_bytes).to_bytes(8, "little")
    body += header_bytes
    for _, _, t in entries:
        body += t.detach().cpu().to(torch.float32).numpy().astype("<f4").tobytes()
    crc = zlib.crc32(bytes(body))
    body += crc.to_bytes(4, "little")
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(bytes(body))
    os.replace(tmp, path)


def load_checkpoint(path) -> StageCheckpoint:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:4] != _MAGIC:
        raise ChecksumMismatch(f"not a checkpoint file: {path}")
    crc_stored = int.from_bytes(data[-4:], "little")
    if zlib.crc32(data[:-4]) != crc_stored:
        raise ChecksumMismatch(f"CRC mismatch in {path}")
    version = int.from_bytes(data[4:8], "little")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"format version {version}, expected {FORMAT_VERSION}")
    header_len = int.from_bytes(data[8:16], "little")
    header = json.loads(data[16 : 16 + header_len].decode())
    offset = 16 + header_len
    weights, moments = {}, {"m": {}, "v": {}}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        raw = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        t = torch.from_numpy(raw.copy()).reshape(entry["shape"])
        if entry["kind"] == "w":
            weights[entry["name"]] = t
        else:
            moments[entry["kind"]][entry["name"]] = t
    return StageCheckpoint(
        stage=header["stage"],
        weights=weights,
        optimizer_state={"step": header["optimizer_step"], **moments},
        rng_state=header["rng_state"],
        epoch=header["epoch"],
        format_version=header["format_version"],
    )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": str(obj.dtype)}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj
