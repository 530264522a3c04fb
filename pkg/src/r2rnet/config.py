"""Flat key=value config files mirroring TrainConfig fields.

Example::

    lr = 0.001
    epochs = 20
    lambda6 = 0.01
    disable_drm = true

Flags given on the command line override file values.
"""

from dataclasses import fields, replace

from .losses import LossWeights
from .trainer import AblationConfig, TrainConfig

_BOOLS = {"true": True, "false": False, "1": True, "0": False,
          "yes": True, "no": False}


def _coerce(value: str, target_type):
    value = value.strip()
    if target_type is bool:
        try:
            return _BOOLS[value.lower()]
        except KeyError:
            raise ValueError(f"not a boolean: {value!r}") from None
    return target_type(value)


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def config_from_mapping(values: dict, base: TrainConfig = None) -> TrainConfig:
    config = base or TrainConfig()
    weights = config.loss_weights
    ablation = config.ablation
    top = {f.name: f.type for f in fields(TrainConfig)}
    lam = {f.name: f.type for f in fields(LossWeights)}
    abl = {f.name: f.type for f in fields(AblationConfig)}
    simple = {"lr": float, "beta1": float, "beta2": float, "eps": float,
              "batch_size": int, "patch_size": int, "epochs": int,
              "lr_decay_epoch": int, "lr_after_decay": float, "seed": int,
              "perceptual_pretrained": bool}
    updates = {}
    for key, value in values.items():
        if key in simple:
            updates[key] = _coerce(value, simple[key])
        elif key in lam:
            weights = replace(weights, **{key: _coerce(value, float)})
        elif key in abl:
            ablation = replace(ablation, **{key: _coerce(value, bool)})
        elif key in top:
            raise ValueError(f"key {key!r} cannot be set from a config file")
        else:
            raise ValueError(f"unknown config key {key!r}")
    if "epochs" in updates and "lr_decay_epoch" not in updates:
        updates["lr_decay_epoch"] = min(config.lr_decay_epoch, updates["epochs"])
    return replace(config, loss_weights=weights, ablation=ablation, **updates)


def load_config(path, base: TrainConfig = None) -> TrainConfig:
    with open(path) as fh:
        return config_from_mapping(parse_config_text(fh.read()), base)


def config_to_dict(config: TrainConfig) -> dict:
    out = {k: v for k, v in vars(config).items()
           if k not in ("loss_weights", "ablation")}
    out.update(vars(config.loss_weights))
    out.update(vars(config.ablation))
    return out
