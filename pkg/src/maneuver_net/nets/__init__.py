"""Lane-change classifiers and a name-based factory."""

from __future__ import annotations

from dataclasses import fields

from .common import (
    NUM_CLASSES,
    ClassScores,
    VideoClassifier,
    fuse_probabilities,
    fused_scores,
    head_loss,
)
from .disjoint import BaselineNet, DisjointConfig, DisjointNet
from .gating import inflate_2d_weights, multiplicative_gate
from .i3d import I3DConfig, I3DNet
from .slowfast import SlowFastConfig, SlowFastNet, slowfast_sample
from .stm import STMConfig, STMNet

MODEL_NAMES = ("baseline", "disjoint", "i3d", "stm", "slowfast")

_CONFIGS = {
    "baseline": DisjointConfig,
    "disjoint": DisjointConfig,
    "i3d": I3DConfig,
    "stm": STMConfig,
    "slowfast": SlowFastConfig,
}

# Desk-scale settings: thin layers and early spatial downsampling so a
# 300-window training run fits in minutes on one CPU core.
TOY_PRESETS = {
    "baseline": {"width_multiplier": 1 / 16},
    "disjoint": {"width_multiplier": 1 / 16},
    "i3d": {"width_multiplier": 1 / 16, "stem_stride": 2},
    "stm": {"width_multiplier": 1 / 16, "blocks": (2, 2, 2, 2), "stem_stride": 2, "clip_len": 8},
    "slowfast": {"width_multiplier": 1 / 8, "stem_stride": 2, "clip_len": 32},
}

FULL_PRESETS = {name: {} for name in MODEL_NAMES}

FULL_BATCH_SIZE = {name: 32 for name in MODEL_NAMES} | {"slowfast": 8}


def model_config(name: str, preset: str = "toy", **overrides):
    """Resolved config dataclass for a model; ``overrides`` win over the preset."""
    if name not in _CONFIGS:
        raise ValueError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
    presets = {"toy": TOY_PRESETS, "full": FULL_PRESETS}
    if preset not in presets:
        raise ValueError(f"unknown preset {preset!r}")
    cls = _CONFIGS[name]
    known = {f.name for f in fields(cls)}
    kw = dict(presets[preset][name])
    kw.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(kw) - known
    if unknown:
        raise ValueError(f"{name} config has no field(s) {sorted(unknown)}")
    for k, v in kw.items():
        if isinstance(v, list):
            kw[k] = tuple(tuple(x) if isinstance(x, list) else x for x in v)
    return cls(**kw)


def build_model(name: str, preset: str = "toy", flow_fields: int = 19, **overrides) -> VideoClassifier:
    """Instantiate a classifier by name.

    ``flow_fields`` is the number of stacked flow fields the disjoint motion
    stream takes (N - 1 for an N-frame window).
    """
    cfg = model_config(name, preset, **overrides)
    if name == "baseline":
        return BaselineNet(cfg)
    if name == "disjoint":
        return DisjointNet(flow_fields, cfg)
    if name == "i3d":
        return I3DNet(cfg)
    if name == "stm":
        return STMNet(cfg)
    return SlowFastNet(cfg)


__all__ = [
    "MODEL_NAMES",
    "NUM_CLASSES",
    "FULL_BATCH_SIZE",
    "BaselineNet",
    "ClassScores",
    "DisjointConfig",
    "DisjointNet",
    "I3DConfig",
    "I3DNet",
    "STMConfig",
    "STMNet",
    "SlowFastConfig",
    "SlowFastNet",
    "VideoClassifier",
    "build_model",
    "fuse_probabilities",
    "fused_scores",
    "head_loss",
    "inflate_2d_weights",
    "model_config",
    "multiplicative_gate",
    "slowfast_sample",
]
