"""Appearance baseline and the disjoint (late-fusion) two-stream network."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .common import NUM_CLASSES, VideoClassifier, appearance_to_tensor, flow_to_tensor, init_weights, scaled


@dataclass(frozen=True)
class ConvStage:
    channels: int
    kernel: int
    stride: int
    pool: bool


@dataclass
class DisjointConfig:
    conv_layers: tuple[ConvStage, ...] = (
        ConvStage(64, 7, 2, True),
        ConvStage(128, 5, 2, True),
        ConvStage(256, 3, 1, False),
        ConvStage(512, 3, 1, False),
        ConvStage(512, 3, 1, True),
    )
    fc_layers: tuple[int, ...] = (4096, 2048, NUM_CLASSES)
    pool_size: int = 3
    pool_stride: int = 2
    dropout: float = 0.5
    width_multiplier: float = 1.0
    input_size: int = 112

    def __post_init__(self):
        if self.fc_layers[-1] != NUM_CLASSES:
            raise ValueError("last fully connected layer must have 3 outputs")
        if len(self.conv_layers) != 5 or len(self.fc_layers) != 3:
            raise ValueError("stream is 5 conv + 3 fc layers")


class StreamCNN(nn.Module):
    """Five conv layers, 3x3/2 max-pooling, three fully connected layers."""

    def __init__(self, in_channels: int, cfg: DisjointConfig):
        super().__init__()
        layers = []
        c_in = in_channels
        for st in cfg.conv_layers:
            c_out = scaled(st.channels, cfg.width_multiplier)
            layers += [nn.Conv2d(c_in, c_out, st.kernel, st.stride, st.kernel // 2), nn.ReLU(inplace=True)]
            if st.pool:
                layers.append(nn.MaxPool2d(cfg.pool_size, cfg.pool_stride))
            c_in = c_out
        self.features = nn.Sequential(*layers)
        with torch.no_grad():
            n_flat = self.features(torch.zeros(1, in_channels, cfg.input_size, cfg.input_size)).numel()
        hidden = [scaled(w, cfg.width_multiplier) for w in cfg.fc_layers[:-1]]
        fcs = []
        prev = n_flat
        for w in hidden:
            fcs += [nn.Linear(prev, w), nn.ReLU(inplace=True), nn.Dropout(cfg.dropout)]
            prev = w
        fcs.append(nn.Linear(prev, cfg.fc_layers[-1]))
        self.classifier = nn.Sequential(*fcs)
        init_weights(self)

    @property
    def head(self) -> nn.Linear:
        return self.classifier[-1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(torch.flatten(self.features(x), 1))


class BaselineNet(VideoClassifier):
    """Appearance stream alone: per-frame logits averaged over the clip."""

    name = "baseline"
    uses_flow = False

    def __init__(self, cfg: DisjointConfig | None = None):
        super().__init__()
        self.cfg = cfg or DisjointConfig()
        self.appearance = StreamCNN(3, self.cfg)

    def prepare(self, app, flow=None):
        return (appearance_to_tensor(app),)

    def check_inputs(self, clip):
        s = self.cfg.input_size
        if clip.ndim != 5 or tuple(clip.shape[2:]) != (3, s, s):
            raise ValueError(f"appearance clip must be (B, N, 3, {s}, {s}), got {tuple(clip.shape)}")

    def appearance_logits(self, clip: torch.Tensor) -> torch.Tensor:
        B, T = clip.shape[:2]
        per_frame = self.appearance(clip.reshape(B * T, *clip.shape[2:]))
        return per_frame.reshape(B, T, -1).mean(dim=1)

    def forward(self, clip):
        self.check_inputs(clip)
        return [self.appearance_logits(clip)]


class DisjointNet(BaselineNet):
    """Appearance stream plus a motion stream over 2L stacked flow channels."""

    name = "disjoint"
    uses_flow = True

    def __init__(self, flow_fields: int, cfg: DisjointConfig | None = None):
        super().__init__(cfg)
        self.flow_fields = flow_fields
        self.motion = StreamCNN(2 * flow_fields, self.cfg)

    def prepare(self, app, flow):
        f = flow_to_tensor(flow)
        B, L = f.shape[:2]
        return appearance_to_tensor(app), f.reshape(B, L * 2, *f.shape[3:])

    def check_inputs(self, clip, stack):
        super().check_inputs(clip)
        s = self.cfg.input_size
        if stack.ndim != 4 or tuple(stack.shape[1:]) != (2 * self.flow_fields, s, s):
            raise ValueError(
                f"flow stack must be (B, {2 * self.flow_fields}, {s}, {s}), got {tuple(stack.shape)}"
            )
        if stack.shape[0] != clip.shape[0]:
            raise ValueError("appearance and motion batches differ in size")

    def forward(self, clip, stack):
        self.check_inputs(clip, stack)
        return [self.appearance_logits(clip), self.motion(stack)]
