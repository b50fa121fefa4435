"""Two-stream inflated 3-D ConvNet.

Each stream is 8 conv layers, 5 pooling layers and 2 fully connected layers,
batch-normalised throughout. The 3-D stream can be bootstrapped from its 2-D
twin (:class:`Plain2dStream`) by inflating every kernel in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from ..windowing import temporal_resample
from .common import NUM_CLASSES, VideoClassifier, appearance_to_tensor, flow_to_tensor, init_weights, scaled
from .gating import inflate_2d_weights

CLIP_LEN = 16


@dataclass
class I3DConfig:
    # conv widths; "P" marks a pooling layer
    layout: tuple = (64, "P", 128, "P", 256, 256, "P", 512, 512, "P", 512, 512, "P")
    fc_layers: tuple[int, ...] = (2048, NUM_CLASSES)
    kernel_t: int = 3
    clip_len: int = CLIP_LEN
    stem_stride: int = 1
    dropout: float = 0.5
    width_multiplier: float = 1.0
    input_size: int = 112

    def __post_init__(self):
        if self.clip_len != CLIP_LEN:
            raise ValueError("inflated 3-D streams take 16-frame clips")
        convs = [x for x in self.layout if x != "P"]
        if len(convs) != 8 or self.layout.count("P") != 5 or len(self.fc_layers) != 2:
            raise ValueError("stream is 8 conv, 5 pool and 2 fc layers")

    def pool_kernels(self):
        # first pool is spatial only so early layers keep temporal detail
        return [(1, 2, 2)] + [(2, 2, 2)] * 4


class I3DStream(nn.Module):
    def __init__(self, in_channels: int, cfg: I3DConfig):
        super().__init__()
        self.cfg = cfg
        layers = []
        c_in = in_channels
        pools = iter(cfg.pool_kernels())
        first = True
        for item in cfg.layout:
            if item == "P":
                k = next(pools)
                layers.append(nn.MaxPool3d(k, k, ceil_mode=True))
                continue
            c_out = scaled(item, cfg.width_multiplier)
            stride = (1, cfg.stem_stride, cfg.stem_stride) if first else 1
            layers += [
                nn.Conv3d(c_in, c_out, (cfg.kernel_t, 3, 3), stride, (cfg.kernel_t // 2, 1, 1), bias=False),
                nn.BatchNorm3d(c_out),
                nn.ReLU(inplace=True),
            ]
            c_in = c_out
            first = False
        self.features = nn.Sequential(*layers)
        hidden = scaled(cfg.fc_layers[0], cfg.width_multiplier)
        self.fc6 = nn.Sequential(
            nn.Linear(c_in, hidden, bias=False),
            nn.BatchNorm1d(hidden),
            nn.ReLU(inplace=True),
            nn.Dropout(cfg.dropout),
        )
        self.fc7 = nn.Linear(hidden, cfg.fc_layers[1])
        init_weights(self)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.features(x)
        x = x.mean(dim=(2, 3, 4))
        return self.fc7(self.fc6(x))

    def first_conv(self) -> nn.Conv3d:
        return self.features[0]


class Plain2dStream(nn.Module):
    """2-D twin of :class:`I3DStream` used as an inflation source."""

    def __init__(self, in_channels: int, cfg: I3DConfig):
        super().__init__()
        layers = []
        c_in = in_channels
        first = True
        for item in cfg.layout:
            if item == "P":
                layers.append(nn.MaxPool2d(2, 2, ceil_mode=True))
                continue
            c_out = scaled(item, cfg.width_multiplier)
            stride = cfg.stem_stride if first else 1
            layers += [
                nn.Conv2d(c_in, c_out, 3, stride, 1, bias=False),
                nn.BatchNorm2d(c_out),
                nn.ReLU(inplace=True),
            ]
            c_in = c_out
            first = False
        self.features = nn.Sequential(*layers)
        hidden = scaled(cfg.fc_layers[0], cfg.width_multiplier)
        self.fc6 = nn.Sequential(
            nn.Linear(c_in, hidden, bias=False), nn.BatchNorm1d(hidden), nn.ReLU(inplace=True), nn.Dropout(cfg.dropout)
        )
        self.fc7 = nn.Linear(hidden, cfg.fc_layers[1])
        init_weights(self)

    def forward(self, x):
        x = self.features(x).mean(dim=(2, 3))
        return self.fc7(self.fc6(x))


@torch.no_grad()
def inflate_stream(stream3d: I3DStream, stream2d: Plain2dStream) -> I3DStream:
    """Copy a 2-D stream's parameters into the 3-D stream, inflating kernels."""
    convs3 = [m for m in stream3d.features if isinstance(m, nn.Conv3d)]
    convs2 = [m for m in stream2d.features if isinstance(m, nn.Conv2d)]
    bns3 = [m for m in stream3d.features if isinstance(m, nn.BatchNorm3d)]
    bns2 = [m for m in stream2d.features if isinstance(m, nn.BatchNorm2d)]
    for c3, c2 in zip(convs3, convs2):
        c3.weight.copy_(inflate_2d_weights(c2.weight, c3.kernel_size[0]))
    for b3, b2 in zip(bns3 + [stream3d.fc6[1]], bns2 + [stream2d.fc6[1]]):
        b3.load_state_dict(b2.state_dict())
    stream3d.fc6[0].load_state_dict(stream2d.fc6[0].state_dict())
    stream3d.fc7.load_state_dict(stream2d.fc7.state_dict())
    return stream3d


class I3DNet(VideoClassifier):
    name = "i3d"

    def __init__(self, cfg: I3DConfig | None = None):
        super().__init__()
        self.cfg = cfg or I3DConfig()
        self.appearance = I3DStream(3, self.cfg)
        self.motion = I3DStream(2, self.cfg)

    def prepare(self, app, flow):
        a = appearance_to_tensor(app)
        f = flow_to_tensor(flow)
        ia = temporal_resample(range(a.shape[1]), self.cfg.clip_len)
        im = temporal_resample(range(f.shape[1]), self.cfg.clip_len)
        # (B, T, C, H, W) -> (B, C, T, H, W)
        return a[:, ia].transpose(1, 2).contiguous(), f[:, im].transpose(1, 2).contiguous()

    def check_inputs(self, app, flow):
        for name, x, c in (("appearance", app, 3), ("flow", flow, 2)):
            if x.ndim != 5 or x.shape[1] != c:
                raise ValueError(f"{name} clip must be (B, {c}, T, H, W), got {tuple(x.shape)}")
            if x.shape[2] != self.cfg.clip_len:
                raise ValueError(f"{name} clip has {x.shape[2]} frames, expected {self.cfg.clip_len}")

    def forward(self, app, flow):
        self.check_inputs(app, flow)
        return [self.appearance(app), self.motion(flow)]

    @classmethod
    def from_2d(cls, app2d: Plain2dStream, flow2d: Plain2dStream, cfg: I3DConfig | None = None) -> "I3DNet":
        net = cls(cfg)
        inflate_stream(net.appearance, app2d)
        inflate_stream(net.motion, flow2d)
        return net
