"""Spatiotemporal multiplier network.

Two residual streams (appearance, motion) with the bottleneck layout of a
50-layer ResNet, run frame-wise with 1-D temporal convolutions after the last
two stages. The second unit of every stage in the appearance stream is
multiplicatively gated by the motion stream's activation at the same depth.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from ..windowing import temporal_resample
from .common import NUM_CLASSES, VideoClassifier, appearance_to_tensor, flow_to_tensor, init_weights, scaled
from .gating import multiplicative_gate

RESNET50_BLOCKS = (3, 4, 6, 3)


@dataclass
class STMConfig:
    blocks: tuple[int, ...] = RESNET50_BLOCKS
    planes: tuple[int, ...] = (64, 128, 256, 512)
    expansion: int = 4
    stem_channels: int = 64
    stem_stride: int = 2
    # (stage index, block index) pairs whose appearance unit is gated
    gated_blocks: tuple[tuple[int, int], ...] | None = None
    # stages followed by a temporal convolution (0-based)
    temporal_stages: tuple[int, ...] = (2, 3)
    temporal_kernel: int = 3
    clip_len: int | None = None
    dropout: float = 0.5
    width_multiplier: float = 1.0

    def __post_init__(self):
        if len(self.blocks) != len(self.planes):
            raise ValueError("blocks and planes must have one entry per stage")
        if min(self.blocks) < 2 and self.gated_blocks is None:
            raise ValueError("each stage needs an identity unit (>= 2 blocks) to gate")

    def gate_sites(self) -> set[tuple[int, int]]:
        if self.gated_blocks is not None:
            return set(self.gated_blocks)
        return {(s, 1) for s in range(len(self.blocks))}


class Bottleneck(nn.Module):
    """1x1 -> 3x3 -> 1x1 residual unit; optional motion gate on the residual input."""

    def __init__(self, c_in: int, planes: int, c_out: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, planes, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, stride, 1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.conv3 = nn.Conv2d(planes, c_out, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(c_out)
        self.shortcut = None
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Sequential(nn.Conv2d(c_in, c_out, 1, stride, bias=False), nn.BatchNorm2d(c_out))

    def residual(self, x: torch.Tensor) -> torch.Tensor:
        x = F.relu(self.bn1(self.conv1(x)))
        x = F.relu(self.bn2(self.conv2(x)))
        return self.bn3(self.conv3(x))

    def forward(self, x: torch.Tensor, gate: torch.Tensor | None = None) -> torch.Tensor:
        if gate is not None:
            if self.shortcut is not None:
                raise ValueError("gating needs an identity shortcut")
            return F.relu(multiplicative_gate(x, gate, self.residual))
        skip = x if self.shortcut is None else self.shortcut(x)
        return F.relu(skip + self.residual(x))


class TemporalConv(nn.Module):
    """Channel-mixing 1-D convolution over time, initialised to the identity."""

    def __init__(self, channels: int, kernel: int = 3):
        super().__init__()
        self.conv = nn.Conv1d(channels, channels, kernel, padding=kernel // 2, bias=False)
        self.reset_identity()

    @torch.no_grad()
    def reset_identity(self):
        w = self.conv.weight
        w.zero_()
        idx = torch.arange(w.shape[0])
        w[idx, idx, w.shape[2] // 2] = 1.0

    def forward(self, x: torch.Tensor, T: int) -> torch.Tensor:
        BT, C, H, W = x.shape
        B = BT // T
        y = x.reshape(B, T, C, H, W).permute(0, 3, 4, 2, 1).reshape(B * H * W, C, T)
        y = self.conv(y)
        return y.reshape(B, H, W, C, T).permute(0, 4, 3, 1, 2).reshape(BT, C, H, W)


class ResidualStream(nn.Module):
    def __init__(self, in_channels: int, cfg: STMConfig):
        super().__init__()
        w = cfg.width_multiplier
        stem = scaled(cfg.stem_channels, w)
        self.stem = nn.Sequential(
            nn.Conv2d(in_channels, stem, 7, cfg.stem_stride, 3, bias=False),
            nn.BatchNorm2d(stem),
            nn.ReLU(inplace=True),
            nn.MaxPool2d(3, 2, 1),
        )
        self.stages = nn.ModuleList()
        self.temporal = nn.ModuleDict()
        c_in = stem
        for s, (n, p) in enumerate(zip(cfg.blocks, cfg.planes)):
            planes = scaled(p, w)
            c_out = planes * cfg.expansion
            units = []
            for b in range(n):
                stride = 2 if (b == 0 and s > 0) else 1
                units.append(Bottleneck(c_in, planes, c_out, stride))
                c_in = c_out
            self.stages.append(nn.ModuleList(units))
            if s in cfg.temporal_stages:
                self.temporal[str(s)] = TemporalConv(c_out, cfg.temporal_kernel)
        self.out_channels = c_in


class STMNet(VideoClassifier):
    """Appearance stream gated by motion; per-stream heads, softmax-averaged."""

    name = "stm"
    GATE_MODES = ("motion", "ones", "off")

    def __init__(self, cfg: STMConfig | None = None):
        super().__init__()
        self.cfg = cfg or STMConfig()
        self.appearance = ResidualStream(3, self.cfg)
        self.motion = ResidualStream(2, self.cfg)
        for stream in (self.appearance, self.motion):
            init_weights(stream)
            for tc in stream.temporal.values():
                tc.reset_identity()
        c = self.appearance.out_channels
        self.dropout = nn.Dropout(self.cfg.dropout)
        self.head_a = nn.Linear(c, NUM_CLASSES)
        self.head_m = nn.Linear(c, NUM_CLASSES)
        init_weights(self.head_a, relu_gain=False)
        init_weights(self.head_m, relu_gain=False)
        self.sites = self.cfg.gate_sites()
        self.gate_mode = "motion"

    def prepare(self, app, flow):
        a = appearance_to_tensor(app)[:, 1:]  # frame t+1 pairs with flow t -> t+1
        f = flow_to_tensor(flow)
        if self.cfg.clip_len is not None:
            idx = temporal_resample(range(f.shape[1]), self.cfg.clip_len)
            a, f = a[:, idx], f[:, idx]
        return a.contiguous(), f.contiguous()

    def check_inputs(self, app, flow):
        if app.ndim != 5 or app.shape[2] != 3:
            raise ValueError(f"appearance clip must be (B, T, 3, H, W), got {tuple(app.shape)}")
        if flow.ndim != 5 or flow.shape[2] != 2:
            raise ValueError(f"flow clip must be (B, T, 2, H, W), got {tuple(flow.shape)}")
        if app.shape[:2] != flow.shape[:2] or app.shape[3:] != flow.shape[3:]:
            raise ValueError("appearance and flow clips must match in batch, length and size")

    def forward(self, app, flow):
        self.check_inputs(app, flow)
        if self.gate_mode not in self.GATE_MODES:
            raise ValueError(f"gate_mode must be one of {self.GATE_MODES}")
        B, T = app.shape[:2]
        xa = self.appearance.stem(app.reshape(B * T, *app.shape[2:]))
        xm = self.motion.stem(flow.reshape(B * T, *flow.shape[2:]))
        for s, (units_a, units_m) in enumerate(zip(self.appearance.stages, self.motion.stages)):
            for b, (ua, um) in enumerate(zip(units_a, units_m)):
                gate = None
                if (s, b) in self.sites and self.gate_mode != "off":
                    gate = xm if self.gate_mode == "motion" else torch.ones_like(xm)
                xm_next = um(xm)
                xa = ua(xa, gate)
                xm = xm_next
            key = str(s)
            if key in self.appearance.temporal:
                xa = self.appearance.temporal[key](xa, T)
                xm = self.motion.temporal[key](xm, T)
        fa = xa.mean(dim=(2, 3)).reshape(B, T, -1).mean(dim=1)
        fm = xm.mean(dim=(2, 3)).reshape(B, T, -1).mean(dim=1)
        return [self.head_a(self.dropout(fa)), self.head_m(self.dropout(fm))]
