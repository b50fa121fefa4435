"""SlowFast network on raw appearance clips.

The slow pathway sees every ``tau``-th frame with full channel width; the
fast pathway sees ``alpha`` times as many frames with ``beta`` of the
channels. Fast features are merged into the slow pathway by time-strided
lateral convolutions after the stem and after every residual block but the
last.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import torch
import torch.nn.functional as F
from torch import nn

from ..windowing import temporal_resample
from .common import NUM_CLASSES, VideoClassifier, appearance_to_tensor, init_weights, scaled


@dataclass
class SlowFastConfig:
    tau: int = 16
    alpha: int = 8
    beta: Fraction = Fraction(1, 8)
    clip_len: int = 64
    stem_channels: int = 64
    # inner widths of the five residual blocks (outputs are 4x)
    block_planes: tuple[int, ...] = (64, 128, 256, 512, 512)
    block_strides: tuple[int, ...] = (1, 2, 2, 2, 1)
    # slow pathway temporal kernel per block; early blocks are frame-wise
    slow_temporal: tuple[int, ...] = (1, 1, 1, 3, 3)
    expansion: int = 4
    stem_stride: int = 2
    lateral_kernel: int = 5
    dropout: float = 0.5
    width_multiplier: float = 1.0

    def __post_init__(self):
        self.beta = Fraction(self.beta)
        if self.tau % self.alpha:
            raise ValueError("tau must be a multiple of alpha")
        if len(self.block_planes) != 5:
            raise ValueError("SlowFast here is one conv layer and five residual blocks")
        if self.clip_len < self.tau:
            raise ValueError("clip_len must be >= tau")

    @property
    def fast_stride(self) -> int:
        return self.tau // self.alpha

    def slow_width(self, c: int) -> int:
        # multiples of 1/beta keep the fast widths exact
        return scaled(c, self.width_multiplier, self.beta.denominator)

    def fast_width(self, c: int) -> int:
        return int(self.slow_width(c) * self.beta)


def slowfast_sample(clip, cfg: SlowFastConfig | None = None) -> tuple[list[int], list[int]]:
    """Frame indices for the slow and fast pathways of a clip.

    ``clip`` is a frame count or anything with a length. Uses
    ``len // tau`` whole slow periods aligned to the end of the clip, so
    ``len(fast) == alpha * len(slow)`` for any length >= tau.
    """
    cfg = cfg or SlowFastConfig()
    clip_len = clip if isinstance(clip, int) else len(clip)
    if clip_len < cfg.tau:
        raise ValueError(f"clip of {clip_len} frames is shorter than tau={cfg.tau}")
    periods = clip_len // cfg.tau
    offset = clip_len - periods * cfg.tau
    slow = [offset + i * cfg.tau for i in range(periods)]
    fast = [offset + j * cfg.fast_stride for j in range(cfg.alpha * periods)]
    return slow, fast


class Bottleneck3d(nn.Module):
    def __init__(self, c_in, planes, c_out, stride, kt):
        super().__init__()
        self.a = nn.Conv3d(c_in, planes, (kt, 1, 1), 1, (kt // 2, 0, 0), bias=False)
        self.a_bn = nn.BatchNorm3d(planes)
        self.b = nn.Conv3d(planes, planes, (1, 3, 3), (1, stride, stride), (0, 1, 1), bias=False)
        self.b_bn = nn.BatchNorm3d(planes)
        self.c = nn.Conv3d(planes, c_out, 1, bias=False)
        self.c_bn = nn.BatchNorm3d(c_out)
        self.shortcut = None
        if stride != 1 or c_in != c_out:
            self.shortcut = nn.Sequential(
                nn.Conv3d(c_in, c_out, 1, (1, stride, stride), bias=False), nn.BatchNorm3d(c_out)
            )

    def forward(self, x):
        skip = x if self.shortcut is None else self.shortcut(x)
        y = F.relu(self.a_bn(self.a(x)))
        y = F.relu(self.b_bn(self.b(y)))
        y = self.c_bn(self.c(y))
        return F.relu(skip + y)


class Lateral(nn.Module):
    """Fast -> slow fusion: time-strided conv doubling the fast channels."""

    def __init__(self, c_fast, cfg: SlowFastConfig):
        super().__init__()
        k = cfg.lateral_kernel
        self.conv = nn.Conv3d(c_fast, 2 * c_fast, (k, 1, 1), (cfg.alpha, 1, 1), (k // 2, 0, 0), bias=False)
        self.bn = nn.BatchNorm3d(2 * c_fast)

    def forward(self, fast):
        return F.relu(self.bn(self.conv(fast)))


class SlowFastNet(VideoClassifier):
    name = "slowfast"
    uses_flow = False

    def __init__(self, cfg: SlowFastConfig | None = None):
        super().__init__()
        cfg = self.cfg = cfg or SlowFastConfig()
        s_stem, f_stem = cfg.slow_width(cfg.stem_channels), cfg.fast_width(cfg.stem_channels)
        st = cfg.stem_stride
        self.slow_stem = nn.Sequential(
            nn.Conv3d(3, s_stem, (1, 7, 7), (1, st, st), (0, 3, 3), bias=False),
            nn.BatchNorm3d(s_stem), nn.ReLU(inplace=True),
            nn.MaxPool3d((1, 3, 3), (1, 2, 2), (0, 1, 1)),
        )
        self.fast_stem = nn.Sequential(
            nn.Conv3d(3, f_stem, (5, 7, 7), (1, st, st), (2, 3, 3), bias=False),
            nn.BatchNorm3d(f_stem), nn.ReLU(inplace=True),
            nn.MaxPool3d((1, 3, 3), (1, 2, 2), (0, 1, 1)),
        )
        self.laterals = nn.ModuleList([Lateral(f_stem, cfg)])
        self.slow_blocks = nn.ModuleList()
        self.fast_blocks = nn.ModuleList()
        # pathway widths before lateral concatenation, for the channel audit
        self.stage_channels = [(s_stem, f_stem)]
        s_in, f_in = s_stem, f_stem
        n = len(cfg.block_planes)
        for i, (p, stride, kt) in enumerate(zip(cfg.block_planes, cfg.block_strides, cfg.slow_temporal)):
            s_out = cfg.slow_width(p) * cfg.expansion
            f_out = cfg.fast_width(p) * cfg.expansion
            self.slow_blocks.append(
                Bottleneck3d(s_in + 2 * f_in, cfg.slow_width(p), s_out, stride, kt)
            )
            self.fast_blocks.append(Bottleneck3d(f_in, cfg.fast_width(p), f_out, stride, 3))
            self.stage_channels.append((s_out, f_out))
            if i < n - 1:
                self.laterals.append(Lateral(f_out, cfg))
            s_in, f_in = s_out, f_out
        self.dropout = nn.Dropout(cfg.dropout)
        self.fc = nn.Linear(s_in + f_in, NUM_CLASSES)
        init_weights(self)
        init_weights(self.fc, relu_gain=False)
        self.lateral_enabled = True

    def prepare(self, app, flow=None):
        a = appearance_to_tensor(app)
        idx = temporal_resample(range(a.shape[1]), self.cfg.clip_len)
        return (a[:, idx].transpose(1, 2).contiguous(),)

    def check_inputs(self, clip):
        if clip.ndim != 5 or clip.shape[1] != 3:
            raise ValueError(f"clip must be (B, 3, T, H, W), got {tuple(clip.shape)}")
        if clip.shape[2] < self.cfg.tau:
            raise ValueError(f"clip has {clip.shape[2]} frames, fewer than tau={self.cfg.tau}")

    def pathways(self, clip):
        slow_idx, fast_idx = slowfast_sample(clip.shape[2], self.cfg)
        return clip[:, :, slow_idx], clip[:, :, fast_idx]

    def _fuse(self, slow, fast, lateral):
        lat = lateral(fast)
        if not self.lateral_enabled:
            lat = torch.zeros_like(lat)
        return torch.cat([slow, lat], dim=1)

    def forward(self, clip):
        self.check_inputs(clip)
        slow, fast = self.pathways(clip)
        slow = self.slow_stem(slow)
        fast = self.fast_stem(fast)
        for i, (sb, fb) in enumerate(zip(self.slow_blocks, self.fast_blocks)):
            slow = self._fuse(slow, fast, self.laterals[i])
            slow, fast = sb(slow), fb(fast)
        feat = torch.cat([slow.mean(dim=(2, 3, 4)), fast.mean(dim=(2, 3, 4))], dim=1)
        return [self.fc(self.dropout(feat))]
