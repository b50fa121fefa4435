"""Pieces shared by every classifier: score containers, fusion, input prep."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import torch
import torch.nn.functional as F
from torch import nn

NUM_CLASSES = 3


@dataclass
class ClassScores:
    """Batch of 3-class scores, class order NLC, LLC, RLC."""

    logits: torch.Tensor
    probabilities: torch.Tensor

    @classmethod
    def from_logits(cls, logits: torch.Tensor) -> "ClassScores":
        return cls(logits, F.softmax(logits, dim=-1))

    def predicted(self) -> torch.Tensor:
        # torch.argmax returns the first maximal index: ties go to NLC first
        return torch.argmax(self.probabilities, dim=-1)


def fuse_probabilities(head_logits: Sequence[torch.Tensor]) -> torch.Tensor:
    """Late fusion: mean of the per-head softmax distributions."""
    probs = torch.stack([F.softmax(z, dim=-1) for z in head_logits], dim=0)
    return probs.mean(dim=0)


def fused_scores(head_logits: Sequence[torch.Tensor]) -> ClassScores:
    if len(head_logits) == 1:
        return ClassScores.from_logits(head_logits[0])
    probs = fuse_probabilities(head_logits)
    return ClassScores(torch.log(probs.clamp_min(1e-30)), probs)


def head_loss(head_logits: Sequence[torch.Tensor], target: torch.Tensor,
              weight: torch.Tensor | None = None) -> torch.Tensor:
    """Sum of per-head cross-entropies; each stream learns its own classifier."""
    return sum(F.cross_entropy(z, target, weight=weight) for z in head_logits)


def scaled(channels: int, width: float, multiple: int = 1) -> int:
    """Channel count under a width multiplier, rounded to ``multiple``."""
    c = int(round(channels * width / multiple)) * multiple
    return max(c, multiple)


def appearance_to_tensor(app: torch.Tensor) -> torch.Tensor:
    """(B, T, H, W, 3) uint8 -> (B, T, 3, H, W) float in [-1, 1]."""
    return app.permute(0, 1, 4, 2, 3).float().div_(127.5).sub_(1.0)


def flow_to_tensor(flow: torch.Tensor) -> torch.Tensor:
    """(B, L, H, W, 2) conditioned flow -> (B, L, 2, H, W) float."""
    return flow.permute(0, 1, 4, 2, 3).float()


class VideoClassifier(nn.Module):
    """Base class: ``forward`` returns a list of per-head logits."""

    name = "model"
    uses_flow = True

    def prepare(self, app: torch.Tensor, flow: torch.Tensor | None) -> tuple:
        """Map raw clip tensors to the positional inputs of ``forward``."""
        raise NotImplementedError

    def check_inputs(self, *inputs) -> None:
        """Validate shapes before a forward pass."""

    @torch.no_grad()
    def scores(self, *inputs) -> ClassScores:
        self.check_inputs(*inputs)
        was_training = self.training
        self.eval()
        try:
            return fused_scores(self(*inputs))
        finally:
            self.train(was_training)


def init_weights(module: nn.Module, relu_gain: bool = True) -> None:
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Conv2d, nn.Conv3d)):
            nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.Linear):
            nn.init.kaiming_uniform_(m.weight, nonlinearity="relu" if relu_gain else "linear")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d, nn.BatchNorm3d)):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


Activation = Callable[[torch.Tensor], torch.Tensor]
