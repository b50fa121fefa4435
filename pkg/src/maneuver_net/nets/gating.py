"""Cross-stream multiplicative gating and 2-D to 3-D filter inflation."""

from __future__ import annotations

from typing import Callable

import numpy as np
import torch
import torch.nn.functional as F


def multiplicative_gate(x_a: torch.Tensor, x_m: torch.Tensor,
                        residual: Callable[[torch.Tensor], torch.Tensor],
                        f: Callable[[torch.Tensor], torch.Tensor] = F.relu) -> torch.Tensor:
    """Residual unit of the appearance path modulated by motion.

    Returns ``f(x_a) + residual(x_a * f(x_m))``. With ``f(x_m)`` all ones this
    is a plain residual unit; with ``f(x_m) == 0`` and ``residual(0) == 0`` it
    reduces to ``f(x_a)``.
    """
    gate = f(x_m)
    if gate.shape != x_a.shape:
        try:
            torch.broadcast_shapes(gate.shape, x_a.shape)
        except RuntimeError:
            raise ValueError(
                f"gate shape {tuple(gate.shape)} incompatible with {tuple(x_a.shape)}"
            ) from None
        if torch.broadcast_shapes(gate.shape, x_a.shape) != x_a.shape:
            raise ValueError(
                f"gate shape {tuple(gate.shape)} would broadcast {tuple(x_a.shape)}"
            )
    return f(x_a) + residual(x_a * gate)


def inflate_2d_weights(kernel2d, T: int):
    """Replicate a (Cout, Cin, kh, kw) kernel T times in time and divide by T.

    The result has shape (Cout, Cin, T, kh, kw). A clip that is constant in
    time gives the same per-frame response as the 2-D kernel (away from
    temporal padding), and the sum over time recovers the 2-D kernel.
    Accepts numpy arrays or torch tensors and returns the same kind.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if isinstance(kernel2d, torch.Tensor):
        if T == 1:
            return kernel2d.unsqueeze(2).clone()
        return kernel2d.unsqueeze(2).repeat(1, 1, T, 1, 1) / T
    k = np.asarray(kernel2d)
    if T == 1:
        return k[:, :, None].copy()
    return np.repeat(k[:, :, None], T, axis=2) / T
