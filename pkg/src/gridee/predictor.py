"""Distance-aware word-pair scoring with rotary position embeddings."""

from __future__ import annotations

import torch
from torch import nn

from .neural import DTYPE, xavier_

DEFAULT_BASE = 10000.0


class RotaryTable:
    """Cached cos/sin of ``m * theta_k`` with ``theta_k = base ** (-2k / d)``."""

    def __init__(self, dim: int, base: float = DEFAULT_BASE):
        if dim % 2:
            raise ValueError(f"rotary dimension must be even, got {dim}")
        self.dim = dim
        self.base = base
        self.theta = base ** (-torch.arange(0, dim, 2, dtype=DTYPE) / dim)
        self._cache: dict[int, tuple[torch.Tensor, torch.Tensor]] = {}

    def angles(self, positions: torch.Tensor) -> torch.Tensor:
        return positions.to(DTYPE).unsqueeze(-1) * self.theta

    def cos_sin(self, n: int) -> tuple[torch.Tensor, torch.Tensor]:
        if n not in self._cache:
            ang = self.angles(torch.arange(n))
            self._cache[n] = (torch.cos(ang), torch.sin(ang))
        return self._cache[n]


def _rotate(x: torch.Tensor, cos: torch.Tensor, sin: torch.Tensor) -> torch.Tensor:
    even, odd = x[..., 0::2], x[..., 1::2]
    out = torch.stack((even * cos - odd * sin, even * sin + odd * cos), dim=-1)
    return out.flatten(-2)


def rotate(p: torch.Tensor, m, base: float = DEFAULT_BASE) -> torch.Tensor:
    """Rotate consecutive pairs ``(2k, 2k+1)`` of ``p`` by angle ``m * theta_k``.

    ``m`` may be a scalar position or a tensor broadcastable to ``p.shape[:-1]``.
    """
    table = RotaryTable(p.shape[-1], base)
    ang = table.angles(torch.as_tensor(m))
    return _rotate(p, torch.cos(ang), torch.sin(ang))


def pair_score(a: torch.Tensor, b: torch.Tensor, i, j, base: float = DEFAULT_BASE) -> torch.Tensor:
    """``(R_i a) . (R_j b)``, which equals ``a^T R_{j-i} b``."""
    return (rotate(a, i, base) * rotate(b, j, base)).sum(-1)


class RelationPredictor(nn.Module):
    """One projection pair per label; scores every word pair of ``V^t``."""

    def __init__(self, num_labels: int, d_h: int, d_p: int | None = None,
                 base: float = DEFAULT_BASE, generator=None):
        super().__init__()
        d_p = d_h if d_p is None else d_p
        self.rotary = RotaryTable(d_p, base)
        self.w1 = nn.Parameter(xavier_(torch.empty(num_labels, d_p, d_h, dtype=DTYPE), generator))
        self.w2 = nn.Parameter(xavier_(torch.empty(num_labels, d_p, d_h, dtype=DTYPE), generator))

    def forward(self, v: torch.Tensor) -> torch.Tensor:
        return score_grids(v, self)


def score_grids(v: torch.Tensor, predictor: RelationPredictor) -> torch.Tensor:
    """``v``: ``[..., N, d_h]`` -> scores ``[..., L, N, N]``.

    Cell ``(l, i, j)`` is ``pair_score(W_l1 v_i, W_l2 v_j, i, j)``; every cell is
    filled, masking of the span lower triangle is left to the caller.
    """
    n = v.shape[-2]
    labels, d_p, _ = predictor.w1.shape
    cos, sin = predictor.rotary.cos_sin(n)
    cos, sin = cos.unsqueeze(-2), sin.unsqueeze(-2)  # [N, 1, d_p/2]

    def project(weight):
        x = (v @ weight.reshape(labels * d_p, -1).T).unflatten(-1, (labels, d_p // 2, 2))
        even, odd = x[..., 0], x[..., 1]
        # pair order inside the vector is irrelevant to the dot product
        rotated = torch.cat((even * cos - odd * sin, even * sin + odd * cos), dim=-1)
        return rotated.transpose(-2, -3)  # [..., L, N, d_p]

    return project(predictor.w1) @ project(predictor.w2).transpose(-1, -2)
