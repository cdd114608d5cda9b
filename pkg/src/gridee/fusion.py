"""Adaptive event fusion: attention over event-type embeddings plus two gates."""

from __future__ import annotations

import torch
from torch import nn

from .neural import DTYPE, attention, uniform_, xavier_

__all__ = ["attention", "gate", "Gate", "EventFusion", "fuse"]


def gate(p: torch.Tensor, q: torch.Tensor, weight: torch.Tensor, bias: torch.Tensor) -> torch.Tensor:
    """``g * p + (1 - g) * q`` with ``g = sigmoid(weight @ [p; q] + bias)``.

    ``weight`` is ``[d, 2d]``; ``p`` and ``q`` broadcast against each other.
    The concatenation is applied as two half-products so that a shared ``p``
    is projected once.
    """
    d = p.shape[-1]
    g = torch.sigmoid(p @ weight[:, :d].T + q @ weight[:, d:].T + bias)
    return g * p + (1 - g) * q


class Gate(nn.Module):
    def __init__(self, d: int, generator=None):
        super().__init__()
        self.weight = nn.Parameter(xavier_(torch.empty(d, 2 * d, dtype=DTYPE), generator))
        self.bias = nn.Parameter(torch.zeros(d, dtype=DTYPE))

    def forward(self, p, q):
        return gate(p, q, self.weight, self.bias)


class EventFusion(nn.Module):
    """Produces event-aware word representations ``V^t`` for requested types."""

    def __init__(self, num_types: int, d: int, generator=None):
        super().__init__()
        self.event_embed = nn.Parameter(uniform_(torch.empty(num_types, d, dtype=DTYPE), 0.1, generator))
        self.w_q = nn.Parameter(xavier_(torch.empty(d, d, dtype=DTYPE), generator))
        self.w_k = nn.Parameter(xavier_(torch.empty(d, d, dtype=DTYPE), generator))
        self.w_v = nn.Parameter(xavier_(torch.empty(d, d, dtype=DTYPE), generator))
        self.gate_global = Gate(d, generator)
        self.gate_target = Gate(d, generator)

    def forward(self, h: torch.Tensor, types: torch.Tensor) -> torch.Tensor:
        """``h``: ``[B, N, d]``, ``types``: ``[B, K]`` -> ``[B, K, N, d]``."""
        return fuse(h, self.event_embed, types, self)


def fuse(h: torch.Tensor, event_embed: torch.Tensor, types, fusion: EventFusion) -> torch.Tensor:
    """Fuse word states ``h`` (``[..., N, d]``) with event embeddings.

    ``types`` indexes rows of ``event_embed``; an int gives ``[..., N, d]``, a
    ``[..., K]`` index tensor gives ``[..., K, N, d]``.
    """
    m = event_embed.shape[0]
    single = isinstance(types, int)
    types = torch.as_tensor(types, dtype=torch.long)
    if ((types < 0) | (types >= m)).any():
        raise ValueError(f"event type index out of range [0, {m})")
    if single:
        types = types.expand(*h.shape[:-2], 1)
    keys = event_embed @ fusion.w_k.T
    values = event_embed @ fusion.w_v.T
    global_events = attention(h @ fusion.w_q.T, keys, values)
    h_g = fusion.gate_global(h, global_events).unsqueeze(-3)  # [..., 1, N, d]
    # second gate: project every type embedding once, then gather, so a type's
    # output does not depend on which other types share the call
    d = h.shape[-1]
    weight, bias = fusion.gate_target.weight, fusion.gate_target.bias
    target = event_embed[types].unsqueeze(-2)  # [..., K, 1, d]
    target_proj = (event_embed @ weight[:, d:].T)[types].unsqueeze(-2)
    g = torch.sigmoid(h_g @ weight[:, :d].T + target_proj + bias)
    v = g * h_g + (1 - g) * target
    return v.squeeze(-3) if single else v
