"""Toy word encoder, parameter registry, gradient checker and checkpoints.

Everything runs in float64 on CPU.
"""

from __future__ import annotations

import json
import logging
import math
import random
import zlib
from dataclasses import asdict, dataclass

import torch
from torch import nn

logger = logging.getLogger(__name__)

DTYPE = torch.float64
CKPT_VERSION = "gridee-ckpt-1"
UNK = "<unk>"


@dataclass
class EncoderConfig:
    d_h: int = 32
    vocab_size: int = 0  # piece table size; filled in from the PieceVocab
    use_context_mixer: bool = True
    pieces_per_word: int = 2

    def __post_init__(self):
        if self.d_h < 8 or self.d_h % 2:
            raise ValueError(f"d_h must be even and >= 8, got {self.d_h}")
        if self.pieces_per_word not in (1, 2):
            raise ValueError("pieces_per_word must be 1 or 2")


class PieceVocab:
    """Splits a word into its word id and a suffix-hash id."""

    def __init__(self, words, n_suffix: int = 64):
        self.words = [UNK] + sorted(set(words) - {UNK})
        self.index = {w: k for k, w in enumerate(self.words)}
        self.n_suffix = n_suffix

    @classmethod
    def from_corpus(cls, corpus, n_suffix: int = 64) -> "PieceVocab":
        return cls((tok for s in corpus for tok in s.tokens), n_suffix)

    def __len__(self) -> int:
        return len(self.words) + self.n_suffix

    def pieces(self, word: str, pieces_per_word: int = 2) -> list[int]:
        ids = [self.index.get(word, 0)]
        if pieces_per_word > 1 and len(word) >= 3:
            ids.append(len(self.words) + zlib.crc32(word[-2:].encode("utf-8")) % self.n_suffix)
        return ids

    def to_json(self) -> dict:
        return {"words": self.words, "n_suffix": self.n_suffix}

    @classmethod
    def from_json(cls, obj) -> "PieceVocab":
        return cls(obj["words"], obj["n_suffix"])


def attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor, key_mask: torch.Tensor | None = None) -> torch.Tensor:
    """Scaled dot-product attention ``softmax(q k^T / sqrt(d)) v``.

    ``key_mask`` (bool, broadcastable to ``[..., n_k]``) hides padded keys.
    """
    logits = q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1])
    if key_mask is not None:
        logits = logits.masked_fill(~key_mask.unsqueeze(-2), float("-inf"))
    return torch.softmax(logits, dim=-1) @ v


def uniform_(t: torch.Tensor, bound: float, generator=None) -> torch.Tensor:
    with torch.no_grad():
        return t.uniform_(-bound, bound, generator=generator)


def xavier_(t: torch.Tensor, generator=None) -> torch.Tensor:
    fan_out, fan_in = t.shape[-2], t.shape[-1]
    return uniform_(t, math.sqrt(6.0 / (fan_in + fan_out)), generator)


class WordEncoder(nn.Module):
    """Piece embeddings, max pooling over pieces, optional self-attention mixer."""

    def __init__(self, config: EncoderConfig, generator=None):
        super().__init__()
        self.config = config
        d = config.d_h
        self.piece_embed = nn.Parameter(uniform_(torch.empty(config.vocab_size, d, dtype=DTYPE), 0.1, generator))
        if config.use_context_mixer:
            self.mix_q = nn.Parameter(xavier_(torch.empty(d, d, dtype=DTYPE), generator))
            self.mix_k = nn.Parameter(xavier_(torch.empty(d, d, dtype=DTYPE), generator))
            self.mix_v = nn.Parameter(xavier_(torch.empty(d, d, dtype=DTYPE), generator))

    def forward(self, pieces: torch.Tensor, word_mask: torch.Tensor | None = None) -> torch.Tensor:
        """``pieces`` is ``[..., N, P]`` with ``-1`` padding; returns ``H`` of shape ``[..., N, d_h]``."""
        if (pieces >= self.config.vocab_size).any():
            bad = int(pieces.max())
            raise ValueError(f"unknown piece id {bad} (table size {self.config.vocab_size})")
        present = pieces >= 0
        emb = self.piece_embed[pieces.clamp(min=0)]
        emb = emb.masked_fill(~present.unsqueeze(-1), float("-inf"))
        h = emb.max(dim=-2).values
        h = torch.where(present.any(-1, keepdim=True), h, torch.zeros_like(h))
        if self.config.use_context_mixer:
            key_mask = word_mask if word_mask is not None else present.any(-1)
            h = h + attention(h @ self.mix_q.T, h @ self.mix_k.T, h @ self.mix_v.T, key_mask)
        return h


def encode_words(encoder: WordEncoder, word_pieces: list[list[int]]) -> torch.Tensor:
    """Encode one sentence given each word's piece ids; returns ``[N, d_h]``."""
    width = encoder.config.pieces_per_word
    for k, ids in enumerate(word_pieces):
        if not 1 <= len(ids) <= width:
            raise ValueError(f"word {k} has {len(ids)} pieces, expected 1..{width}")
    pieces = torch.full((len(word_pieces), width), -1, dtype=torch.long)
    for k, ids in enumerate(word_pieces):
        pieces[k, : len(ids)] = torch.tensor(ids, dtype=torch.long)
    if (pieces < -1).any():
        raise ValueError("negative piece id")
    return encoder(pieces)


class ParamRegistry:
    """Named view over a module's trainable tensors."""

    def __init__(self, module: nn.Module):
        self.module = module

    def named(self) -> dict[str, nn.Parameter]:
        return dict(self.module.named_parameters())

    def grads(self) -> dict[str, torch.Tensor | None]:
        return {name: p.grad for name, p in self.module.named_parameters()}

    def zero_grad(self) -> None:
        self.module.zero_grad(set_to_none=False)

    def groups(self, prefix: str = "encoder.") -> tuple[list, list]:
        enc, rest = [], []
        for name, p in self.module.named_parameters():
            (enc if name.startswith(prefix) else rest).append(p)
        return enc, rest

    def state(self) -> dict:
        return {
            name: {"shape": list(p.shape), "data": p.detach().reshape(-1).tolist()}
            for name, p in self.module.named_parameters()
        }

    def load_state(self, state: dict) -> None:
        params = self.named()
        missing = set(params) ^ set(state)
        if missing:
            raise ValueError(f"checkpoint/parameter mismatch: {sorted(missing)}")
        with torch.no_grad():
            for name, p in params.items():
                entry = state[name]
                if list(p.shape) != list(entry["shape"]):
                    raise ValueError(f"shape mismatch for {name}: {entry['shape']} vs {list(p.shape)}")
                p.copy_(torch.tensor(entry["data"], dtype=p.dtype).reshape(p.shape))


def save_checkpoint(path, registry: ParamRegistry, **extra) -> None:
    doc = {"version": CKPT_VERSION, "params": registry.state()}
    for key, value in extra.items():
        doc[key] = asdict(value) if hasattr(value, "__dataclass_fields__") else value
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f)


def read_checkpoint(path) -> dict:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("version") != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    return doc


def grad_check(loss_fn, params, eps: float = 1e-5, tol: float | None = None,
               n_coords: int = 200, seed: int = 0, per_param: dict | None = None) -> float:
    """Compare autograd gradients with central differences.

    ``params`` is a module, a :class:`ParamRegistry` or a name -> tensor mapping.
    At least ``n_coords`` coordinates are probed, and every parameter gets at
    least one. Returns the max of ``|g_a - g_n| / max(|g_a|, |g_n|, 1e-8)``;
    ``per_param`` (if given) is filled with each parameter's worst error.
    """
    if isinstance(params, nn.Module):
        params = dict(params.named_parameters())
    elif isinstance(params, ParamRegistry):
        params = params.named()
    params = {name: p for name, p in params.items() if p.numel() > 0}
    if not params:
        raise ValueError("nothing to check")

    for p in params.values():
        p.grad = None
    loss = loss_fn()
    if not torch.isfinite(loss):
        raise ValueError(f"non-finite loss {loss.item()}")
    analytic = torch.autograd.grad(loss, list(params.values()), allow_unused=True)
    analytic = {
        name: (g if g is not None else torch.zeros_like(p)).reshape(-1)
        for (name, p), g in zip(params.items(), analytic)
    }

    rng = random.Random(seed)
    per = max(1, math.ceil(n_coords / len(params)))
    chosen = {name: rng.sample(range(p.numel()), min(per, p.numel())) for name, p in params.items()}
    total = sum(map(len, chosen.values()))
    while total < n_coords:
        spare = [n for n, p in params.items() if len(chosen[n]) < p.numel()]
        if not spare:
            break
        name = rng.choice(spare)
        left = sorted(set(range(params[name].numel())) - set(chosen[name]))
        chosen[name].append(rng.choice(left))
        total += 1

    def value() -> float:
        out = loss_fn()
        if not torch.isfinite(out):
            raise ValueError("non-finite loss during finite differencing")
        return out.item()

    worst = 0.0
    with torch.no_grad():
        for name, coords in chosen.items():
            flat = params[name].data.view(-1)
            for k in coords:
                orig = flat[k].item()
                flat[k] = orig + eps
                up = value()
                flat[k] = orig - eps
                down = value()
                flat[k] = orig
                g_n = (up - down) / (2 * eps)
                g_a = analytic[name][k].item()
                err = abs(g_a - g_n) / max(abs(g_a), abs(g_n), 1e-8)
                worst = max(worst, err)
                if per_param is not None:
                    per_param[name] = max(per_param.get(name, 0.0), err)
    if tol is not None and worst > tol:
        logger.warning("gradient check: max relative error %.3g exceeds %.3g", worst, tol)
    return worst
