"""The full scorer: encoder -> event fusion -> rotary pair scores."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from .codec import RoleStrategy
from .events import Schema
from .fusion import EventFusion
from .neural import (
    EncoderConfig,
    ParamRegistry,
    PieceVocab,
    WordEncoder,
    read_checkpoint,
    save_checkpoint,
)
from .predictor import DEFAULT_BASE, RelationPredictor


@dataclass
class ModelConfig:
    d_h: int = 32
    d_p: int | None = None
    rotary_base: float = DEFAULT_BASE
    use_context_mixer: bool = True
    pieces_per_word: int = 2
    n_suffix: int = 64
    strategy: str = "tw-aw"
    seed: int = 0


class GridEE(nn.Module):
    def __init__(self, schema: Schema, vocab: PieceVocab, config: ModelConfig | None = None):
        super().__init__()
        self.schema = schema
        self.vocab = vocab
        self.config = config = config or ModelConfig()
        self.strategy = RoleStrategy.parse(config.strategy)
        gen = torch.Generator().manual_seed(config.seed)
        enc_cfg = EncoderConfig(config.d_h, len(vocab), config.use_context_mixer, config.pieces_per_word)
        self.encoder = WordEncoder(enc_cfg, gen)
        self.fusion = EventFusion(len(schema.event_types), config.d_h, gen)
        self.predictor = RelationPredictor(schema.num_labels, config.d_h, config.d_p, config.rotary_base, gen)

    @property
    def registry(self) -> ParamRegistry:
        return ParamRegistry(self)

    def pieces(self, sentences) -> tuple[torch.Tensor, torch.Tensor]:
        """Padded piece ids ``[B, N, P]`` (``-1`` = pad) and word mask ``[B, N]``."""
        width = self.config.pieces_per_word
        n = max(len(s.tokens) for s in sentences)
        rows = []
        for s in sentences:
            row = [[-1] * width for _ in range(n)]
            for k, tok in enumerate(s.tokens):
                ids = self.vocab.pieces(tok, width)
                row[k][: len(ids)] = ids
            rows.append(row)
        pieces = torch.tensor(rows, dtype=torch.long)
        return pieces, pieces[..., 0] >= 0

    def forward(self, pieces: torch.Tensor, mask: torch.Tensor, types: torch.Tensor) -> torch.Tensor:
        """Scores ``[B, K, L, N, N]`` for the ``[B, K]`` requested event types."""
        h = self.encoder(pieces, mask)
        v = self.fusion(h, types)
        return self.predictor(v)

    def score(self, sentences, types) -> torch.Tensor:
        pieces, mask = self.pieces(sentences)
        types = torch.as_tensor(types, dtype=torch.long)
        if types.dim() == 1:
            types = types.expand(len(sentences), -1)
        return self(pieces, mask, types)

    def save(self, path) -> None:
        save_checkpoint(
            path,
            self.registry,
            config=asdict(self.config),
            schema=self.schema.to_json(),
            vocab=self.vocab.to_json(),
        )

    @classmethod
    def load(cls, path) -> "GridEE":
        doc = read_checkpoint(path)
        model = cls(Schema.from_json(doc["schema"]), PieceVocab.from_json(doc["vocab"]), ModelConfig(**doc["config"]))
        model.registry.load_state(doc["params"])
        return model
