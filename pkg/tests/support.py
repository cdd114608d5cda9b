"""Shared builders for the test suite."""

import torch

from gridee.events import GenConfig, default_schema, gen_synthetic
from gridee.model import GridEE, ModelConfig
from gridee.neural import PieceVocab


def tiny_corpus(count=20, seed=0, max_len=20, num_types=4, num_roles=3, **kw):
    cfg = GenConfig(sentence_count=count, max_len=max_len, seed=seed, **kw)
    return gen_synthetic(cfg, default_schema(num_types, num_roles))


def tiny_model(corpus, **kw):
    return GridEE(corpus.schema, PieceVocab.from_corpus(corpus), ModelConfig(**kw))


def generic_point(model, scale=0.3, seed=0):
    """Redraw every parameter from N(0, scale^2).

    The default initialisation leaves attention nearly uniform, where some
    gradients are so small that central differences only measure rounding.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for p in model.parameters():
            p.copy_(torch.randn(p.shape, generator=gen, dtype=p.dtype) * scale)
    return model
