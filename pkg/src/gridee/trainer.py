"""Circle-loss training with positive/negative event-type sampling."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field

import numpy as np
import torch

from .codec import ROLE_OFFSET, encode_sentence
from .events import Corpus
from .model import GridEE, ModelConfig
from .neural import ParamRegistry, PieceVocab

logger = logging.getLogger(__name__)


@dataclass
class LossConfig:
    delta: float = 0.0
    k: int = 6

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("K must be >= 1")


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 8
    lr_encoder: float = 1e-3
    lr_other: float = 1e-3
    weight_decay: float = 0.0
    seed: int = 0
    eval_every: int = 1
    clip_norm: float | None = None

    def __post_init__(self):
        if self.lr_encoder < 0 or self.lr_other < 0:
            raise ValueError("learning rates must be non-negative")


class TrainingDiverged(RuntimeError):
    pass


def circle_loss(scores: torch.Tensor, positive: torch.Tensor, valid: torch.Tensor | None = None,
                delta: float = 0.0) -> torch.Tensor:
    """``log(e^d + sum_pos e^-c) + log(e^d + sum_neg e^c)`` over the last dim.

    ``positive`` marks the pair set; ``valid`` (default all) limits which cells
    take part at all. Leading dims are kept.
    """
    if valid is None:
        valid = torch.ones_like(positive, dtype=torch.bool)
    neg_inf = torch.tensor(float("-inf"), dtype=scores.dtype)
    pos_terms = torch.where(positive & valid, -scores, neg_inf)
    neg_terms = torch.where(~positive & valid, scores, neg_inf)
    pad = torch.full((*scores.shape[:-1], 1), delta, dtype=scores.dtype)
    return (torch.logsumexp(torch.cat((pad, pos_terms), -1), -1)
            + torch.logsumexp(torch.cat((pad, neg_terms), -1), -1))


def sample_event_types(gold, m: int, k: int, rng: random.Random, rotation: int = 0) -> list[int]:
    """Pick ``min(k, m)`` distinct types: one positive, then negatives.

    The positive is ``sorted(gold)[rotation % |gold|]``. Negatives are drawn
    uniformly without replacement from types absent in the sentence. If there
    are too few absent types, the remaining gold types fill the set.
    """
    size = min(k, m)
    gold = sorted(set(gold))
    absent = [t for t in range(m) if t not in set(gold)]
    if not gold:
        return rng.sample(absent, size)
    first = rotation % len(gold)
    positives = gold[first:] + gold[:first]
    chosen = [positives[0]]
    chosen += rng.sample(absent, min(size - 1, len(absent)))
    chosen += positives[1 : 1 + size - len(chosen)]
    return chosen


def valid_cells(lengths: torch.Tensor, n: int, num_labels: int) -> torch.Tensor:
    """``[B, L, N, N]`` mask of cells that take part in the loss."""
    idx = torch.arange(n)
    inside = idx < lengths.unsqueeze(-1)  # [B, N]
    pair = inside.unsqueeze(-1) & inside.unsqueeze(-2)
    upper = idx.unsqueeze(-1) <= idx.unsqueeze(0)
    span = pair & upper
    return torch.stack([span, span] + [pair] * (num_labels - ROLE_OFFSET), dim=1)


def grid_loss(scores: torch.Tensor, gold: torch.Tensor, valid: torch.Tensor, delta: float) -> torch.Tensor:
    """Per (sentence, type) loss summed over labels: ``[B, K, L, N, N] -> [B, K]``."""
    flat = scores.flatten(-2)
    loss = circle_loss(flat, gold.flatten(-2), valid.unsqueeze(1).flatten(-2), delta)
    return loss.sum(-1)


def pad_gold(grids, n: int) -> torch.Tensor:
    """Stack per-sentence ``[K, L, n_b, n_b]`` bool arrays into ``[B, K, L, n, n]``."""
    k, labels = grids[0].shape[:2]
    out = np.zeros((len(grids), k, labels, n, n), dtype=bool)
    for b, g in enumerate(grids):
        nb = g.shape[-1]
        out[b, :, :, :nb, :nb] = g
    return torch.from_numpy(out)


def total_loss(model: GridEE, sentence, types, delta: float = 0.0) -> torch.Tensor:
    """Sum over the given types of every label's circle loss for one sentence."""
    gold = encode_sentence(sentence, model.strategy, model.schema)[list(types)]
    scores = model.score([sentence], [list(types)])
    n = len(sentence.tokens)
    valid = valid_cells(torch.tensor([n]), n, model.schema.num_labels)
    return grid_loss(scores, pad_gold([gold], n), valid, delta).sum()


def build_optimizer(model: torch.nn.Module, config: TrainConfig) -> torch.optim.AdamW:
    """AdamW with the ``encoder.*`` parameters and the rest in separate groups."""
    enc, rest = ParamRegistry(model).groups("encoder.")
    groups = [{"params": enc, "lr": config.lr_encoder}, {"params": rest, "lr": config.lr_other}]
    return torch.optim.AdamW(
        [g for g in groups if g["params"]],
        betas=(0.9, 0.999),
        eps=1e-8,
        weight_decay=config.weight_decay,
    )


def optimizer_step(optimizer: torch.optim.Optimizer, named_params) -> None:
    """Refuse non-finite gradients, then apply one AdamW update."""
    for name, p in named_params:
        if p.grad is not None and not torch.isfinite(p.grad).all():
            raise FloatingPointError(f"non-finite gradient in parameter {name!r}")
    optimizer.step()


@dataclass
class TrainResult:
    model: GridEE
    log: list = field(default_factory=list)
    best_epoch: int | None = None
    best_tc_f1: float | None = None


def train(train_corpus: Corpus, dev_corpus: Corpus | None = None,
          model_config: ModelConfig | None = None,
          loss_config: LossConfig | None = None,
          train_config: TrainConfig | None = None,
          log_path=None, ckpt_path=None, vocab: PieceVocab | None = None) -> TrainResult:
    """Train a fresh model; with a dev corpus, keep the best dev TC F1 weights."""
    from .metrics import evaluate, predict_corpus

    model_config = model_config or ModelConfig()
    loss_config = loss_config or LossConfig()
    cfg = train_config or TrainConfig()
    schema = train_corpus.schema
    if dev_corpus is not None and dev_corpus.schema != schema:
        raise ValueError("train/dev schema mismatch")
    torch.manual_seed(cfg.seed)
    model = GridEE(schema, vocab or PieceVocab.from_corpus(train_corpus), model_config)
    optimizer = build_optimizer(model, cfg)
    named = list(model.named_parameters())
    rng = random.Random(cfg.seed)
    m = len(schema.event_types)

    sentences = list(train_corpus.sentences)
    gold_all = [encode_sentence(s, model.strategy, schema) for s in sentences]
    gold_types = [{schema.type_index(e.event_type) for e in s.events} for s in sentences]

    result = TrainResult(model)
    best_state = best_rank = None
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for epoch in range(1, cfg.epochs + 1):
            model.train()
            order = list(range(len(sentences)))
            rng.shuffle(order)
            losses = []
            for step, start in enumerate(range(0, len(order), cfg.batch_size)):
                batch = order[start : start + cfg.batch_size]
                types = [sample_event_types(gold_types[i], m, loss_config.k, rng, rotation=epoch - 1)
                         for i in batch]
                sents = [sentences[i] for i in batch]
                pieces, mask = model.pieces(sents)
                n = pieces.shape[1]
                scores = model(pieces, mask, torch.tensor(types))
                gold = pad_gold([gold_all[i][t] for i, t in zip(batch, types)], n)
                valid = valid_cells(mask.sum(-1), n, schema.num_labels)
                per_type = grid_loss(scores, gold, valid, loss_config.delta)
                loss = (per_type.sum(-1) / len(types[0])).mean()
                if not torch.isfinite(loss):
                    raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {step}")
                optimizer.zero_grad()
                loss.backward()
                if cfg.clip_norm:
                    torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
                optimizer_step(optimizer, named)
                losses.append(loss.item())
            entry = {"epoch": epoch, "loss": float(np.mean(losses)) if losses else 0.0}
            if dev_corpus is not None and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
                model.eval()
                report = evaluate(predict_corpus(model, dev_corpus.sentences, delta=loss_config.delta),
                                  [s.events for s in dev_corpus.sentences])
                entry["dev"] = {key: report.metrics[key].f1 for key in ("TI", "TC", "AI", "AC")}
                # dev TC F1 picks the checkpoint; AC F1 breaks ties
                rank = (entry["dev"]["TC"], entry["dev"]["AC"])
                if best_rank is None or rank > best_rank:
                    best_rank = rank
                    result.best_tc_f1, result.best_epoch = rank[0], epoch
                    best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
                    if ckpt_path:
                        model.save(ckpt_path)
            result.log.append(entry)
            logger.info("epoch %d %s", epoch, json.dumps(entry))
            if log_file:
                log_file.write(json.dumps(entry) + "\n")
                log_file.flush()
    finally:
        if log_file:
            log_file.close()
    if best_state is not None:
        model.load_state_dict(best_state)
    elif ckpt_path:
        model.save(ckpt_path)
    model.eval()
    return result


def k_sweep(train_corpus: Corpus, dev_corpus: Corpus, ks=None, model_config: ModelConfig | None = None,
            train_config: TrainConfig | None = None, delta: float = 0.0) -> list[dict]:
    """Train once per sampling number K and report best dev TC F1 for each."""
    m = len(train_corpus.schema.event_types)
    ks = list(ks) if ks is not None else list(range(2, min(8, m + 4) + 1))
    rows = []
    for k in ks:
        res = train(train_corpus, dev_corpus, model_config, LossConfig(delta, k), train_config)
        rows.append({"K": k, "effective_K": min(k, m), "best_epoch": res.best_epoch, "TC_F1": res.best_tc_f1})
    return rows


def format_k_table(rows) -> str:
    lines = ["K\teffective_K\tTC_F1"]
    lines += [f"{r['K']}\t{r['effective_K']}\t{r['TC_F1']:.4f}" for r in rows]
    return "\n".join(lines)
