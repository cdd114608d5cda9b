"""Inference over all event types and TI/TC/AI/AC scoring."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from .codec import TRIGGER, ScoreGrid, decode
from .events import EventRecord, Sentence

METRICS = ("TI", "TC", "AI", "AC")
DISTANCE_BUCKETS = ("1-10", "11-20", "21-30", "31-40", "41-50", ">50")
EVENT_COUNT_GROUPS = ("1", "2", ">2")


def predict(model, sentence: Sentence, strategy=None, delta: float = 0.0) -> list[EventRecord]:
    return predict_corpus(model, [sentence], batch_size=1, strategy=strategy, delta=delta)[0]


def predict_corpus(model, sentences, batch_size: int = 8, strategy=None, delta: float = 0.0) -> list[list[EventRecord]]:
    """Score every event type for each sentence and decode the grids.

    Sentences are batched in length order; the output follows input order.
    """
    strategy = strategy or model.strategy
    schema = model.schema
    m = len(schema.event_types)
    sentences = list(sentences)
    order = sorted(range(len(sentences)), key=lambda i: len(sentences[i].tokens))
    out: list = [None] * len(sentences)
    all_types = torch.arange(m)
    with torch.no_grad():
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            batch = [sentences[i] for i in idx]
            scores = model.score(batch, all_types).numpy()
            tagged = scores > delta
            # a grid with no trigger cell decodes to nothing
            has_trigger = np.triu(tagged[:, :, TRIGGER]).any(axis=(-1, -2))
            for b, i in enumerate(idx):
                n = len(sentences[i].tokens)
                events = []
                for t in np.flatnonzero(has_trigger[b]):
                    grid = ScoreGrid(schema.event_types[t], scores[b, t, :, :n, :n], delta)
                    events.extend(decode(grid, strategy, schema))
                out[i] = sorted(events, key=lambda e: (e.trigger.start, e.trigger.end,
                                                       schema.type_index(e.event_type)))
    return out


@dataclass
class PRF:
    gold: int = 0
    predicted: int = 0
    matched: int = 0

    @property
    def precision(self) -> float:
        return self.matched / self.predicted if self.predicted else 0.0

    @property
    def recall(self) -> float:
        return self.matched / self.gold if self.gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_json(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "gold": self.gold, "predicted": self.predicted, "matched": self.matched}


@dataclass
class EvalReport:
    metrics: dict
    by_distance: dict = field(default_factory=dict)
    by_event_count: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            **{k: v.to_json() for k, v in self.metrics.items()},
            "by_distance": {
                k: {"gold": v.gold, "matched": v.matched, "recall": v.recall}
                for k, v in self.by_distance.items()
            },
            "by_event_count": {
                k: {name: prf.to_json() for name, prf in group.items()}
                for k, group in self.by_event_count.items()
            },
        }

    def summary(self) -> str:
        return "  ".join(f"{k} P={v.precision:.3f} R={v.recall:.3f} F1={v.f1:.3f}"
                         for k, v in self.metrics.items())


def _tuples(sid: int, events) -> dict[str, set]:
    out = {k: set() for k in METRICS}
    for ev in events:
        trig = (ev.trigger.start, ev.trigger.end)
        out["TI"].add((sid, trig))
        out["TC"].add((sid, trig, ev.event_type))
        for arg in ev.arguments:
            span = (arg.span.start, arg.span.end)
            out["AI"].add((sid, ev.event_type, span))
            out["AC"].add((sid, ev.event_type, span, arg.role))
    return out


def distance_bucket(distance: int) -> str:
    if distance <= 10:
        return DISTANCE_BUCKETS[0]
    if distance > 50:
        return DISTANCE_BUCKETS[-1]
    return DISTANCE_BUCKETS[(distance - 1) // 10]


def _score(pred_sets: dict, gold_sets: dict) -> dict[str, PRF]:
    return {k: PRF(len(gold_sets[k]), len(pred_sets[k]), len(gold_sets[k] & pred_sets[k])) for k in METRICS}


def evaluate(predicted, gold) -> EvalReport:
    """Micro P/R/F1 over deduplicated tuples, aligned by sentence position.

    TI (sentence, trigger span); TC adds the type; AI (sentence, type,
    argument span); AC adds the role, so a role is right when the gold set
    holds the same (type, span) with that role.
    """
    predicted, gold = list(predicted), list(gold)
    if len(predicted) != len(gold):
        raise ValueError(f"{len(predicted)} predictions for {len(gold)} gold sentences")
    pred_sets = {k: set() for k in METRICS}
    gold_sets = {k: set() for k in METRICS}
    groups: dict[str, tuple[dict, dict]] = {
        g: ({k: set() for k in METRICS}, {k: set() for k in METRICS}) for g in EVENT_COUNT_GROUPS
    }
    ac_distance: dict[tuple, int] = {}
    for sid, (p_events, g_events) in enumerate(zip(predicted, gold)):
        p, g = _tuples(sid, p_events), _tuples(sid, g_events)
        for k in METRICS:
            pred_sets[k] |= p[k]
            gold_sets[k] |= g[k]
        count = len(g_events)
        if count:
            group = groups["1" if count == 1 else "2" if count == 2 else ">2"]
            for k in METRICS:
                group[0][k] |= p[k]
                group[1][k] |= g[k]
        for ev in g_events:
            for arg in ev.arguments:
                key = (sid, ev.event_type, (arg.span.start, arg.span.end), arg.role)
                dist = abs(arg.span.start - ev.trigger.start)
                ac_distance[key] = min(dist, ac_distance.get(key, dist))

    by_distance = {b: PRF() for b in DISTANCE_BUCKETS}
    for key, dist in ac_distance.items():
        cell = by_distance[distance_bucket(dist)]
        cell.gold += 1
        cell.matched += key in pred_sets["AC"]
    return EvalReport(
        metrics=_score(pred_sets, gold_sets),
        by_distance=by_distance,
        by_event_count={name: _score(*sets) for name, sets in groups.items()},
    )


def bench(model, sentences, batch_size: int = 1, runs: int = 3, warmup: int = 1) -> float:
    """Median sentences/second of :func:`predict_corpus` over ``runs`` passes."""
    sentences = list(sentences)
    if not sentences:
        raise ValueError("nothing to benchmark")
    predict_corpus(model, sentences[: batch_size * warmup], batch_size)
    rates = []
    for _ in range(runs):
        start = time.perf_counter()
        predict_corpus(model, sentences, batch_size)
        rates.append(len(sentences) / (time.perf_counter() - start))
    return statistics.median(rates)
