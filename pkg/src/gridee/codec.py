"""Word-pair grid tagging: events <-> per-type relation grids.

Channel layout of a grid is ``[S-T, S-A, R-<role_0>, R-<role_1>, ...]``; cell
``(i, j)`` of a span channel marks words ``i..j`` as a span, and cell
``(i, j)`` of a role channel links trigger word ``i`` to argument word ``j``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .events import Argument, EventRecord, Schema, Span

TRIGGER, ARGUMENT = 0, 1
ROLE_OFFSET = 2


class RoleStrategy(enum.Enum):
    """Which trigger/argument words carry role tags: heads only or all words."""

    TH_AH = "th-ah"
    TW_AH = "tw-ah"
    TH_AW = "th-aw"
    TW_AW = "tw-aw"

    @classmethod
    def parse(cls, value) -> "RoleStrategy":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower().replace("_", "-"))

    def trigger_words(self, span: Span) -> range:
        return span.words() if self in (RoleStrategy.TW_AH, RoleStrategy.TW_AW) else range(span.start, span.start + 1)

    def argument_words(self, span: Span) -> range:
        return span.words() if self in (RoleStrategy.TH_AW, RoleStrategy.TW_AW) else range(span.start, span.start + 1)


@dataclass(frozen=True)
class LabelGrid:
    event_type: str
    channels: np.ndarray  # bool [2 + |roles|, n, n]

    @property
    def n(self) -> int:
        return self.channels.shape[-1]

    def tags(self) -> np.ndarray:
        return self.channels

    def scores(self) -> np.ndarray:
        return self.channels.astype(np.float64)


@dataclass(frozen=True)
class ScoreGrid:
    event_type: str
    channels: np.ndarray  # float [2 + |roles|, n, n]
    threshold: float = 0.0

    @property
    def n(self) -> int:
        return self.channels.shape[-1]

    def tags(self) -> np.ndarray:
        return self.channels > self.threshold

    def scores(self) -> np.ndarray:
        return self.channels


def encode(events, n: int, strategy: RoleStrategy, schema: Schema, event_type: str | None = None) -> LabelGrid:
    """Tag the events of one type into a boolean grid of shape ``[L, n, n]``."""
    events = list(events)
    if event_type is None:
        if not events:
            raise ValueError("event_type required for an empty event list")
        event_type = events[0].event_type
    grid = np.zeros((schema.num_labels, n, n), dtype=bool)
    spans = {TRIGGER: set(), ARGUMENT: set()}
    for ev in events:
        if ev.event_type != event_type:
            raise ValueError(f"mixed event types {ev.event_type!r} and {event_type!r}")
        spans[TRIGGER].add(ev.trigger)
        grid[TRIGGER, ev.trigger.start, ev.trigger.end] = True
        for arg in ev.arguments:
            spans[ARGUMENT].add(arg.span)
            grid[ARGUMENT, arg.span.start, arg.span.end] = True
            channel = grid[ROLE_OFFSET + schema.role_index(arg.role)]
            for i in strategy.trigger_words(ev.trigger):
                for j in strategy.argument_words(arg.span):
                    channel[i, j] = True
    for label, found in spans.items():
        found = sorted(found)
        for a_idx, a in enumerate(found):
            for b in found[a_idx + 1 :]:
                if a.partially_overlaps(b):
                    name = schema.span_labels[label]
                    raise ValueError(f"{name} spans {a} and {b} partially overlap")
    return LabelGrid(event_type, grid)


def resolve_span_clashes(spans) -> list[Span]:
    """Drop the lower-scoring span of every partially overlapping pair.

    ``spans`` is an iterable of ``(Span, score)``. Spans are accepted greedily by
    descending score (ties: smaller start first); nested, identical and
    disjoint spans never clash. Result is sorted by position.
    """
    ranked = sorted(spans, key=lambda item: (-item[1], item[0].start, item[0].end))
    kept: list[Span] = []
    for span, _ in ranked:
        if not any(span.partially_overlaps(other) for other in kept):
            kept.append(span)
    return sorted(kept)


def link_roles(trigger: Span, argument: Span, role_channel: np.ndarray, strategy: RoleStrategy) -> bool:
    """Whether the role channel links ``trigger`` to ``argument``.

    Head strategies need every prescribed cell tagged; TW-AW needs a strict
    majority of the trigger-word x argument-word block.
    """
    rows = strategy.trigger_words(trigger)
    cols = strategy.argument_words(argument)
    block = role_channel[rows.start : rows.stop, cols.start : cols.stop]
    if strategy is RoleStrategy.TW_AW:
        return 2 * int(block.sum()) > block.size
    return bool(block.all())


def _collect(tags: np.ndarray, scores: np.ndarray):
    rows, cols = np.nonzero(np.triu(tags))
    return [(Span(int(i), int(j)), float(scores[i, j])) for i, j in zip(rows, cols)]


def decode(grid: LabelGrid | ScoreGrid, strategy: RoleStrategy, schema: Schema) -> list[EventRecord]:
    """Recover the events of one type from a grid.

    1. spans from tagged upper-triangle cells of S-T and S-A;
    2. clash resolution per span label;
    3. trigger-argument-role links via :func:`link_roles`;
    4. one event per surviving trigger, stamped with the grid's type.
    """
    tags, scores = grid.tags(), grid.scores()
    triggers = resolve_span_clashes(_collect(tags[TRIGGER], scores[TRIGGER]))
    if not triggers:
        return []
    arguments = resolve_span_clashes(_collect(tags[ARGUMENT], scores[ARGUMENT]))
    # only role channels with any tag can link
    live_roles = [r for r in range(len(schema.role_types)) if tags[ROLE_OFFSET + r].any()]
    events = []
    for trig in triggers:
        linked = []
        for r in live_roles:
            channel = tags[ROLE_OFFSET + r]
            for arg in arguments:
                if link_roles(trig, arg, channel, strategy):
                    linked.append(Argument(schema.role_types[r], arg))
        events.append(EventRecord(grid.event_type, trig, tuple(linked)))
    return events


ORACLE_MAX_N = 8


def oracle_decode(grid: LabelGrid, strategy: RoleStrategy, schema: Schema) -> list[EventRecord]:
    """Brute-force reference decoder for small label grids.

    Among all clash-free subsets of the tagged spans it picks the one whose
    membership vector, read in (start, end) priority order, is lexicographically
    largest; role links come from counting cells over the whole grid.
    """
    n = grid.n
    if n > ORACLE_MAX_N:
        raise ValueError(f"oracle_decode supports n <= {ORACLE_MAX_N}, got {n}")
    tags = np.asarray(grid.channels, dtype=bool)

    def best_subset(label):
        candidates = [(i, j) for i in range(n) for j in range(i, n) if tags[label, i, j]]
        size = len(candidates)
        # candidate k owns bit (size - 1 - k): numeric order == lexicographic order
        crossing = [0] * size
        for a, (s1, e1) in enumerate(candidates):
            for b, (s2, e2) in enumerate(candidates):
                if s1 < s2 <= e1 < e2 or s2 < s1 <= e2 < e1:
                    crossing[a] |= 1 << (size - 1 - b)
        for mask in range((1 << size) - 1, -1, -1):
            if all(
                not (mask >> (size - 1 - k)) & 1 or not crossing[k] & mask
                for k in range(size)
            ):
                return [Span(*candidates[k]) for k in range(size) if (mask >> (size - 1 - k)) & 1]
        return []

    triggers = best_subset(TRIGGER)
    arguments = best_subset(ARGUMENT)
    heads_only_t = strategy in (RoleStrategy.TH_AH, RoleStrategy.TH_AW)
    heads_only_a = strategy in (RoleStrategy.TH_AH, RoleStrategy.TW_AH)
    events = []
    for trig in triggers:
        linked = []
        for r, role in enumerate(schema.role_types):
            for arg in arguments:
                hit = total = 0
                for i in range(n):
                    for j in range(n):
                        in_t = i == trig.start if heads_only_t else trig.start <= i <= trig.end
                        in_a = j == arg.start if heads_only_a else arg.start <= j <= arg.end
                        if in_t and in_a:
                            total += 1
                            hit += bool(tags[ROLE_OFFSET + r, i, j])
                ok = 2 * hit > total if strategy is RoleStrategy.TW_AW else hit == total
                if ok:
                    linked.append(Argument(role, arg))
        events.append(EventRecord(grid.event_type, trig, tuple(linked)))
    return events


def encode_sentence(sentence, strategy: RoleStrategy, schema: Schema) -> np.ndarray:
    """Gold grids for every event type: bool ``[M, L, n, n]``."""
    n = len(sentence.tokens)
    out = np.zeros((len(schema.event_types), schema.num_labels, n, n), dtype=bool)
    for t, name in enumerate(schema.event_types):
        events = [ev for ev in sentence.events if ev.event_type == name]
        if events:
            out[t] = encode(events, n, strategy, schema, name).channels
    return out


def grid_to_json(grid: ScoreGrid, schema: Schema) -> dict:
    return {
        "schema": schema.to_json(),
        "event_type": grid.event_type,
        "threshold": grid.threshold,
        "channels": grid.channels.tolist(),
    }


def grid_from_json(obj: dict) -> tuple[ScoreGrid, Schema]:
    schema = Schema.from_json(obj["schema"])
    channels = np.asarray(obj["channels"], dtype=np.float64)
    if channels.ndim != 3 or channels.shape[0] != schema.num_labels or channels.shape[1] != channels.shape[2]:
        raise ValueError(f"grid shape {channels.shape} does not match schema ({schema.num_labels} channels)")
    if not np.isfinite(channels).all():
        raise ValueError("grid scores must be finite")
    return ScoreGrid(obj["event_type"], channels, float(obj.get("threshold", 0.0))), schema
