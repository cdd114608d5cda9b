"""Event records, schema, JSONL corpus I/O and the synthetic corpus generator."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

SPAN_LABELS = ("S-T", "S-A")


@dataclass(frozen=True, order=True)
class Span:
    """Inclusive word span ``[start, end]``."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad span ({self.start}, {self.end})")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def words(self) -> range:
        return range(self.start, self.end + 1)

    def contains(self, other: "Span") -> bool:
        return self.start <= other.start and other.end <= self.end

    def partially_overlaps(self, other: "Span") -> bool:
        """True when the spans cross: they intersect but neither contains the other."""
        if self.end < other.start or other.end < self.start:
            return False
        return not (self.contains(other) or other.contains(self))


@dataclass(frozen=True)
class Argument:
    role: str
    span: Span


@dataclass(frozen=True)
class EventRecord:
    event_type: str
    trigger: Span
    arguments: tuple[Argument, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "arguments", tuple(self.arguments))


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[str, ...]
    events: tuple[EventRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "events", tuple(self.events))

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Schema:
    event_types: tuple[str, ...]
    role_types: tuple[str, ...]
    span_labels: tuple[str, ...] = SPAN_LABELS

    def __post_init__(self):
        object.__setattr__(self, "event_types", tuple(self.event_types))
        object.__setattr__(self, "role_types", tuple(self.role_types))
        if not self.event_types:
            raise ValueError("schema needs at least one event type")
        for kind, names in (("event type", self.event_types), ("role", self.role_types)):
            if len(set(names)) != len(names):
                raise ValueError(f"duplicate {kind} names in schema")

    @property
    def num_labels(self) -> int:
        return len(self.span_labels) + len(self.role_types)

    def type_index(self, name: str) -> int:
        return self.event_types.index(name)

    def role_index(self, name: str) -> int:
        return self.role_types.index(name)

    def to_json(self) -> dict:
        return {"event_types": list(self.event_types), "role_types": list(self.role_types)}

    @classmethod
    def from_json(cls, obj: dict) -> "Schema":
        return cls(tuple(obj["event_types"]), tuple(obj["role_types"]))


@dataclass(frozen=True)
class Corpus:
    schema: Schema
    sentences: tuple[Sentence, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def subset(self, keep) -> "Corpus":
        return Corpus(self.schema, tuple(s for s in self.sentences if keep(s)))


class CorpusFormatError(ValueError):
    pass


def validate(sentence: Sentence, schema: Schema) -> list[str]:
    """Return every problem found in ``sentence``; an empty list means valid."""
    errors = []
    n = len(sentence.tokens)
    if n == 0:
        errors.append("empty token list")

    def check_span(span: Span, what: str):
        if span.end >= n:
            errors.append(f"{what}: span end {span.end} ≥ len {n}")

    for k, ev in enumerate(sentence.events):
        where = f"event {k}"
        if ev.event_type not in schema.event_types:
            errors.append(f"{where}: event type {ev.event_type!r} not in schema")
        check_span(ev.trigger, f"{where} trigger")
        seen = set()
        for arg in ev.arguments:
            if arg.role not in schema.role_types:
                errors.append(f"{where}: role {arg.role!r} not in schema")
            check_span(arg.span, f"{where} argument {arg.role}")
            key = (arg.role, arg.span)
            if key in seen:
                errors.append(f"{where}: duplicate argument {arg.role} {arg.span}")
            seen.add(key)
    return errors


def is_overlapped(sentence: Sentence) -> bool:
    """At least two events share a trigger span or an argument span."""
    for a, b in combinations(sentence.events, 2):
        if a.trigger == b.trigger:
            return True
        if {x.span for x in a.arguments} & {x.span for x in b.arguments}:
            return True
    return False


def is_nested(sentence: Sentence) -> bool:
    """Some event's trigger lies inside an argument span of another event."""
    for a in sentence.events:
        for b in sentence.events:
            if a is b:
                continue
            if any(arg.span.contains(a.trigger) for arg in b.arguments):
                return True
    return False


# -- JSONL -------------------------------------------------------------------


def _sentence_to_json(sentence: Sentence) -> dict:
    return {
        "tokens": list(sentence.tokens),
        "events": [
            {
                "type": ev.event_type,
                "trigger": [ev.trigger.start, ev.trigger.end],
                "args": [
                    {"role": a.role, "span": [a.span.start, a.span.end]}
                    for a in ev.arguments
                ],
            }
            for ev in sentence.events
        ],
    }


def _sentence_from_json(obj: dict) -> Sentence:
    tokens = obj["tokens"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ValueError("tokens must be a list of strings")
    if not tokens:
        raise ValueError("empty token list")
    events = []
    for ev in obj.get("events", []):
        args = tuple(Argument(a["role"], Span(*a["span"])) for a in ev.get("args", []))
        events.append(EventRecord(ev["type"], Span(*ev["trigger"]), args))
    return Sentence(tuple(tokens), tuple(events))


def save_jsonl(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"schema": corpus.schema.to_json()}, ensure_ascii=False) + "\n")
        for sentence in corpus.sentences:
            f.write(json.dumps(_sentence_to_json(sentence), ensure_ascii=False) + "\n")


def load_jsonl(path, schema: Schema | None = None) -> Corpus:
    """Read a corpus written by :func:`save_jsonl`.

    The first record must be the schema header. If ``schema`` is given it must
    equal the header. Any bad line raises :class:`CorpusFormatError` naming the
    line number.
    """
    header = None
    sentences = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"{path}:{lineno}: parse error: {e}") from None
            if header is None:
                if not isinstance(obj, dict) or "schema" not in obj:
                    raise CorpusFormatError(f"{path}:{lineno}: missing schema header")
                try:
                    header = Schema.from_json(obj["schema"])
                except (KeyError, TypeError, ValueError) as e:
                    raise CorpusFormatError(f"{path}:{lineno}: bad schema: {e}") from None
                if schema is not None and header != schema:
                    raise CorpusFormatError(f"{path}:{lineno}: schema mismatch")
                continue
            try:
                sentence = _sentence_from_json(obj)
            except (KeyError, TypeError, ValueError) as e:
                raise CorpusFormatError(f"{path}:{lineno}: {e}") from None
            problems = validate(sentence, header)
            if problems:
                raise CorpusFormatError(f"{path}:{lineno}: {problems[0]}")
            sentences.append(sentence)
    if header is None:
        raise CorpusFormatError(f"{path}: empty file")
    return Corpus(header, tuple(sentences))


# -- synthetic generator ----------------------------------------------------------


@dataclass(frozen=True)
class GenConfig:
    sentence_count: int = 1000
    max_len: int = 20
    vocab_size: int = 200
    overlap_rate: float = 0.25
    nest_rate: float = 0.2
    max_events_per_sentence: int = 3
    seed: int = 0

    def __post_init__(self):
        for name in ("overlap_rate", "nest_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {rate}")
        if self.max_len < 4:
            raise ValueError("max_len must be at least 4")
        if self.sentence_count < 0 or self.max_events_per_sentence < 1:
            raise ValueError("sentence_count >= 0 and max_events_per_sentence >= 1 required")


def default_schema(num_types: int = 4, num_roles: int = 3) -> Schema:
    return Schema(
        tuple(f"type{k}" for k in range(num_types)),
        tuple(f"role{k}" for k in range(num_roles)),
    )


@dataclass
class Lexicon:
    """Marker words planted by the generator; every other word is a distractor.

    Depends only on the schema and vocabulary size, so corpora generated with
    different seeds share the same markers.
    """

    trigger: dict  # type -> (word, word)
    trigger_head: dict  # type -> word
    trigger_tail: dict
    arg_single: dict  # (type, role) -> (word, word)
    arg_head: dict
    arg_tail: dict
    pair_trigger: dict  # (type, type) -> word
    pair_arg: dict  # (type, type, role) -> word
    distractors: list = field(default_factory=list)

    @classmethod
    def build(cls, schema: Schema, vocab_size: int) -> "Lexicon":
        words = iter(f"w{k:03d}" for k in range(vocab_size))
        types, roles = range(len(schema.event_types)), range(len(schema.role_types))
        pairs = list(combinations(types, 2))
        needed = 4 * len(types) + 4 * len(types) * len(roles) + len(pairs) * (1 + len(roles)) + 8
        if vocab_size < needed:
            raise ValueError(f"vocab_size {vocab_size} too small for schema (need >= {needed})")
        lex = cls(
            trigger={t: (next(words), next(words)) for t in types},
            trigger_head={t: next(words) for t in types},
            trigger_tail={t: next(words) for t in types},
            arg_single={(t, r): (next(words), next(words)) for t in types for r in roles},
            arg_head={(t, r): next(words) for t in types for r in roles},
            arg_tail={(t, r): next(words) for t in types for r in roles},
            pair_trigger={p: next(words) for p in pairs},
            pair_arg={(*p, r): next(words) for p in pairs for r in roles},
        )
        lex.distractors = list(words)
        return lex


class _Chunk:
    """Contiguous run of tokens; ``inner`` holds a chunk embedded at offset 1."""

    def __init__(self, tokens, inner=None):
        self.tokens = tokens
        self.inner = inner
        self.start = None

    def __len__(self):
        return len(self.tokens) + (len(self.inner) if self.inner else 0)

    def span(self) -> Span:
        return Span(self.start, self.start + len(self) - 1)


def _check_feasible(config: GenConfig, schema: Schema) -> None:
    m = len(schema.event_types)
    need = 1 + (config.overlap_rate > 0) + (config.nest_rate > 0)
    if need > config.max_events_per_sentence:
        raise ValueError(
            f"max_events_per_sentence={config.max_events_per_sentence} cannot host "
            f"overlap and nesting (needs {need})"
        )
    if need > m:
        raise ValueError(f"{m} event types cannot host {need} distinct events")
    if config.nest_rate > 0 and config.max_len < 5:
        raise ValueError("max_len too small for nesting (needs >= 5)")
    if config.nest_rate > 0 and not schema.role_types:
        raise ValueError("nesting needs at least one role type")


def gen_synthetic(config: GenConfig, schema: Schema) -> Corpus:
    """Generate a corpus of flat, overlapped and nested events.

    Each sentence independently becomes overlapped with probability
    ``overlap_rate`` and nested with probability ``nest_rate``. Events in a
    sentence have distinct types, so each per-type grid holds one event.
    """
    _check_feasible(config, schema)
    lex = Lexicon.build(schema, config.vocab_size)
    rng = random.Random(config.seed)
    sentences = []
    for _ in range(config.sentence_count):
        overlap = rng.random() < config.overlap_rate
        nest = rng.random() < config.nest_rate
        sentences.append(_gen_sentence(rng, config, schema, lex, overlap, nest))
    return Corpus(schema, tuple(sentences))


def _gen_sentence(rng, config, schema, lex, overlap, nest) -> Sentence:
    for attempt in range(200):
        # shrink the sentence budget as attempts fail
        max_args = max(0, len(schema.role_types) - attempt // 20)
        max_arg_len = 3 if attempt < 100 else 1
        sentence = _try_sentence(rng, config, schema, lex, overlap, nest, max_args, max_arg_len)
        if sentence is not None:
            return sentence
    raise ValueError(f"max_len={config.max_len} too small for the requested event structure")


def _try_sentence(rng, config, schema, lex, overlap, nest, max_args, max_arg_len):
    m, roles = len(schema.event_types), list(range(len(schema.role_types)))
    need = 1 + overlap + nest
    hi = min(config.max_events_per_sentence, m)
    n_events = rng.randint(need, hi)
    types = rng.sample(range(m), n_events)

    def trigger_chunk(t):
        if rng.random() < 0.3:
            return _Chunk([lex.trigger_head[t], lex.trigger_tail[t]])
        return _Chunk([rng.choice(lex.trigger[t])])

    def arg_chunk(t, r):
        length = rng.choices((1, 2, 3), weights=(5, 3, 2))[0]
        length = min(length, max_arg_len)
        if length == 1:
            return _Chunk([rng.choice(lex.arg_single[(t, r)])])
        middle = [rng.choice(lex.distractors) for _ in range(length - 2)]
        return _Chunk([lex.arg_head[(t, r)], *middle, lex.arg_tail[(t, r)]])

    # per event: trigger chunk and {role: chunk}
    triggers = [None] * n_events
    args = [dict() for _ in range(n_events)]
    for k in range(n_events):
        if rng.random() < 0.1:
            count = 0
        else:
            count = rng.randint(1, max(1, max_args)) if max_args else 0
        for r in rng.sample(roles, min(count, len(roles))):
            args[k][r] = None

    if overlap:
        a, b = 0, 1
        pair = tuple(sorted((types[a], types[b])))
        if not roles or rng.random() < 0.5:
            shared = _Chunk([lex.pair_trigger[pair]])
            triggers[a] = triggers[b] = shared
        else:
            r = rng.choice(roles)
            shared = _Chunk([lex.pair_arg[(*pair, r)]])
            args[a][r] = shared
            args[b][r] = shared
    if nest:
        outer, inner = n_events - 1, 0
        r = rng.choice(roles)
        # the holder argument wraps the inner event's trigger
        if triggers[inner] is None:
            triggers[inner] = trigger_chunk(types[inner])
        t = types[outer]
        args[outer][r] = _Chunk([lex.arg_head[(t, r)], lex.arg_tail[(t, r)]], inner=triggers[inner])

    for k in range(n_events):
        if triggers[k] is None:
            triggers[k] = trigger_chunk(types[k])
        for r in list(args[k]):
            if args[k][r] is None:
                args[k][r] = arg_chunk(types[k], r)

    embedded = {id(c.inner) for ev in args for c in ev.values() if c.inner is not None}
    top, seen = [], set()
    for chunk in triggers + [c for ev in args for c in ev.values()]:
        if id(chunk) in seen or id(chunk) in embedded:
            continue
        seen.add(id(chunk))
        top.append(chunk)

    min_len = sum(len(c) for c in top) + len(top) - 1
    if min_len > config.max_len:
        return None
    target = rng.randint(min_len, config.max_len)
    rng.shuffle(top)
    # gaps[0] leads, gaps[-1] trails; inner gaps hold at least one distractor
    gaps = [0] + [1] * (len(top) - 1) + [0]
    for _ in range(target - min_len):
        gaps[rng.randrange(len(gaps))] += 1

    tokens = []
    for gap, chunk in zip(gaps, top + [None]):
        tokens.extend(rng.choice(lex.distractors) for _ in range(gap))
        if chunk is None:
            break
        chunk.start = len(tokens)
        tokens.append(chunk.tokens[0])
        if chunk.inner is not None:
            chunk.inner.start = len(tokens)
            tokens.extend(chunk.inner.tokens)
        tokens.extend(chunk.tokens[1:])

    events = []
    for k in range(n_events):
        arguments = sorted(
            (Argument(schema.role_types[r], c.span()) for r, c in args[k].items()),
            key=lambda a: schema.role_index(a.role),
        )
        events.append(EventRecord(schema.event_types[types[k]], triggers[k].span(), tuple(arguments)))
    events.sort(key=lambda e: (e.trigger.start, e.trigger.end, schema.type_index(e.event_type)))
    return Sentence(tuple(tokens), tuple(events))
