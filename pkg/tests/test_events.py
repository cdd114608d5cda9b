import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridee.events import (
    Argument,
    Corpus,
    CorpusFormatError,
    EventRecord,
    GenConfig,
    Schema,
    Sentence,
    Span,
    default_schema,
    gen_synthetic,
    is_nested,
    is_overlapped,
    load_jsonl,
    save_jsonl,
    validate,
)

SCHEMA = Schema(("Acquire", "Invest"), ("subject", "object", "target"))


def sentence(n, trigger, args=(), etype="Acquire"):
    return Sentence(
        tuple(f"w{i}" for i in range(n)),
        (EventRecord(etype, Span(*trigger), tuple(Argument(r, Span(*s)) for r, s in args)),),
    )


def test_validate_in_range():
    assert validate(sentence(5, (2, 2)), SCHEMA) == []


def test_validate_span_past_end():
    errors = validate(sentence(5, (3, 7)), SCHEMA)
    assert len(errors) == 1 and "span end 7 ≥ len 5" in errors[0]


def test_validate_unknown_role():
    errors = validate(sentence(5, (2, 2), [("R-X", (0, 0))]), SCHEMA)
    assert any("role 'R-X' not in schema" in e for e in errors)


def test_validate_reports_every_problem():
    s = sentence(3, (1, 9), [("R-X", (0, 0)), ("subject", (0, 4)), ("subject", (0, 4))], etype="Nope")
    errors = validate(s, SCHEMA)
    # type, trigger range, role, two argument ranges, duplicate
    assert len(errors) == 6


def test_validate_empty_tokens():
    assert validate(Sentence((), ()), SCHEMA) == ["empty token list"]


def test_span_rejects_reversed():
    with pytest.raises(ValueError):
        Span(3, 2)


@pytest.mark.parametrize(
    "a,b,expected",
    [((1, 3), (2, 5), True), ((1, 5), (2, 3), False), ((1, 2), (3, 4), False), ((1, 2), (1, 2), False),
     ((2, 4), (4, 6), True)],
)
def test_partial_overlap(a, b, expected):
    assert Span(*a).partially_overlaps(Span(*b)) is expected
    assert Span(*b).partially_overlaps(Span(*a)) is expected


def test_schema_rejects_duplicates():
    with pytest.raises(ValueError):
        Schema(("a", "a"), ("r",))
    with pytest.raises(ValueError):
        Schema((), ("r",))


def test_jsonl_round_trip(tmp_path):
    corpus = Corpus(
        SCHEMA,
        (
            sentence(5, (2, 2), [("subject", (0, 1))]),
            sentence(4, (0, 1), [("object", (2, 3)), ("target", (3, 3))], etype="Invest"),
            Sentence(("só", "tokens"), ()),
        ),
    )
    path = tmp_path / "c.jsonl"
    save_jsonl(corpus, path)
    assert load_jsonl(path) == corpus
    first = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
    assert first == {"schema": {"event_types": ["Acquire", "Invest"], "role_types": ["subject", "object", "target"]}}


def _write(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_load_empty_tokens_names_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    _write(path, [json.dumps({"schema": SCHEMA.to_json()}), json.dumps({"tokens": ["a"]}), '{"tokens": []}'])
    with pytest.raises(CorpusFormatError, match=r"bad.jsonl:3: empty token list"):
        load_jsonl(path)


def test_load_truncated_file(tmp_path):
    path = tmp_path / "cut.jsonl"
    full = json.dumps({"tokens": ["a", "b"], "events": []})
    _write(path, [json.dumps({"schema": SCHEMA.to_json()}), full, full[:12]])
    with pytest.raises(CorpusFormatError, match=r":3: parse error"):
        load_jsonl(path)


def test_load_schema_mismatch(tmp_path):
    path = tmp_path / "c.jsonl"
    save_jsonl(Corpus(SCHEMA, ()), path)
    with pytest.raises(CorpusFormatError, match="schema mismatch"):
        load_jsonl(path, Schema(("Other",), ("subject",)))


def test_load_missing_header(tmp_path):
    path = tmp_path / "c.jsonl"
    _write(path, [json.dumps({"tokens": ["a"]})])
    with pytest.raises(CorpusFormatError, match="missing schema header"):
        load_jsonl(path)


def test_load_rejects_invalid_sentence(tmp_path):
    path = tmp_path / "c.jsonl"
    rec = {"tokens": ["a", "b"], "events": [{"type": "Acquire", "trigger": [0, 4], "args": []}]}
    _write(path, [json.dumps({"schema": SCHEMA.to_json()}), json.dumps(rec)])
    with pytest.raises(CorpusFormatError, match=r":2: .*span end 4"):
        load_jsonl(path)


def test_generator_deterministic():
    cfg = GenConfig(sentence_count=200, seed=7)
    assert gen_synthetic(cfg, default_schema()) == gen_synthetic(cfg, default_schema())


def test_generator_seed_changes_corpus():
    a = gen_synthetic(GenConfig(sentence_count=50, seed=1), default_schema())
    b = gen_synthetic(GenConfig(sentence_count=50, seed=2), default_schema())
    assert a != b


def test_generator_flat_when_rates_zero():
    corpus = gen_synthetic(GenConfig(sentence_count=300, overlap_rate=0, nest_rate=0, seed=3), default_schema())
    assert not any(is_overlapped(s) or is_nested(s) for s in corpus)


def test_generator_overlap_rate():
    corpus = gen_synthetic(GenConfig(sentence_count=2000, overlap_rate=0.22, seed=11), default_schema())
    frac = sum(map(is_overlapped, corpus)) / len(corpus)
    assert 0.17 <= frac <= 0.27


@pytest.mark.parametrize("overlap,nest", [(0.25, 0.2), (0.5, 0.1), (0.05, 0.4)])
def test_generator_rates_within_tolerance(overlap, nest):
    corpus = gen_synthetic(GenConfig(sentence_count=1000, overlap_rate=overlap, nest_rate=nest, seed=5),
                           default_schema())
    assert abs(sum(map(is_overlapped, corpus)) / 1000 - overlap) <= 0.05
    assert abs(sum(map(is_nested, corpus)) / 1000 - nest) <= 0.05


def test_generated_sentences_are_valid_and_clash_free():
    cfg = GenConfig(sentence_count=500, overlap_rate=0.4, nest_rate=0.4, seed=9)
    schema = default_schema()
    for s in gen_synthetic(cfg, schema):
        assert validate(s, schema) == []
        assert 1 <= len(s.tokens) <= cfg.max_len
        for etype in schema.event_types:
            evs = [e for e in s.events if e.event_type == etype]
            triggers = {e.trigger for e in evs}
            args = {a.span for e in evs for a in e.arguments}
            for group in (triggers, args):
                assert not any(a.partially_overlaps(b) for a in group for b in group)


def test_nested_sentences_have_inner_trigger_in_argument():
    corpus = gen_synthetic(GenConfig(sentence_count=300, overlap_rate=0, nest_rate=1.0, seed=4), default_schema())
    assert all(is_nested(s) for s in corpus)


def test_marker_words_shared_across_seeds():
    # the lexicon depends only on the schema, so splits generated with
    # different seeds speak the same language
    schema = default_schema()
    a = gen_synthetic(GenConfig(sentence_count=300, overlap_rate=0, nest_rate=0, seed=1), schema)
    b = gen_synthetic(GenConfig(sentence_count=300, overlap_rate=0, nest_rate=0, seed=2), schema)

    def trigger_words(corpus):
        return {(e.event_type, corpus_s.tokens[e.trigger.start]) for corpus_s in corpus for e in corpus_s.events}

    assert trigger_words(a) & trigger_words(b)


@pytest.mark.parametrize(
    "kwargs",
    [dict(overlap_rate=1.5), dict(nest_rate=-0.1), dict(max_len=3), dict(sentence_count=-1)],
)
def test_gen_config_rejects_bad_values(kwargs):
    with pytest.raises(ValueError):
        GenConfig(**kwargs)


def test_generator_infeasible_config():
    with pytest.raises(ValueError):
        gen_synthetic(GenConfig(sentence_count=10, nest_rate=0.5, max_events_per_sentence=1), default_schema())
    with pytest.raises(ValueError):
        gen_synthetic(GenConfig(sentence_count=10, nest_rate=0.5), default_schema(num_types=1))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(1, 40))
def test_generated_corpus_round_trips(tmp_path_factory, seed, n):
    corpus = gen_synthetic(GenConfig(sentence_count=n, seed=seed), default_schema())
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    save_jsonl(corpus, path)
    assert load_jsonl(path) == corpus
