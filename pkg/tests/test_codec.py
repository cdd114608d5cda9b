import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridee.codec import (
    ORACLE_MAX_N,
    LabelGrid,
    RoleStrategy,
    ScoreGrid,
    decode,
    encode,
    encode_sentence,
    grid_from_json,
    grid_to_json,
    link_roles,
    oracle_decode,
    resolve_span_clashes,
)
from gridee.events import Argument, EventRecord, GenConfig, Schema, Span, default_schema, gen_synthetic

SCHEMA = Schema(("Acquire", "Invest"), ("subject", "object"))
ST, SA, R_SUBJ, R_OBJ = 0, 1, 2, 3
ALL = list(RoleStrategy)


def ev(trigger, args=(), etype="Acquire"):
    return EventRecord(etype, Span(*trigger), tuple(Argument(r, Span(*s)) for r, s in args))


def cells(channel):
    return {tuple(map(int, c)) for c in np.argwhere(channel)}


def test_encode_single_event_tw_aw():
    grid = encode([ev((2, 2), [("subject", (0, 1))])], 5, RoleStrategy.TW_AW, SCHEMA)
    assert grid.channels.shape == (4, 5, 5)
    assert cells(grid.channels[ST]) == {(2, 2)}
    assert cells(grid.channels[SA]) == {(0, 1)}
    assert cells(grid.channels[R_SUBJ]) == {(2, 0), (2, 1)}
    assert not grid.channels[R_OBJ].any()


@pytest.mark.parametrize(
    "strategy,expected",
    [
        (RoleStrategy.TH_AH, {(1, 4)}),
        (RoleStrategy.TW_AH, {(1, 4), (2, 4)}),
        (RoleStrategy.TH_AW, {(1, 4), (1, 5)}),
        (RoleStrategy.TW_AW, {(1, 4), (1, 5), (2, 4), (2, 5)}),
    ],
)
def test_encode_role_cells_per_strategy(strategy, expected):
    grid = encode([ev((1, 2), [("object", (4, 5))])], 6, strategy, SCHEMA)
    assert cells(grid.channels[R_OBJ]) == expected


def test_encode_no_events_is_all_false():
    grid = encode([], 5, RoleStrategy.TW_AW, SCHEMA, event_type="Acquire")
    assert grid.channels.shape == (4, 5, 5) and not grid.channels.any()


def test_encode_shared_trigger():
    events = [ev((2, 3), [("subject", (0, 0))]), ev((2, 3), [("object", (5, 5))])]
    grid = encode(events, 6, RoleStrategy.TW_AW, SCHEMA)
    assert cells(grid.channels[ST]) == {(2, 3)}
    assert cells(grid.channels[SA]) == {(0, 0), (5, 5)}
    assert cells(grid.channels[R_SUBJ]) == {(2, 0), (3, 0)}
    assert cells(grid.channels[R_OBJ]) == {(2, 5), (3, 5)}


def test_encode_rejects_partial_overlap():
    with pytest.raises(ValueError, match="partially overlap"):
        encode([ev((0, 0), [("subject", (1, 3)), ("object", (2, 4))])], 6, RoleStrategy.TW_AW, SCHEMA)


def test_encode_rejects_mixed_types():
    with pytest.raises(ValueError, match="mixed"):
        encode([ev((0, 0)), ev((1, 1), etype="Invest")], 3, RoleStrategy.TW_AW, SCHEMA)


def test_decode_round_trip_single_event():
    event = ev((2, 2), [("subject", (0, 1))])
    grid = encode([event], 5, RoleStrategy.TW_AW, SCHEMA)
    assert decode(grid, RoleStrategy.TW_AW, SCHEMA) == [event]
    assert oracle_decode(grid, RoleStrategy.TW_AW, SCHEMA) == [event]


def test_decode_merges_shared_trigger():
    # one trigger cell: the two events come back as one trigger with both arguments
    events = [ev((2, 3), [("subject", (0, 0))]), ev((2, 3), [("object", (5, 5))])]
    grid = encode(events, 6, RoleStrategy.TW_AW, SCHEMA)
    assert decode(grid, RoleStrategy.TW_AW, SCHEMA) == [ev((2, 3), [("subject", (0, 0)), ("object", (5, 5))])]


def test_decode_trigger_without_arguments():
    grid = encode([ev((1, 1))], 3, RoleStrategy.TW_AW, SCHEMA)
    assert decode(grid, RoleStrategy.TW_AW, SCHEMA) == [ev((1, 1))]


def test_decode_score_grid_clash():
    scores = np.full((4, 5, 5), -5.0)
    scores[ST, 1, 2] = 3.0
    scores[ST, 2, 4] = 1.5
    grid = ScoreGrid("Acquire", scores, 0.0)
    assert decode(grid, RoleStrategy.TW_AW, SCHEMA) == [ev((1, 2))]


def test_decode_ignores_lower_triangle_span_cells():
    scores = np.full((4, 4, 4), -1.0)
    scores[ST, 3, 1] = 9.0
    assert decode(ScoreGrid("Acquire", scores), RoleStrategy.TW_AW, SCHEMA) == []


def test_decode_nested_events():
    # outer Invest event holds the whole inner Acquire event as its object
    inner = ev((3, 3), [("subject", (2, 2)), ("object", (4, 5))], etype="Acquire")
    outer = ev((0, 0), [("subject", (1, 1)), ("object", (2, 5))], etype="Invest")
    assert outer.arguments[1].span.contains(inner.trigger)
    for strategy in ALL:
        got = []
        for etype, events in (("Acquire", [inner]), ("Invest", [outer])):
            grid = encode(events, 7, strategy, SCHEMA)
            decoded = decode(grid, strategy, SCHEMA)
            assert decoded == oracle_decode(grid, strategy, SCHEMA)
            got += decoded
        assert got == [inner, outer]


def test_clash_higher_score_wins():
    assert resolve_span_clashes([(Span(1, 3), 2.0), (Span(2, 5), 1.0)]) == [Span(1, 3)]


def test_clash_nested_kept():
    assert resolve_span_clashes([(Span(1, 5), 1.0), (Span(2, 3), 2.0)]) == [Span(1, 5), Span(2, 3)]


def test_clash_tie_prefers_smaller_start():
    assert resolve_span_clashes([(Span(2, 5), 1.0), (Span(1, 3), 1.0)]) == [Span(1, 3)]


def test_clash_greedy_chain():
    # (2,4) beats (1,3) and (3,6); then (1,3) and (3,6) are both out
    spans = [(Span(1, 3), 1.0), (Span(2, 4), 2.0), (Span(3, 6), 1.5), (Span(5, 5), 0.1)]
    assert resolve_span_clashes(spans) == [Span(2, 4), Span(5, 5)]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.integers(0, 4), st.floats(-5, 5)), max_size=10))
def test_clash_resolution_properties(raw):
    spans = [(Span(s, s + w), c) for s, w, c in raw]
    kept = resolve_span_clashes(spans)
    assert not any(a.partially_overlaps(b) for a in kept for b in kept)
    # every dropped span clashes with some kept span of at least its score
    best = {}
    for span, score in spans:
        best[span] = max(score, best.get(span, score))
    for span, score in best.items():
        if span not in kept:
            assert any(span.partially_overlaps(k) and best[k] >= score for k in kept)


def test_link_tw_aw_full_block():
    channel = np.zeros((5, 5), dtype=bool)
    channel[2, 0] = channel[2, 1] = True
    assert link_roles(Span(2, 2), Span(0, 1), channel, RoleStrategy.TW_AW)


def test_link_tw_aw_half_is_not_majority():
    channel = np.zeros((5, 5), dtype=bool)
    channel[2, 0] = True
    assert not link_roles(Span(2, 2), Span(0, 1), channel, RoleStrategy.TW_AW)


def test_link_tw_aw_majority():
    channel = np.zeros((6, 6), dtype=bool)
    channel[0, 3] = channel[0, 4] = True
    assert link_roles(Span(0, 0), Span(3, 5), channel, RoleStrategy.TW_AW)


def test_link_th_ah_head_cell():
    channel = np.zeros((5, 5), dtype=bool)
    channel[1, 3] = True
    assert link_roles(Span(1, 2), Span(3, 4), channel, RoleStrategy.TH_AH)
    assert not link_roles(Span(1, 2), Span(3, 4), channel, RoleStrategy.TW_AH)


def test_link_head_strategies_need_all_cells():
    channel = np.zeros((5, 5), dtype=bool)
    channel[1, 3] = channel[1, 4] = True
    assert link_roles(Span(1, 2), Span(3, 4), channel, RoleStrategy.TH_AW)
    assert not link_roles(Span(1, 2), Span(3, 4), channel, RoleStrategy.TW_AW)


def test_role_channel_direction_matters():
    channel = np.zeros((5, 5), dtype=bool)
    channel[0, 3] = True
    assert not link_roles(Span(3, 3), Span(0, 0), channel, RoleStrategy.TW_AW)


def test_oracle_empty_grid():
    grid = LabelGrid("Acquire", np.zeros((4, 5, 5), dtype=bool))
    assert oracle_decode(grid, RoleStrategy.TW_AW, SCHEMA) == []


def test_oracle_rejects_large_grid():
    grid = LabelGrid("Acquire", np.zeros((4, ORACLE_MAX_N + 1, ORACLE_MAX_N + 1), dtype=bool))
    with pytest.raises(ValueError):
        oracle_decode(grid, RoleStrategy.TW_AW, SCHEMA)


@st.composite
def random_grids(draw):
    n = draw(st.integers(1, 6))
    density = draw(st.floats(0.02, 0.4))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return LabelGrid("Acquire", rng.random((4, n, n)) < density), draw(st.sampled_from(ALL))


@settings(max_examples=500, deadline=None)
@given(random_grids())
def test_decode_matches_oracle(case):
    grid, strategy = case
    assert decode(grid, strategy, SCHEMA) == oracle_decode(grid, strategy, SCHEMA)


@settings(max_examples=100, deadline=None)
@given(random_grids())
def test_decode_is_pure_and_sorted(case):
    grid, strategy = case
    first = decode(grid, strategy, SCHEMA)
    assert first == decode(grid, strategy, SCHEMA)
    assert [e.trigger for e in first] == sorted(e.trigger for e in first)


@pytest.mark.parametrize("strategy", ALL)
def test_round_trip_generated(strategy):
    schema = default_schema()
    corpus = gen_synthetic(GenConfig(sentence_count=200, overlap_rate=0.3, nest_rate=0.3, seed=21), schema)
    for s in corpus:
        grids = encode_sentence(s, strategy, schema)
        # span channels are upper triangular
        assert not np.tril(grids[:, :2], k=-1).any()
        decoded = []
        for t, name in enumerate(schema.event_types):
            decoded += decode(LabelGrid(name, grids[t]), strategy, schema)
        norm = lambda events: sorted(
            (e.event_type, e.trigger, tuple(sorted(e.arguments, key=lambda a: (a.span, a.role)))) for e in events
        )
        assert norm(decoded) == norm(s.events), s


def test_strategy_parse():
    assert RoleStrategy.parse("TW-AW") is RoleStrategy.TW_AW
    assert RoleStrategy.parse("th_ah") is RoleStrategy.TH_AH
    with pytest.raises(ValueError):
        RoleStrategy.parse("both")


def test_grid_json_round_trip():
    scores = np.linspace(-1, 1, 4 * 3 * 3).reshape(4, 3, 3)
    grid = ScoreGrid("Invest", scores, 0.25)
    back, schema = grid_from_json(json.loads(json.dumps(grid_to_json(grid, SCHEMA))))
    assert schema == SCHEMA and back.event_type == "Invest" and back.threshold == 0.25
    np.testing.assert_array_equal(back.channels, scores)


def test_grid_json_shape_checked():
    obj = grid_to_json(ScoreGrid("Invest", np.zeros((3, 2, 2))), SCHEMA)
    with pytest.raises(ValueError, match="shape"):
        grid_from_json(obj)
