"""Pattern language: parser, printer, batch matcher, streaming matcher."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from vigil import load_seed_ontology
from vigil.patterns import (
    IncrementalMatcher,
    Match,
    OutOfOrderEvent,
    PatternError,
    PatternSyntaxError,
    Seq,
    Term,
    format_pattern,
    match_events,
    parse_pattern,
)
from vigil.ontology import UnknownConceptError
from conftest import BASE_TS, make_event, random_events
from oracles import brute_force_matches, random_pattern


def sorted_matches(matches):
    return sorted(matches, key=lambda m: (m.end, m.event_ids))


# -- parsing -------------------------------------------------------------------

def test_parse_single_term(seed_ontology):
    assert parse_pattern("theft", seed_ontology) == Term("theft", 0.0)


def test_parse_term_with_confidence(seed_ontology):
    assert parse_pattern("theft >= 0.75", seed_ontology) == Term("theft", 0.75)


def test_parse_seq_with_scope(seed_ontology):
    got = parse_pattern(
        "SEQ(abandoned_object >= 0.7, crowd) WITHIN 600s SAME CAMERA", seed_ontology)
    assert got == Seq(
        (Term("abandoned_object", 0.7), Term("crowd", 0.0)), 600_000, True)


def test_parse_nested_seq(seed_ontology):
    got = parse_pattern(
        "SEQ(theft, SEQ(crowd, aggression) WITHIN 60s SAME CAMERA, tag) WITHIN 900s",
        seed_ontology)
    assert got == Seq(
        (
            Term("theft"),
            Seq((Term("crowd"), Term("aggression")), 60_000, True),
            Term("tag"),
        ),
        900_000,
        False,
    )


def test_parse_is_whitespace_insensitive(seed_ontology):
    a = parse_pattern("SEQ(theft,crowd)WITHIN 300s", seed_ontology)
    b = parse_pattern("  SEQ( theft ,  crowd )   WITHIN   300s  ", seed_ontology)
    assert a == b


def test_parse_unknown_concept_carries_suggestions(seed_ontology):
    with pytest.raises(UnknownConceptError) as err:
        parse_pattern("SEQ(loitering_unknown, theft) WITHIN 300s", seed_ontology)
    assert err.value.term == "loitering_unknown"


@pytest.mark.parametrize("text", [
    "SEQ(theft) WITHIN 300s",          # one child
    "SEQ(theft, crowd) WITHIN 300",    # missing s
    "SEQ(theft, crowd)",               # missing WITHIN
    "SEQ(theft, crowd WITHIN 300s",    # missing paren
    "theft >= 1.5",                    # confidence out of range
    "theft >=",                        # dangling comparison
    "SEQ(theft, crowd) WITHIN 0s",     # empty window
    "SEQ(theft, crowd) WITHIN 300s SAME",  # incomplete scope
    "theft crowd",                     # trailing junk
    "",                                # nothing
])
def test_parse_rejects_bad_text(seed_ontology, text):
    with pytest.raises(PatternSyntaxError):
        parse_pattern(text, seed_ontology)


def test_syntax_error_carries_position(seed_ontology):
    with pytest.raises(PatternSyntaxError) as err:
        parse_pattern("SEQ(theft, crowd) WITHIN x300s", seed_ontology)
    assert err.value.position == len("SEQ(theft, crowd) WITHIN ")


def test_ast_validation():
    with pytest.raises(PatternError):
        Seq((Term("theft"),), 1000)
    with pytest.raises(PatternError):
        Seq((Term("theft"), Term("crowd")), 0)
    with pytest.raises(PatternError):
        Term("theft", 1.2)


@settings(max_examples=60)
@given(st.data())
def test_format_parse_round_trip(data):
    o = load_seed_ontology()
    rng = random.Random(data.draw(st.integers(0, 10_000)))
    ast = random_pattern(rng, o)
    assert parse_pattern(format_pattern(ast), o) == ast


# -- batch matcher --------------------------------------------------------------

def test_single_event_single_term(seed_ontology):
    events = [make_event("e1", timestamp=BASE_TS + 10_000)]
    got = match_events(events, parse_pattern("theft", seed_ontology), seed_ontology)
    assert got == [Match(("e1",), BASE_TS + 10_000, BASE_TS + 10_000, "theft")]


def test_window_exceeded_no_match(seed_ontology):
    ast = parse_pattern("SEQ(abandoned_object, crowd) WITHIN 600s", seed_ontology)
    events = [
        make_event("e1", concept="abandoned_object", timestamp=BASE_TS),
        make_event("e2", concept="crowd", timestamp=BASE_TS + 700_000),
    ]
    assert match_events(events, ast, seed_ontology) == []


def test_latest_start_on_same_camera(seed_ontology):
    ast = parse_pattern("SEQ(theft, aggression) WITHIN 300s SAME CAMERA", seed_ontology)
    events = [
        make_event("e1", camera_id="cam1", concept="theft", timestamp=BASE_TS),
        make_event("e2", camera_id="cam2", concept="theft", timestamp=BASE_TS + 5_000),
        make_event("e3", camera_id="cam2", concept="aggression", timestamp=BASE_TS + 8_000),
    ]
    got = match_events(events, ast, seed_ontology)
    assert [m.event_ids for m in got] == [("e2", "e3")]


def test_terms_match_by_subsumption(seed_ontology):
    ast = parse_pattern("SEQ(vandalism, security_event) WITHIN 300s", seed_ontology)
    events = [
        make_event("e1", concept="tag", timestamp=BASE_TS),  # tag is-a vandalism
        make_event("e2", concept="crowd", timestamp=BASE_TS + 1_000),
    ]
    got = match_events(events, ast, seed_ontology)
    assert [m.event_ids for m in got] == [("e1", "e2")]


def test_confidence_threshold_filters(seed_ontology):
    ast = parse_pattern("SEQ(theft >= 0.8, crowd) WITHIN 300s", seed_ontology)
    events = [
        make_event("e1", concept="theft", confidence=0.5, timestamp=BASE_TS),
        make_event("e2", concept="crowd", timestamp=BASE_TS + 1_000),
    ]
    assert match_events(events, ast, seed_ontology) == []


def test_equal_timestamps_cannot_chain(seed_ontology):
    ast = parse_pattern("SEQ(theft, crowd) WITHIN 300s", seed_ontology)
    events = [
        make_event("e1", concept="theft", timestamp=BASE_TS),
        make_event("e2", concept="crowd", timestamp=BASE_TS),
    ]
    assert match_events(events, ast, seed_ontology) == []


def test_one_match_per_final_event(seed_ontology):
    ast = parse_pattern("SEQ(theft, crowd) WITHIN 600s", seed_ontology)
    events = [
        make_event("t1", concept="theft", timestamp=BASE_TS),
        make_event("t2", concept="theft", timestamp=BASE_TS + 1_000),
        make_event("c1", concept="crowd", timestamp=BASE_TS + 2_000),
        make_event("c2", concept="crowd", timestamp=BASE_TS + 3_000),
    ]
    got = match_events(events, ast, seed_ontology)
    # both crowds are finals; each pairs with the latest earlier theft
    assert [m.event_ids for m in got] == [("t2", "c1"), ("t2", "c2")]


def test_nested_window_forces_backtracking(seed_ontology):
    # Inner pair must fit 30s; latest crowd for the inner slot pushes
    # aggression out of its window, so the match backs off to the earlier one.
    ast = parse_pattern(
        "SEQ(theft, SEQ(crowd, aggression) WITHIN 30s) WITHIN 900s", seed_ontology)
    events = [
        make_event("t", concept="theft", timestamp=BASE_TS),
        make_event("c1", concept="crowd", timestamp=BASE_TS + 100_000),
        make_event("c2", concept="crowd", timestamp=BASE_TS + 200_000),
        make_event("a", concept="aggression", timestamp=BASE_TS + 125_000),
    ]
    got = match_events(events, ast, seed_ontology)
    assert [m.event_ids for m in got] == [("t", "c1", "a")]


def test_match_invariants_hold(seed_ontology):
    rng = random.Random(11)
    events = random_events(rng, 150, seed_ontology.ids(), ["c1", "c2", "c3"],
                           span_ms=2_400_000)
    ast = parse_pattern("SEQ(security_event, crowd, security_event) WITHIN 600s SAME CAMERA",
                        seed_ontology)
    for m in match_events(events, ast, seed_ontology):
        assert m.end - m.start <= 600_000
        assert len(m.event_ids) == 3
        by_id = {e.event_id: e for e in events}
        chain = [by_id[i] for i in m.event_ids]
        assert all(a.timestamp < b.timestamp for a, b in zip(chain, chain[1:]))
        assert len({e.camera_id for e in chain}) == 1


def test_batch_matches_oracle_on_random_logs(seed_ontology):
    rng = random.Random(2024)
    for _ in range(12):
        events = random_events(rng, rng.randint(40, 120), seed_ontology.ids(),
                               ["c1", "c2", "c3", "c4"], span_ms=2_400_000)
        ast = random_pattern(rng, seed_ontology)
        got = sorted_matches(match_events(events, ast, seed_ontology))
        want = sorted_matches(brute_force_matches(events, ast, seed_ontology))
        assert got == want, format_pattern(ast)


# -- streaming matcher ---------------------------------------------------------

def test_incremental_equals_batch_on_example(seed_ontology):
    ast = parse_pattern("SEQ(theft, aggression) WITHIN 300s SAME CAMERA", seed_ontology)
    events = [
        make_event("e1", camera_id="cam1", concept="theft", timestamp=BASE_TS),
        make_event("e2", camera_id="cam2", concept="theft", timestamp=BASE_TS + 5_000),
        make_event("e3", camera_id="cam2", concept="aggression", timestamp=BASE_TS + 8_000),
    ]
    matcher = IncrementalMatcher(ast, seed_ontology)
    emitted = []
    for i, e in enumerate(events):
        got = matcher.feed(e)
        emitted.extend(got)
        if i < 2:
            assert got == []
    assert emitted == match_events(events, ast, seed_ontology)


def test_incremental_equals_batch_on_every_prefix(seed_ontology):
    rng = random.Random(77)
    for _ in range(6):
        events = random_events(rng, 80, seed_ontology.ids(), ["c1", "c2"],
                               span_ms=1_800_000)
        ast = random_pattern(rng, seed_ontology)
        matcher = IncrementalMatcher(ast, seed_ontology)
        cumulative = []
        for k, e in enumerate(events, start=1):
            cumulative.extend(matcher.feed(e))
            batch = match_events(events[:k], ast, seed_ontology)
            assert sorted_matches(cumulative) == sorted_matches(batch)


def test_out_of_order_event_rejected(seed_ontology):
    matcher = IncrementalMatcher(parse_pattern("SEQ(theft, crowd) WITHIN 60s",
                                               seed_ontology), seed_ontology)
    matcher.feed(make_event("e1", timestamp=BASE_TS + 1_000))
    with pytest.raises(OutOfOrderEvent):
        matcher.feed(make_event("e2", timestamp=BASE_TS))
    matcher.feed(make_event("e3", timestamp=BASE_TS + 1_000))  # equal is allowed


def test_state_stays_within_window(seed_ontology):
    ast = parse_pattern("SEQ(theft, crowd) WITHIN 60s", seed_ontology)
    matcher = IncrementalMatcher(ast, seed_ontology)
    for i in range(1_000):
        matcher.feed(make_event(f"old{i}", concept="theft", timestamp=BASE_TS + i * 10))
    matcher.feed(make_event("late", concept="theft",
                            timestamp=BASE_TS + 10_000_000))
    got = matcher.feed(make_event("end", concept="crowd",
                                  timestamp=BASE_TS + 10_001_000))
    assert [m.event_ids for m in got] == [("late", "end")]
    assert matcher.retained_count() <= 4  # only the window's events remain


def test_irrelevant_events_not_retained(seed_ontology):
    ast = parse_pattern("SEQ(theft, crowd) WITHIN 600s", seed_ontology)
    matcher = IncrementalMatcher(ast, seed_ontology)
    for i in range(100):
        matcher.feed(make_event(f"n{i}", concept="traffic_incident",
                                timestamp=BASE_TS + i))
    assert matcher.retained_count() == 0
