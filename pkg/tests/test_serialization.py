import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gest.model import Event, GestGraph, Relation, Timeframe, collapse, GraphError
from gest.serialization import (
    CanonicalParseError,
    from_json,
    graph_to_dict,
    parse_canonical_string,
    to_canonical_string,
    to_json,
)

from .helpers import random_graph


def test_empty_graph():
    assert to_canonical_string(GestGraph()) == ""
    assert parse_canonical_string("") == GestGraph()
    assert from_json(to_json(GestGraph())) == GestGraph()


def test_single_event_line():
    g = GestGraph({"e1": Event("e1", "open", ("John", "door"))})
    assert to_canonical_string(g) == "EVENT e1 | action=open | entities=John,door\n"


def test_full_event_line():
    ev = Event("e1", "sit", ("he",), "chair", Timeframe("breakfast time", 2), {"b": "2", "a": "1"})
    line = to_canonical_string(GestGraph({"e1": ev})).strip()
    assert line == "EVENT e1 | action=sit | entities=he | location=chair | time=breakfast time#2 | props=a=1;b=2"


def test_other_edge_parses_verb():
    text = "EVENT e1 | action=a\nEVENT e2 | action=b\nEDGE e1 -> e2 : other(avoid)\n"
    g = parse_canonical_string(text)
    assert g.relations == (Relation("e1", "e2", "other", "avoid"),)
    assert to_canonical_string(g) == text


def test_output_is_sorted():
    g = GestGraph(
        [Event("b", "x"), Event("a", "y")],
        (Relation("b", "a", "next"), Relation("a", "b", "causes")),
    )
    lines = to_canonical_string(g).splitlines()
    assert lines == [
        "EVENT a | action=y",
        "EVENT b | action=x",
        "EDGE a -> b : causes",
        "EDGE b -> a : next",
    ]


def test_time_order_only():
    g = GestGraph({"e1": Event("e1", "x", timeframe=Timeframe(None, 3))})
    assert "time=#3" in to_canonical_string(g)
    assert parse_canonical_string(to_canonical_string(g)) == g


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("EVENT e1 | action=a\nBOGUS\n", 2),
        ("EVENT e1\n", 1),
        ("EVENT e1 | action=a | time=x#notint\n", 1),
        ("EVENT e1 | action=a\nEDGE e1 => e2 : next\n", 2),
        ("EVENT e1 | action=a\nEVENT e1 | action=b\n", 2),
        ("EVENT e1 | action=a | color=red\n", 1),
        ("PAYLOAD c BEGIN\nEVENT e1 | action=a\n", 2),
    ],
)
def test_parse_errors_carry_line_numbers(text, lineno):
    with pytest.raises(CanonicalParseError) as info:
        parse_canonical_string(text)
    assert info.value.lineno == lineno


def test_json_field_names():
    g = GestGraph({"e1": Event("e1", "open")}, ())
    d = graph_to_dict(g)
    assert set(d) == {"events", "relations"}
    assert set(d["events"][0]) == {"id", "action", "entities", "location", "timeframe", "properties", "refs"}
    assert d["events"][0]["timeframe"] == {"label": None, "order": None}


def test_json_relations_schema():
    g = GestGraph([Event("a", "x"), Event("b", "y")], (Relation("a", "b", "other", "avoid"),))
    d = json.loads(to_json(g))
    assert d["relations"] == [{"src": "a", "dst": "b", "kind": "other", "verb": "avoid"}]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 10), st.booleans())
def test_round_trips(seed, n, odd):
    g = random_graph(random.Random(seed), n, odd=odd)
    assert parse_canonical_string(to_canonical_string(g)) == g
    assert from_json(to_json(g)) == g
    assert to_canonical_string(parse_canonical_string(to_canonical_string(g))) == to_canonical_string(g)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_round_trips_with_payloads(seed, n):
    rng = random.Random(seed)
    g = random_graph(rng, n, odd=True)
    for step in range(3):
        ids = list(g.events)
        try:
            g = collapse(g, set(rng.sample(ids, rng.randint(1, len(ids)))), f"c{step}", "abs tract")
        except GraphError:
            pass
    assert parse_canonical_string(to_canonical_string(g)) == g
    assert from_json(to_json(g)) == g
