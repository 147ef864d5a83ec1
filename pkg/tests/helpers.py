"""Seeded random generators shared by the test modules."""
import random

from gest.model import RELATION_KINDS, REF_KINDS, Event, GestGraph, Ref, Relation, Timeframe

WORDS = [
    "open", "close", "sit", "eat", "walk", "door", "chair", "table", "kitchen",
    "john", "mary", "bee", "flower", "pot", "plate", "food", "park", "dog",
]
ODD = ["a|b", "x,y", "k=v", "50%", "semi;colon", "hash#tag", "(paren)", "two words", "dot.ted"]


def random_event(rng: random.Random, eid: str, odd: bool = False) -> Event:
    pool = WORDS + (ODD if odd else [])
    entities = tuple(rng.choice(pool) for _ in range(rng.randint(0, 3)))
    location = rng.choice(pool) if rng.random() < 0.5 else None
    label = rng.choice(pool) if rng.random() < 0.3 else None
    order = rng.randint(-2, 9) if rng.random() < 0.5 else None
    props = {rng.choice(pool): rng.choice(pool) for _ in range(rng.randint(0, 2))}
    return Event(eid, rng.choice(pool), entities, location, Timeframe(label, order), props)


def random_graph(
    rng: random.Random,
    n_nodes: int,
    edge_p: float = 0.3,
    odd: bool = False,
    refs: bool = True,
    prefix: str = "e",
) -> GestGraph:
    """Valid random graph. Temporal edges follow a hidden random order."""
    ids = [f"{prefix}{i}" for i in range(n_nodes)]
    if odd:
        ids = [i + rng.choice(["", "%", "x.y", "é"]) for i in ids]
    events = {i: random_event(rng, i, odd) for i in ids}
    rank = {i: r for r, i in enumerate(rng.sample(ids, len(ids)))}
    relations = []
    for a in ids:
        for b in ids:
            if a == b or rng.random() >= edge_p:
                continue
            kind = rng.choice(RELATION_KINDS)
            if kind in ("next", "before") and rank[a] > rank[b]:
                continue
            if kind == "after" and rank[a] < rank[b]:
                continue
            verb = rng.choice(["avoid", "help", "trying to avoid", "v|w"]) if kind == "other" else None
            if kind != "other" and rng.random() < 0.1:
                verb = "inspired"
            relations.append(Relation(a, b, kind, verb))
    if refs and n_nodes > 1:
        for a in ids:
            if rng.random() < 0.3:
                target = rng.choice([i for i in ids if i != a])
                ev = events[a]
                path = f"entities.{rng.randint(0, 2)}" if rng.random() < 0.5 else "location"
                events[a] = Event(ev.id, ev.action, ev.entities, ev.location, ev.timeframe,
                                  ev.properties, (Ref(path, target, rng.choice(REF_KINDS)),))
    return GestGraph(events, tuple(relations))


def distinct_graph(rng: random.Random, n_nodes: int, vocab: list[str], edge_p: float = 0.4) -> GestGraph:
    """Random graph whose events have pairwise-distinct actions (no refs)."""
    actions = rng.sample(vocab, n_nodes)
    events = []
    for i, act in enumerate(actions):
        ents = tuple(rng.sample(vocab, rng.randint(1, 2)))
        events.append(Event(f"n{i}", act, ents, rng.choice([None] + vocab)))
    ids = [e.id for e in events]
    relations = []
    for a in range(n_nodes):
        for b in range(a + 1, n_nodes):
            if rng.random() < edge_p:
                kind = rng.choice(["next", "causes", "same_time", "enables"])
                relations.append(Relation(ids[a], ids[b], kind) if rng.random() < 0.5 or kind == "next"
                                 else Relation(ids[b], ids[a], kind))
    return GestGraph({e.id: e for e in events}, tuple(relations))


def relabel(g: GestGraph, mapping: dict) -> GestGraph:
    """Rename event ids (and everything that points at them)."""
    events = {}
    for eid, ev in g.events.items():
        refs = tuple(Ref(r.path, mapping[r.target], r.kind) for r in ev.refs)
        events[mapping[eid]] = Event(mapping[eid], ev.action, ev.entities, ev.location,
                                     ev.timeframe, ev.properties, refs)
    relations = tuple(Relation(mapping[r.src], mapping[r.dst], r.kind, r.verb) for r in g.relations)
    return GestGraph(events, relations)


def permuted(g: GestGraph, rng: random.Random, prefix: str = "p"):
    """Copy of ``g`` with shuffled ids; returns (graph, old->new mapping)."""
    ids = list(g.events)
    new = [f"{prefix}{i}" for i in range(len(ids))]
    rng.shuffle(new)
    mapping = dict(zip(ids, new))
    return relabel(g, mapping), mapping
