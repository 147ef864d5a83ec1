"""Event graph data model: events, relations, validation, collapse and expand.

Graphs are immutable values. Every operation here returns a new graph.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Optional

RELATION_KINDS = (
    "next",
    "before",
    "after",
    "same_time",
    "causes",
    "caused_by",
    "enables",
    "other",
)
TEMPORAL_KINDS = frozenset({"next", "before", "after"})
REF_KINDS = ("same_entity", "same_location", "same_time", "same_event")

INWARD = "in"  # external -> interior
OUTWARD = "out"  # interior -> external


class GraphError(ValueError):
    """Raised when a graph operation's precondition does not hold."""


def _freeze(mapping: Mapping[str, str] | None) -> Mapping[str, str]:
    return MappingProxyType(dict(sorted((mapping or {}).items())))


@dataclass(frozen=True)
class Timeframe:
    label: Optional[str] = None
    order: Optional[int] = None

    def __post_init__(self):
        if self.label == "":
            object.__setattr__(self, "label", None)

    def __bool__(self) -> bool:
        return self.label is not None or self.order is not None


@dataclass(frozen=True, order=True)
class Ref:
    """Pointer from a component of one event to another event ("same X")."""

    path: str
    target: str
    kind: str


@dataclass(frozen=True)
class Event:
    id: str
    action: str
    entities: tuple[str, ...] = ()
    location: Optional[str] = None
    timeframe: Timeframe = field(default_factory=Timeframe)
    properties: Mapping[str, str] = field(default_factory=dict)
    refs: tuple[Ref, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "entities", tuple(self.entities))
        if self.location == "":
            object.__setattr__(self, "location", None)
        if self.timeframe is None:
            object.__setattr__(self, "timeframe", Timeframe())
        object.__setattr__(self, "properties", _freeze(self.properties))
        object.__setattr__(self, "refs", tuple(sorted(set(self.refs))))

    def __eq__(self, other):
        if not isinstance(other, Event):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def _key(self):
        return (
            self.id,
            self.action,
            self.entities,
            self.location,
            self.timeframe,
            tuple(self.properties.items()),
            self.refs,
        )


@dataclass(frozen=True)
class Relation:
    src: str
    dst: str
    kind: str
    verb: Optional[str] = None

    def __post_init__(self):
        if self.verb == "":
            object.__setattr__(self, "verb", None)

    @property
    def key(self) -> tuple[str, str, str, str]:
        return (self.src, self.dst, self.kind, self.verb or "")

    def __lt__(self, other):
        return self.key < other.key


@dataclass(frozen=True)
class Boundary:
    """One relation that crossed the border of a collapsed subgraph.

    ``direction`` is ``"in"`` when the relation ran external -> interior and
    ``"out"`` when it ran interior -> external.
    """

    external: str
    interior: str
    kind: str
    verb: Optional[str]
    direction: str

    def __lt__(self, other):
        return self._key() < other._key()

    def _key(self):
        return (self.external, self.interior, self.kind, self.verb or "", self.direction)

    def relation(self, external_id: str | None = None, interior_id: str | None = None) -> Relation:
        ext = self.external if external_id is None else external_id
        inner = self.interior if interior_id is None else interior_id
        if self.direction == INWARD:
            return Relation(ext, inner, self.kind, self.verb)
        return Relation(inner, ext, self.kind, self.verb)


@dataclass(frozen=True, order=True)
class RefLink:
    """A reference of ``event`` that was redirected to the collapsed node.

    ``target`` is the event the reference pointed at before redirection.
    """

    event: str
    path: str
    kind: str
    target: str


@dataclass(frozen=True)
class AbstractionPayload:
    subgraph: "GestGraph"
    boundary: tuple[Boundary, ...] = ()
    ref_links: tuple[RefLink, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "boundary", tuple(sorted(set(self.boundary))))
        object.__setattr__(self, "ref_links", tuple(sorted(set(self.ref_links))))


@dataclass(frozen=True)
class GestGraph:
    """A story as events (nodes) and relations (edges).

    ``events`` maps id to :class:`Event`; ``relations`` is kept sorted and
    free of exact duplicates; ``payloads`` holds the interior of collapsed
    nodes keyed by the collapsed event's id.
    """

    events: Mapping[str, Event] = field(default_factory=dict)
    relations: tuple[Relation, ...] = ()
    payloads: Mapping[str, AbstractionPayload] = field(default_factory=dict)

    def __post_init__(self):
        events = self.events
        if not isinstance(events, Mapping):
            events = {e.id: e for e in events}
        object.__setattr__(self, "events", MappingProxyType(dict(sorted(events.items()))))
        uniq = {r.key: r for r in self.relations}
        object.__setattr__(self, "relations", tuple(uniq[k] for k in sorted(uniq)))
        object.__setattr__(self, "payloads", MappingProxyType(dict(sorted(self.payloads.items()))))

    def __eq__(self, other):
        if not isinstance(other, GestGraph):
            return NotImplemented
        return (
            dict(self.events) == dict(other.events)
            and self.relations == other.relations
            and dict(self.payloads) == dict(other.payloads)
        )

    def __hash__(self):
        return hash((tuple(self.events.values()), self.relations))

    def __len__(self) -> int:
        return len(self.events)

    @property
    def node_ids(self) -> list[str]:
        return list(self.events)

    def hierarchy_ids(self) -> set[str]:
        """Ids of every event at every nesting depth."""
        ids = set(self.events)
        for payload in self.payloads.values():
            ids |= payload.subgraph.hierarchy_ids()
        return ids

    def depth(self) -> int:
        if not self.payloads:
            return 0
        return 1 + max(p.subgraph.depth() for p in self.payloads.values())


# ---------------------------------------------------------------- validation


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    where: str = ""

    def __str__(self):
        return f"{self.where}: {self.message}" if self.where else self.message


class ValidationReport(list):
    """List of :class:`Violation`; empty means valid."""

    @property
    def ok(self) -> bool:
        return not self

    def codes(self) -> list[str]:
        return [v.code for v in self]


def temporal_cycle(relations: Iterable[Relation]) -> Optional[list[str]]:
    """Return one cycle among precedence constraints, or None.

    ``next`` and ``before`` mean src precedes dst; ``after`` means dst
    precedes src.
    """
    succ: dict[str, set[str]] = defaultdict(set)
    for r in relations:
        if r.kind not in TEMPORAL_KINDS:
            continue
        a, b = (r.dst, r.src) if r.kind == "after" else (r.src, r.dst)
        succ[a].add(b)

    WHITE, GREY, BLACK = 0, 1, 2
    color: dict[str, int] = defaultdict(int)
    for root in sorted(succ):
        if color[root] != WHITE:
            continue
        path = [root]
        stack = [iter(sorted(succ[root]))]
        color[root] = GREY
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                color[path.pop()] = BLACK
                stack.pop()
            elif color[nxt] == GREY:
                return path[path.index(nxt):] + [nxt]
            elif color[nxt] == WHITE:
                color[nxt] = GREY
                path.append(nxt)
                stack.append(iter(sorted(succ[nxt])))
    return None


def validate_graph(g: GestGraph) -> ValidationReport:
    """Collect every invariant violation of ``g`` (and its payloads)."""
    report = ValidationReport()
    all_ids: dict[str, int] = defaultdict(int)
    _count_ids(g, all_ids)
    for eid, n in sorted(all_ids.items()):
        if n > 1:
            report.append(Violation("duplicate id", f"event id {eid!r} occurs {n} times in the hierarchy", eid))
    _validate_level(g, set(all_ids), report, top=True, where="")
    return report


def _count_ids(g: GestGraph, counts):
    for eid in g.events:
        counts[eid] += 1
    for p in g.payloads.values():
        _count_ids(p.subgraph, counts)


def _validate_level(g: GestGraph, hierarchy: set[str], report: ValidationReport, top: bool, where: str):
    prefix = f"{where}/" if where else ""
    for key, ev in g.events.items():
        loc = prefix + key
        if ev.id != key:
            report.append(Violation("id mismatch", f"event stored under {key!r} has id {ev.id!r}", loc))
        if not ev.id or any(c.isspace() for c in ev.id):
            report.append(Violation("bad id", "event id must be non-empty without whitespace", loc))
        if not ev.action or not ev.action.strip():
            report.append(Violation("empty action", "action must be non-empty", loc))
        for ent in ev.entities:
            if not ent.strip():
                report.append(Violation("empty entity", "entity strings must be non-empty", loc))
        for ref in ev.refs:
            if ref.kind not in REF_KINDS:
                report.append(Violation("bad ref kind", f"unknown reference kind {ref.kind!r}", loc))
            # nested events may point anywhere in the hierarchy
            scope = g.events if top else hierarchy
            if ref.target not in scope:
                report.append(Violation("dangling ref", f"reference target {ref.target!r} not found", loc))
            if ref.target == ev.id:
                report.append(Violation("self ref", "event refers to itself", loc))

    seen = set()
    for r in g.relations:
        loc = prefix + f"{r.src}->{r.dst}"
        if r.kind not in RELATION_KINDS:
            report.append(Violation("bad relation kind", f"unknown relation kind {r.kind!r}", loc))
        if r.kind == "other" and not r.verb:
            report.append(Violation("missing verb", "relation of kind other needs a verb", loc))
        if r.src == r.dst:
            report.append(Violation("self loop", "relation src equals dst", loc))
        if r.src not in g.events:
            report.append(Violation("dangling relation src", f"unknown src {r.src!r}", loc))
        if r.dst not in g.events:
            report.append(Violation("dangling relation dst", f"unknown dst {r.dst!r}", loc))
        if r.key in seen:
            report.append(Violation("duplicate relation", "duplicate relation", loc))
        seen.add(r.key)

    cycle = temporal_cycle(r for r in g.relations if r.src in g.events and r.dst in g.events)
    if cycle:
        report.append(Violation("temporal cycle", "temporal cycle " + " -> ".join(cycle), where))

    for pid, payload in g.payloads.items():
        loc = prefix + pid
        if pid not in g.events:
            report.append(Violation("orphan payload", f"payload for unknown event {pid!r}", loc))
        inner = payload.subgraph.hierarchy_ids()
        for b in payload.boundary:
            if b.interior not in payload.subgraph.events:
                report.append(Violation("bad boundary", f"interior {b.interior!r} not in payload", loc))
            if b.external not in hierarchy or b.external in inner:
                report.append(Violation("bad boundary", f"external {b.external!r} not outside payload", loc))
            if b.direction not in (INWARD, OUTWARD):
                report.append(Violation("bad boundary", f"direction {b.direction!r}", loc))
        for link in payload.ref_links:
            if link.event not in hierarchy or link.target not in inner:
                report.append(Violation("bad ref link", f"reference link {link}", loc))
        _validate_level(payload.subgraph, hierarchy, report, top=False, where=loc)


# ---------------------------------------------------------- hierarchy helpers


def _find_path(g: GestGraph, eid: str) -> Optional[list[str]]:
    """Chain of collapsed-node ids leading from ``g``'s level to ``eid``.

    Returns ``[]`` if ``eid`` is at this level, ``[c1, c2]`` if it lives in
    the payload of c1, inside the payload of c2, and None if absent.
    """
    if eid in g.events:
        return []
    for pid, payload in g.payloads.items():
        sub = _find_path(payload.subgraph, eid)
        if sub is not None:
            return [pid] + sub
    return None


def representative(g: GestGraph, eid: str) -> str:
    """The event at ``g``'s top level that is or contains ``eid``."""
    path = _find_path(g, eid)
    if path is None:
        raise GraphError(f"event {eid!r} not found in hierarchy")
    return path[0] if path else eid


def _map_payload(g: GestGraph, pid: str, fn) -> GestGraph:
    """Apply ``fn`` to the payload ``pid`` wherever it sits in the hierarchy."""
    if pid in g.payloads:
        payloads = dict(g.payloads)
        payloads[pid] = fn(payloads[pid])
        return replace(g, payloads=payloads)
    payloads = dict(g.payloads)
    for key, p in g.payloads.items():
        if pid in p.subgraph.hierarchy_ids():
            payloads[key] = replace(p, subgraph=_map_payload(p.subgraph, pid, fn))
            return replace(g, payloads=payloads)
    raise GraphError(f"no payload {pid!r} in hierarchy")


def _map_event(g: GestGraph, eid: str, fn) -> GestGraph:
    if eid in g.events:
        events = dict(g.events)
        events[eid] = fn(events[eid])
        return replace(g, events=events)
    payloads = dict(g.payloads)
    for key, p in g.payloads.items():
        if eid in p.subgraph.hierarchy_ids():
            payloads[key] = replace(p, subgraph=_map_event(p.subgraph, eid, fn))
            return replace(g, payloads=payloads)
    raise GraphError(f"event {eid!r} not found in hierarchy")


def _iter_payloads(g: GestGraph) -> Iterator[tuple[str, AbstractionPayload]]:
    for pid, p in g.payloads.items():
        yield pid, p
        yield from _iter_payloads(p.subgraph)


def _retarget_ref(ev: Event, path: str, kind: str, old: str, new: str) -> Event:
    refs = list(ev.refs)
    for i, r in enumerate(refs):
        if r.path == path and r.kind == kind and r.target == old:
            refs[i] = Ref(path, new, kind)
            return replace(ev, refs=tuple(refs))
    raise GraphError(f"event {ev.id!r} has no {kind} reference {path!r} -> {old!r}")


# ------------------------------------------------------------ collapse/expand


def collapse(g: GestGraph, node_ids: Iterable[str], new_id: str, label: str) -> GestGraph:
    """Replace the events ``node_ids`` with a single abstract event.

    The new event's action is ``label``. Relations crossing the border are
    rerouted to the new event and recorded in its payload; references of
    top-level events that pointed inside are redirected the same way.

    Raises :class:`GraphError` on unknown ids, an id collision, or when the
    rerouted relations would form a temporal cycle.
    """
    members = set(node_ids)
    if not members:
        raise GraphError("node_ids must be non-empty")
    unknown = sorted(members - set(g.events))
    if unknown:
        raise GraphError(f"unknown event ids: {unknown}")
    if not new_id or any(c.isspace() for c in new_id):
        raise GraphError(f"invalid new id {new_id!r}")
    if new_id in g.hierarchy_ids():
        raise GraphError(f"id {new_id!r} already in use")
    if not label:
        raise GraphError("label must be non-empty")

    interior_rel, outside_rel, boundary = [], [], []
    for r in g.relations:
        s_in, d_in = r.src in members, r.dst in members
        if s_in and d_in:
            interior_rel.append(r)
        elif s_in:
            boundary.append(Boundary(r.dst, r.src, r.kind, r.verb, OUTWARD))
            outside_rel.append(Relation(new_id, r.dst, r.kind, r.verb))
        elif d_in:
            boundary.append(Boundary(r.src, r.dst, r.kind, r.verb, INWARD))
            outside_rel.append(Relation(r.src, new_id, r.kind, r.verb))
        else:
            outside_rel.append(r)

    cycle = temporal_cycle(outside_rel)
    if cycle:
        raise GraphError("collapsing these events creates a temporal cycle " + " -> ".join(cycle))

    events = {k: v for k, v in g.events.items() if k not in members}
    links = []
    for eid, ev in list(events.items()):
        if any(r.target in members for r in ev.refs):
            refs = []
            for r in ev.refs:
                if r.target in members:
                    links.append(RefLink(eid, r.path, r.kind, r.target))
                    r = Ref(r.path, new_id, r.kind)
                refs.append(r)
            events[eid] = replace(ev, refs=tuple(refs))
    events[new_id] = Event(new_id, label)

    subgraph = GestGraph(
        {k: g.events[k] for k in members},
        tuple(interior_rel),
        {k: p for k, p in g.payloads.items() if k in members},
    )
    payloads = {k: p for k, p in g.payloads.items() if k not in members}
    payloads[new_id] = AbstractionPayload(subgraph, tuple(boundary), tuple(links))
    return GestGraph(events, tuple(outside_rel), payloads)


def expand(g: GestGraph, node_id: str) -> GestGraph:
    """Inverse of :func:`collapse` for the top-level collapsed node ``node_id``.

    Boundary relations whose external endpoint has since been collapsed
    into another node are attached to that node, and that node's own
    boundary records are rewritten so a later expansion stays exact.
    """
    if node_id not in g.events:
        raise GraphError(f"unknown event {node_id!r}")
    if node_id not in g.payloads:
        raise GraphError(f"event {node_id!r} has no payload to expand")
    payload = g.payloads[node_id]
    inner = payload.subgraph

    events = {k: v for k, v in g.events.items() if k != node_id}
    events.update(inner.events)
    payloads = {k: v for k, v in g.payloads.items() if k != node_id}
    payloads.update(inner.payloads)
    relations = [r for r in g.relations if node_id not in (r.src, r.dst)]
    relations.extend(inner.relations)
    out = GestGraph(events, tuple(relations), payloads)

    # boundary relations, attached to the current representative
    restored = []
    chain_records: dict[str, set[Boundary]] = defaultdict(set)
    for b in payload.boundary:
        path = _find_path(out, b.external)
        if path is None:
            raise GraphError(f"boundary endpoint {b.external!r} of {node_id!r} is gone")
        rep = path[0] if path else b.external
        restored.append(b.relation(external_id=rep))
        # the containers on the way down to b.external see b.interior as external
        flip = OUTWARD if b.direction == INWARD else INWARD
        for depth, pid in enumerate(path):
            child = path[depth + 1] if depth + 1 < len(path) else b.external
            chain_records[pid].add(Boundary(b.interior, child, b.kind, b.verb, flip))

    for r in g.relations:
        if node_id in (r.src, r.dst):
            other = r.dst if r.src == node_id else r.src
            outward = r.src == node_id
            ok = any(
                (b.direction == OUTWARD) == outward
                and b.kind == r.kind
                and (b.verb or "") == (r.verb or "")
                and representative(out, b.external) == other
                for b in payload.boundary
            )
            if not ok:
                raise GraphError(f"relation {r.key} on {node_id!r} is not explained by its payload")

    out = GestGraph(out.events, out.relations + tuple(restored), out.payloads)

    # records elsewhere that still name node_id as their external endpoint
    for pid, p in list(_iter_payloads(out)):
        if any(b.external == node_id for b in p.boundary) or pid in chain_records:
            keep = [b for b in p.boundary if b.external != node_id]
            keep.extend(chain_records.pop(pid, ()))
            out = _map_payload(out, pid, lambda q, keep=keep: replace(q, boundary=tuple(keep)))
    if chain_records:
        raise GraphError(f"internal error: unplaced boundary records {sorted(chain_records)}")

    # references redirected at collapse time
    for link in payload.ref_links:
        out = _map_event(out, link.event, lambda ev, l=link: _retarget_ref(ev, l.path, l.kind, node_id, l.target))

    dangling = [
        (eid, r) for eid, ev in out.events.items() for r in ev.refs if r.target == node_id
    ]
    if dangling:
        raise GraphError(f"references to {node_id!r} are not explained by its payload: {dangling}")

    # surfaced references must resolve at this level
    for eid in list(out.events):
        ev = out.events[eid]
        for r in ev.refs:
            if r.target in out.events:
                continue
            rep = representative(out, r.target)
            out = _map_event(out, eid, lambda e, r=r, rep=rep: _retarget_ref(e, r.path, r.kind, r.target, rep))
            link = RefLink(eid, r.path, r.kind, r.target)
            out = _map_payload(out, rep, lambda q, link=link: replace(q, ref_links=q.ref_links + (link,)))
    return out


def flatten(g: GestGraph) -> GestGraph:
    """Expand collapsed nodes until none remain."""
    while g.payloads:
        g = expand(g, next(iter(g.payloads)))
    return g
