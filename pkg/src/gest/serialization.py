"""JSON and canonical line-format serialization for :class:`GestGraph`.

Canonical format, one record per line::

    EVENT <id> | action=<a> | entities=<e1,e2> | location=<l> | time=<label>#<order> | props=<k1=v1;k2=v2>
    EDGE <src> -> <dst> : <kind>          (or  : <kind>(<verb>) )
    REF <id>.<path> SAME_<KIND> <target>

Optional segments are omitted when empty. Reserved characters inside
values are percent-encoded. Collapsed nodes add a nested block::

    PAYLOAD <id> BEGIN
    ...lines of the interior graph...
    BOUNDARY <external> <interior> <in|out> <kind>[(<verb>)]
    REFLINK <event>.<path> SAME_<KIND> <target>
    PAYLOAD <id> END
"""
from __future__ import annotations

import json
import re
from dataclasses import replace
from typing import Any
from urllib.parse import unquote

from .model import (
    AbstractionPayload,
    Boundary,
    Event,
    GestGraph,
    Ref,
    RefLink,
    Relation,
    Timeframe,
)

_VALUE_SPECIAL = "%|,;=#()\n\r\t"
_TOKEN_SPECIAL = _VALUE_SPECIAL + " ."


class CanonicalParseError(ValueError):
    def __init__(self, lineno: int, reason: str):
        super().__init__(f"line {lineno}: {reason}")
        self.lineno = lineno
        self.reason = reason


def _esc(text: str, special: str = _VALUE_SPECIAL) -> str:
    return "".join(f"%{ord(c):02X}" if c in special else c for c in text)


def _tok(text: str) -> str:
    return _esc(text, _TOKEN_SPECIAL)


def _path(text: str) -> str:
    return _esc(text, _VALUE_SPECIAL + " ")


# ------------------------------------------------------------------ JSON


def event_to_dict(ev: Event) -> dict[str, Any]:
    return {
        "id": ev.id,
        "action": ev.action,
        "entities": list(ev.entities),
        "location": ev.location,
        "timeframe": {"label": ev.timeframe.label, "order": ev.timeframe.order},
        "properties": dict(ev.properties),
        "refs": [{"path": r.path, "target": r.target, "kind": r.kind} for r in ev.refs],
    }


def graph_to_dict(g: GestGraph) -> dict[str, Any]:
    events = []
    for ev in g.events.values():
        d = event_to_dict(ev)
        if ev.id in g.payloads:
            d["payload"] = _payload_to_dict(g.payloads[ev.id])
        events.append(d)
    relations = [
        {"src": r.src, "dst": r.dst, "kind": r.kind, "verb": r.verb} for r in g.relations
    ]
    return {"events": events, "relations": relations}


def _payload_to_dict(p: AbstractionPayload) -> dict[str, Any]:
    return {
        "graph": graph_to_dict(p.subgraph),
        "boundary": [
            {
                "external": b.external,
                "interior": b.interior,
                "kind": b.kind,
                "verb": b.verb,
                "direction": b.direction,
            }
            for b in p.boundary
        ],
        "ref_links": [
            {"event": l.event, "path": l.path, "kind": l.kind, "target": l.target}
            for l in p.ref_links
        ],
    }


def graph_from_dict(data: dict[str, Any]) -> GestGraph:
    if not isinstance(data, dict):
        raise ValueError("graph JSON must be an object")
    events, payloads = {}, {}
    for d in data.get("events", []):
        tf = d.get("timeframe") or {}
        ev = Event(
            id=d["id"],
            action=d["action"],
            entities=tuple(d.get("entities") or ()),
            location=d.get("location"),
            timeframe=Timeframe(tf.get("label"), tf.get("order")),
            properties=d.get("properties") or {},
            refs=tuple(Ref(r["path"], r["target"], r["kind"]) for r in d.get("refs") or ()),
        )
        if ev.id in events:
            raise ValueError(f"duplicate event id {ev.id!r}")
        events[ev.id] = ev
        if d.get("payload") is not None:
            p = d["payload"]
            payloads[ev.id] = AbstractionPayload(
                graph_from_dict(p["graph"]),
                tuple(
                    Boundary(b["external"], b["interior"], b["kind"], b.get("verb"), b["direction"])
                    for b in p.get("boundary", [])
                ),
                tuple(
                    RefLink(l["event"], l["path"], l["kind"], l["target"])
                    for l in p.get("ref_links", [])
                ),
            )
    relations = tuple(
        Relation(r["src"], r["dst"], r["kind"], r.get("verb")) for r in data.get("relations", [])
    )
    return GestGraph(events, relations, payloads)


def to_json(g: GestGraph, indent: int | None = 2) -> str:
    return json.dumps(graph_to_dict(g), indent=indent, sort_keys=False)


def from_json(text: str) -> GestGraph:
    return graph_from_dict(json.loads(text))


# ------------------------------------------------------------- canonical


def _kind_str(kind: str, verb: str | None) -> str:
    return f"{kind}({_path(verb)})" if verb else kind


def _event_line(ev: Event) -> str:
    parts = [f"EVENT {_tok(ev.id)}", f"action={_esc(ev.action)}"]
    if ev.entities:
        parts.append("entities=" + ",".join(_esc(e) for e in ev.entities))
    if ev.location is not None:
        parts.append(f"location={_esc(ev.location)}")
    tf = ev.timeframe
    if tf:
        time = _esc(tf.label) if tf.label is not None else ""
        if tf.order is not None:
            time += f"#{tf.order}"
        parts.append(f"time={time}")
    if ev.properties:
        parts.append("props=" + ";".join(f"{_esc(k)}={_esc(v)}" for k, v in ev.properties.items()))
    return " | ".join(parts)


def _lines(g: GestGraph) -> list[str]:
    out = []
    for ev in g.events.values():
        out.append(_event_line(ev))
    for r in g.relations:
        out.append(f"EDGE {_tok(r.src)} -> {_tok(r.dst)} : {_kind_str(r.kind, r.verb)}")
    for ev in g.events.values():
        for ref in ev.refs:
            out.append(f"REF {_tok(ev.id)}.{_path(ref.path)} {ref.kind.upper()} {_tok(ref.target)}")
    for pid, p in g.payloads.items():
        out.append(f"PAYLOAD {_tok(pid)} BEGIN")
        out.extend(_lines(p.subgraph))
        for b in p.boundary:
            out.append(
                f"BOUNDARY {_tok(b.external)} {_tok(b.interior)} {b.direction} {_kind_str(b.kind, b.verb)}"
            )
        for l in p.ref_links:
            out.append(f"REFLINK {_tok(l.event)}.{_path(l.path)} {l.kind.upper()} {_tok(l.target)}")
        out.append(f"PAYLOAD {_tok(pid)} END")
    return out


def to_canonical_string(g: GestGraph) -> str:
    """Deterministic line-based rendering; the empty graph renders as ``""``."""
    lines = _lines(g)
    return "\n".join(lines) + "\n" if lines else ""


_KIND_RE = re.compile(r"^([a-z_]+)(?:\((.*)\))?$")
_EDGE_RE = re.compile(r"^EDGE (\S+) -> (\S+) : (\S+)$")
_REF_RE = re.compile(r"^(REF|REFLINK) ([^\s.]+)\.(\S+) SAME_([A-Z]+) (\S+)$")
_BOUNDARY_RE = re.compile(r"^BOUNDARY (\S+) (\S+) (in|out) (\S+)$")
_PAYLOAD_RE = re.compile(r"^PAYLOAD (\S+) (BEGIN|END)$")


def _parse_kind(text: str, lineno: int) -> tuple[str, str | None]:
    m = _KIND_RE.match(text)
    if not m:
        raise CanonicalParseError(lineno, f"bad relation kind {text!r}")
    verb = unquote(m.group(2)) if m.group(2) is not None else None
    return m.group(1), verb


def _parse_event(line: str, lineno: int) -> Event:
    segs = line.split(" | ")
    head = segs[0].split(" ")
    if len(head) != 2 or not head[1]:
        raise CanonicalParseError(lineno, "expected 'EVENT <id>'")
    fields: dict[str, str] = {}
    for seg in segs[1:]:
        key, sep, value = seg.partition("=")
        if not sep:
            raise CanonicalParseError(lineno, f"segment {seg!r} lacks '='")
        if key in fields:
            raise CanonicalParseError(lineno, f"repeated segment {key!r}")
        if key not in ("action", "entities", "location", "time", "props"):
            raise CanonicalParseError(lineno, f"unknown segment {key!r}")
        fields[key] = value
    if "action" not in fields:
        raise CanonicalParseError(lineno, "missing action")
    entities: tuple[str, ...] = ()
    if "entities" in fields:
        entities = tuple(unquote(e) for e in fields["entities"].split(","))
    tf = Timeframe()
    if "time" in fields:
        label, _, order = fields["time"].partition("#")
        try:
            order_val = int(order) if order else None
        except ValueError:
            raise CanonicalParseError(lineno, f"time order {order!r} is not an integer") from None
        tf = Timeframe(unquote(label) if label else None, order_val)
    props = {}
    if "props" in fields:
        for item in fields["props"].split(";"):
            k, sep, v = item.partition("=")
            if not sep:
                raise CanonicalParseError(lineno, f"property {item!r} lacks '='")
            props[unquote(k)] = unquote(v)
    return Event(
        id=unquote(head[1]),
        action=unquote(fields["action"]),
        entities=entities,
        location=unquote(fields["location"]) if "location" in fields else None,
        timeframe=tf,
        properties=props,
    )


def parse_canonical_string(s: str) -> GestGraph:
    """Inverse of :func:`to_canonical_string`.

    Raises :class:`CanonicalParseError` carrying the 1-based line number.
    """
    lines = s.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    graph, _, _, _ = _parse_block(lines, 0, None)
    return graph


def _parse_block(lines: list[str], pos: int, closing: str | None):
    events: dict[str, Event] = {}
    relations: list[Relation] = []
    refs: dict[str, list[Ref]] = {}
    payloads: dict[str, AbstractionPayload] = {}
    boundary: list[Boundary] = []
    links: list[RefLink] = []

    while pos < len(lines):
        line = lines[pos]
        lineno = pos + 1
        pos += 1
        if not line.strip():
            raise CanonicalParseError(lineno, "blank line")
        word = line.split(" ", 1)[0]
        if word == "EVENT":
            ev = _parse_event(line, lineno)
            if ev.id in events:
                raise CanonicalParseError(lineno, f"duplicate event {ev.id!r}")
            events[ev.id] = ev
        elif word == "EDGE":
            m = _EDGE_RE.match(line)
            if not m:
                raise CanonicalParseError(lineno, "expected 'EDGE <src> -> <dst> : <kind>'")
            kind, verb = _parse_kind(m.group(3), lineno)
            relations.append(Relation(unquote(m.group(1)), unquote(m.group(2)), kind, verb))
        elif word in ("REF", "REFLINK"):
            m = _REF_RE.match(line)
            if not m:
                raise CanonicalParseError(lineno, f"expected '{word} <id>.<path> SAME_<KIND> <target>'")
            owner, path = unquote(m.group(2)), unquote(m.group(3))
            kind, target = "same_" + m.group(4).lower(), unquote(m.group(5))
            if word == "REF":
                refs.setdefault(owner, []).append(Ref(path, target, kind))
            elif closing is None:
                raise CanonicalParseError(lineno, "REFLINK outside a payload block")
            else:
                links.append(RefLink(owner, path, kind, target))
        elif word == "BOUNDARY":
            if closing is None:
                raise CanonicalParseError(lineno, "BOUNDARY outside a payload block")
            m = _BOUNDARY_RE.match(line)
            if not m:
                raise CanonicalParseError(lineno, "expected 'BOUNDARY <external> <interior> <in|out> <kind>'")
            kind, verb = _parse_kind(m.group(4), lineno)
            boundary.append(Boundary(unquote(m.group(1)), unquote(m.group(2)), kind, verb, m.group(3)))
        elif word == "PAYLOAD":
            m = _PAYLOAD_RE.match(line)
            if not m:
                raise CanonicalParseError(lineno, "expected 'PAYLOAD <id> BEGIN|END'")
            pid = unquote(m.group(1))
            if m.group(2) == "END":
                if pid != closing:
                    raise CanonicalParseError(lineno, f"unexpected end of payload {pid!r}")
                return _assemble(events, relations, refs, payloads, lineno), pos, boundary, links
            sub, pos, sub_boundary, sub_links = _parse_block(lines, pos, pid)
            if pid in payloads:
                raise CanonicalParseError(lineno, f"duplicate payload {pid!r}")
            payloads[pid] = AbstractionPayload(sub, tuple(sub_boundary), tuple(sub_links))
        else:
            raise CanonicalParseError(lineno, f"unknown record type {word!r}")

    if closing is not None:
        raise CanonicalParseError(len(lines), f"payload {closing!r} is never closed")
    return _assemble(events, relations, refs, payloads, len(lines)), pos, boundary, links


def _assemble(events, relations, refs, payloads, lineno) -> GestGraph:
    for owner, rs in refs.items():
        if owner not in events:
            raise CanonicalParseError(lineno, f"REF for unknown event {owner!r}")
        events[owner] = replace(events[owner], refs=tuple(rs))
    return GestGraph(events, tuple(relations), payloads)
