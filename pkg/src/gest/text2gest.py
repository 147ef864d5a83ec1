"""Rule-based parser from controlled English to event graphs.

The accepted language is small on purpose: sentences made of clauses
joined by connectives from a closed lexicon, one verb per clause, with a
subject before the verb, objects after it and an optional location phrase
introduced by a preposition.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Optional

from .model import RELATION_KINDS, Event, GestGraph, Ref, Relation, Timeframe

logger = logging.getLogger(__name__)

CONJUNCTIONS = frozenset({"and", "or"})
_SENTENCE_RE = re.compile(r"[^.!?]+")
_TOKEN_RE = re.compile(r"[a-z0-9']+|,")
_SUFFIXES = ("ing", "ies", "ied", "es", "ed", "s", "d")


class LexiconError(ValueError):
    pass


class NoVerbFound(ValueError):
    def __init__(self, clause: "Clause"):
        super().__init__(f"no verb in clause {' '.join(clause.tokens)!r}")
        self.clause = clause


@dataclass(frozen=True)
class Lexicon:
    verbs: frozenset
    inflections: Mapping[str, str]
    connectives: Mapping[str, str]
    pronouns: frozenset
    determiners: frozenset
    prepositions: frozenset
    # connective phrases split into tokens, longest first
    _phrases: tuple = field(default=(), repr=False, compare=False)

    @classmethod
    def from_dict(cls, data: dict) -> "Lexicon":
        if not isinstance(data, dict):
            raise LexiconError("lexicon must be a JSON object")
        for key in ("verbs", "connectives", "pronouns", "determiners", "prepositions"):
            if key not in data:
                raise LexiconError(f"lexicon is missing {key!r}")
        verbs = data["verbs"]
        if not isinstance(verbs, dict):
            raise LexiconError("'verbs' must map lemma -> list of inflections")
        inflections = {}
        for lemma, forms in verbs.items():
            if not isinstance(lemma, str) or lemma != lemma.lower() or not lemma:
                raise LexiconError(f"verb lemma {lemma!r} must be a lowercase string")
            if not isinstance(forms, list) or not all(isinstance(f, str) for f in forms):
                raise LexiconError(f"inflections of {lemma!r} must be a list of strings")
            for form in forms:
                inflections.setdefault(form.lower(), lemma)
        connectives = data["connectives"]
        if not isinstance(connectives, dict):
            raise LexiconError("'connectives' must be an object")
        for phrase, kind in connectives.items():
            if phrase != phrase.lower() or not phrase.strip():
                raise LexiconError(f"connective {phrase!r} must be lowercase")
            if kind not in RELATION_KINDS or kind == "other":
                raise LexiconError(f"connective {phrase!r} maps to unknown kind {kind!r}")
        sets = {}
        for key in ("pronouns", "determiners", "prepositions"):
            if not isinstance(data[key], list) or not all(isinstance(w, str) for w in data[key]):
                raise LexiconError(f"{key!r} must be a list of strings")
            sets[key] = frozenset(w.lower() for w in data[key])
        phrases = tuple(
            sorted(((tuple(p.split()), k) for p, k in connectives.items()), key=lambda x: (-len(x[0]), x[0]))
        )
        return cls(
            verbs=frozenset(verbs),
            inflections=inflections,
            connectives=dict(connectives),
            _phrases=phrases,
            **sets,
        )

    def lemma(self, token: str) -> Optional[str]:
        """Verb lemma of ``token`` or None; suffix stripping as a fallback."""
        if token in self.inflections:
            return self.inflections[token]
        if token in self.verbs:
            return token
        for suffix in _SUFFIXES:
            if not token.endswith(suffix) or len(token) <= len(suffix) + 1:
                continue
            stem = token[: -len(suffix)]
            candidates = [stem, stem + "e"]
            if suffix in ("ies", "ied"):
                candidates = [stem + "y"]
            if len(stem) > 2 and stem[-1] == stem[-2]:
                candidates.append(stem[:-1])
            for cand in candidates:
                if cand in self.verbs:
                    return cand
        return None


def load_lexicon(path) -> Lexicon:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise LexiconError(f"lexicon file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise LexiconError(f"cannot read lexicon {path}: {exc}") from None
    return Lexicon.from_dict(data)


def default_lexicon() -> Lexicon:
    ref = resources.files("gest") / "data" / "default_lexicon.json"
    return Lexicon.from_dict(json.loads(ref.read_text(encoding="utf-8")))


def default_lexicon_path() -> Path:
    return Path(str(resources.files("gest") / "data" / "default_lexicon.json"))


@dataclass(frozen=True)
class Clause:
    tokens: tuple[str, ...]
    connective_in: Optional[str]
    sentence_index: int
    clause_index: int


def segment(text: str, lex: Lexicon | None = None) -> list[Clause]:
    """Split ``text`` into clauses.

    Sentences end at ``.``, ``!`` or ``?``. Inside a sentence a clause ends
    at a connective from the lexicon or at ``", and"``. A clause that opens
    a later sentence without a connective is linked with ``next``.
    """
    lex = lex or default_lexicon()
    clauses: list[Clause] = []
    sentences = [s for s in _SENTENCE_RE.findall(text.lower()) if _TOKEN_RE.search(s)]
    for s_idx, sentence in enumerate(sentences):
        tokens = _TOKEN_RE.findall(sentence)
        incoming = "next" if clauses else None
        current: list[str] = []
        c_idx = 0

        def close():
            nonlocal current, c_idx
            if current:
                clauses.append(Clause(tuple(current), incoming, s_idx, c_idx))
                c_idx += 1
            current = []

        i = 0
        while i < len(tokens):
            tok = tokens[i]
            if tok == "," and i + 1 < len(tokens) and tokens[i + 1] == "and":
                if current:
                    close()
                    incoming = "next"
                i += 2
                continue
            if tok == ",":
                i += 1
                continue
            matched = _match_connective(tokens, i, lex)
            if matched:
                phrase, kind = matched
                if current:
                    close()
                # a leading connective with nothing before it links to nothing
                incoming = kind if clauses else None
                i += len(phrase)
                continue
            current.append(tok)
            i += 1
        close()
    return clauses


def _match_connective(tokens, i, lex):
    for phrase, kind in lex._phrases:
        if tuple(tokens[i : i + len(phrase)]) == phrase:
            return phrase, kind
    return None


def _verb_positions(tokens, lex) -> list[tuple[int, str]]:
    found = []
    for i, tok in enumerate(tokens):
        # a word right after a determiner is read as a noun ("the park")
        if i > 0 and tokens[i - 1] in lex.determiners:
            continue
        if tok in lex.pronouns or tok in lex.determiners or tok in lex.prepositions:
            continue
        lemma = lex.lemma(tok)
        if lemma is not None:
            found.append((i, lemma))
    return found


def _runs(tokens, skip) -> list[str]:
    runs, cur = [], []
    for i, tok in enumerate(tokens):
        if i in skip or tok in CONJUNCTIONS:
            if cur:
                runs.append(" ".join(cur))
            cur = []
        else:
            cur.append(tok)
    if cur:
        runs.append(" ".join(cur))
    return runs


def extract_event(clause: Clause, lex: Lexicon, event_id: str) -> Event:
    """Build one event from a clause; raises :class:`NoVerbFound`."""
    tokens = list(clause.tokens)
    verbs = _verb_positions(tokens, lex)
    if not verbs:
        raise NoVerbFound(clause)
    v_idx, action = verbs[0]
    verb_idx = {i for i, _ in verbs}

    def stop(i):
        t = tokens[i]
        return i in verb_idx or t in lex.determiners or t in lex.prepositions

    subject = tokens[:v_idx]
    entities = _runs(subject, {i for i in range(len(subject)) if stop(i)})

    after = range(v_idx + 1, len(tokens))
    prep = next((i for i in after if tokens[i] in lex.prepositions), None)
    obj_end = prep if prep is not None else len(tokens)
    obj = tokens[v_idx + 1 : obj_end]
    entities += _runs(obj, {j for j in range(len(obj)) if stop(v_idx + 1 + j)})

    location = None
    if prep is not None:
        run = []
        for i in range(prep + 1, len(tokens)):
            if tokens[i] in lex.determiners and not run:
                continue
            if stop(i) or tokens[i] in CONJUNCTIONS:
                break
            run.append(tokens[i])
        location = " ".join(run) or None

    return Event(
        id=event_id,
        action=action,
        entities=tuple(entities),
        location=location,
        timeframe=Timeframe(None, clause.sentence_index),
    )


@dataclass
class ParseResult:
    graph: GestGraph
    warnings: list[str]
    clauses: list[Clause]


def parse_text_report(text: str, lex: Lexicon | None = None) -> ParseResult:
    lex = lex or default_lexicon()
    clauses = segment(text, lex)
    events: list[Event] = []
    relations: list[Relation] = []
    warnings: list[str] = []
    pending_kind: Optional[str] = None

    for clause in clauses:
        eid = f"e{len(events) + 1}"
        try:
            ev = extract_event(clause, lex, eid)
        except NoVerbFound as exc:
            warnings.append(f"sentence {clause.sentence_index + 1}: skipped, {exc}")
            logger.warning("skipping clause without verb: %s", " ".join(clause.tokens))
            pending_kind = pending_kind or clause.connective_in
            continue
        if events:
            kind = clause.connective_in or pending_kind or "next"
            relations.append(Relation(events[-1].id, eid, kind))
        pending_kind = None
        ev = _resolve_pronouns(ev, events, lex)
        events.append(ev)

    return ParseResult(GestGraph({e.id: e for e in events}, tuple(relations)), warnings, clauses)


def parse_text(text: str, lex: Lexicon | None = None) -> GestGraph:
    """Parse controlled English into a graph with ids ``e1..eN`` in text order."""
    return parse_text_report(text, lex).graph


def _resolve_pronouns(ev: Event, previous: list[Event], lex: Lexicon) -> Event:
    refs = []
    for k, ent in enumerate(ev.entities):
        if ent not in lex.pronouns:
            continue
        for prior in reversed(previous):
            if any(e not in lex.pronouns for e in prior.entities):
                refs.append(Ref(f"entities.{k}", prior.id, "same_entity"))
                break
    if not refs:
        return ev
    return Event(ev.id, ev.action, ev.entities, ev.location, ev.timeframe, ev.properties, tuple(refs))
