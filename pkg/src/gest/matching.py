"""Graph matching between event graphs.

Candidate correspondences (i, a) between node i of the first graph and
node a of the second are indexed ``i * n2 + a``. The affinity matrix holds
node similarities on its diagonal and edge-pair agreement off the
diagonal; spectral matching takes its principal eigenvector and rounds it
greedily to a one-to-one assignment.
"""
from __future__ import annotations

import itertools
import json
import math
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from .embeddings import EmbeddingTable, phrase_similarity, words
from .model import Event, GestGraph, Relation
from .serialization import to_canonical_string

logger = logging.getLogger(__name__)

INVERSE_KINDS = {
    frozenset({"before", "after"}),
    frozenset({"causes", "caused_by"}),
}
INVERSE_COMPATIBILITY = 0.5
ZERO_RELATIVE = 1e-12
BRUTE_FORCE_MAX_NODES = 6
BRUTE_FORCE_MAX_MAPS = 2_000_000


class CandidateCapError(ValueError):
    """Too many candidate correspondences for a dense affinity matrix."""


@dataclass(frozen=True)
class MatchConfig:
    w_action: float = 0.4
    w_entities: float = 0.3
    w_location: float = 0.1
    w_time: float = 0.1
    w_props: float = 0.1
    alpha_rel: float = 0.5
    tol: float = 1e-8
    max_iter: int = 1000
    max_candidates: int = 4096
    refs_as_edges: bool = False

    def __post_init__(self):
        weights = self.node_weights()
        if any(w < 0 for w in weights):
            raise ValueError("node weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ValueError(f"node weights must sum to 1, got {sum(weights)!r}")
        if not 0.0 <= self.alpha_rel <= 1.0:
            raise ValueError("alpha_rel must lie in [0, 1]")
        if self.tol <= 0 or self.max_iter < 1 or self.max_candidates < 1:
            raise ValueError("tol, max_iter and max_candidates must be positive")

    def node_weights(self) -> tuple[float, ...]:
        return (self.w_action, self.w_entities, self.w_location, self.w_time, self.w_props)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "MatchConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown MatchConfig fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "MatchConfig":
        return cls.from_dict(json.loads(text))


# ------------------------------------------------------------ similarities


def _optional_similarity(table, a: Optional[str], b: Optional[str]) -> float:
    if a is None and b is None:
        return 1.0
    if a is None or b is None:
        return 0.0
    return phrase_similarity(table, words(a), words(b))


def _best_match_mean(table, longer: Sequence[str], shorter: Sequence[str]) -> float:
    return sum(
        max(phrase_similarity(table, words(x), words(y)) for y in shorter) for x in longer
    ) / len(longer)


def entity_similarity(table: EmbeddingTable, ents1: Sequence[str], ents2: Sequence[str]) -> float:
    """Greedy best-match average over the longer entity list.

    With equal lengths both directions are averaged so the result stays
    symmetric.
    """
    if not ents1 and not ents2:
        return 1.0
    if not ents1 or not ents2:
        return 0.0
    if len(ents1) > len(ents2):
        return _best_match_mean(table, ents1, ents2)
    if len(ents2) > len(ents1):
        return _best_match_mean(table, ents2, ents1)
    return 0.5 * (_best_match_mean(table, ents1, ents2) + _best_match_mean(table, ents2, ents1))


def property_similarity(p1, p2) -> float:
    s1, s2 = set(p1.items()), set(p2.items())
    if not s1 and not s2:
        return 1.0
    return len(s1 & s2) / len(s1 | s2)


def node_similarity(e1: Event, e2: Event, table: EmbeddingTable, cfg: MatchConfig | None = None) -> float:
    cfg = cfg or MatchConfig()
    parts = (
        phrase_similarity(table, words(e1.action), words(e2.action)),
        entity_similarity(table, e1.entities, e2.entities),
        _optional_similarity(table, e1.location, e2.location),
        _optional_similarity(table, e1.timeframe.label, e2.timeframe.label),
        property_similarity(e1.properties, e2.properties),
    )
    score = sum(w * s for w, s in zip(cfg.node_weights(), parts))
    return min(1.0, max(0.0, score))


def relation_similarity(r1: Relation, r2: Relation, table: EmbeddingTable | None = None) -> float:
    if r1.kind == "other" and r2.kind == "other":
        if table is None:
            return 1.0 if (r1.verb or "") == (r2.verb or "") else 0.0
        return phrase_similarity(table, words(r1.verb or ""), words(r2.verb or ""))
    if r1.kind == r2.kind:
        return 1.0
    if frozenset({r1.kind, r2.kind}) in INVERSE_KINDS:
        return INVERSE_COMPATIBILITY
    return 0.0


def edge_similarity(
    r1: Relation,
    r2: Relation,
    node_sim_src: float,
    node_sim_dst: float,
    cfg: MatchConfig | None = None,
    table: EmbeddingTable | None = None,
) -> float:
    cfg = cfg or MatchConfig()
    rel = relation_similarity(r1, r2, table)
    score = cfg.alpha_rel * rel + (1.0 - cfg.alpha_rel) * math.sqrt(node_sim_src * node_sim_dst)
    return min(1.0, max(0.0, score))


# ----------------------------------------------------------------- affinity


@dataclass
class AffinityMatrix:
    n1: int
    n2: int
    M: np.ndarray
    ids1: list[str] = field(default_factory=list)
    ids2: list[str] = field(default_factory=list)

    def index(self, i: int, a: int) -> int:
        return i * self.n2 + a

    def node_block(self) -> np.ndarray:
        """Node similarities as an (n1, n2) array."""
        return np.diag(self.M).reshape(self.n1, self.n2)


def matching_edges(g: GestGraph, cfg: MatchConfig) -> list[Relation]:
    edges = list(g.relations)
    if cfg.refs_as_edges:
        for ev in g.events.values():
            for ref in ev.refs:
                if ref.target in g.events and ref.target != ev.id:
                    edges.append(Relation(ev.id, ref.target, ref.kind))
        edges = sorted(set(edges))
    return edges


def build_affinity(g1: GestGraph, g2: GestGraph, table: EmbeddingTable, cfg: MatchConfig | None = None) -> AffinityMatrix:
    cfg = cfg or MatchConfig()
    ids1, ids2 = g1.node_ids, g2.node_ids
    n1, n2 = len(ids1), len(ids2)
    if n1 * n2 > cfg.max_candidates:
        raise CandidateCapError(f"{n1}x{n2} = {n1 * n2} candidates exceeds cap {cfg.max_candidates}")
    M = np.zeros((n1 * n2, n1 * n2))
    node = np.zeros((n1, n2))
    for i, u in enumerate(ids1):
        for a, v in enumerate(ids2):
            node[i, a] = node_similarity(g1.events[u], g2.events[v], table, cfg)
    M[np.diag_indices_from(M)] = node.ravel()

    pos1 = {u: i for i, u in enumerate(ids1)}
    pos2 = {v: a for a, v in enumerate(ids2)}
    edges2 = matching_edges(g2, cfg)
    for r1 in matching_edges(g1, cfg):
        i, j = pos1[r1.src], pos1[r1.dst]
        for r2 in edges2:
            a, b = pos2[r2.src], pos2[r2.dst]
            p, q = i * n2 + a, j * n2 + b
            s = edge_similarity(r1, r2, node[i, a], node[j, b], cfg, table)
            if s > M[p, q]:
                M[p, q] = M[q, p] = s
    return AffinityMatrix(n1, n2, M, ids1, ids2)


# ------------------------------------------------------------------- solver


def principal_eigenvector(M: np.ndarray, tol: float = 1e-8, max_iter: int = 1000) -> np.ndarray:
    """Leading eigenvector of a symmetric non-negative matrix by power iteration.

    Starts from the uniform vector and stops once successive iterates are
    closer than ``tol`` in L2, or after ``max_iter`` steps. Iterates on
    ``M + c I`` with ``c > 0``, which has the same eigenvectors.
    """
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise ValueError("M must be a non-empty square matrix")
    if not M.any():
        raise ValueError("M is all zeros")
    n = M.shape[0]
    x = np.full(n, 1.0 / math.sqrt(n))
    # a shift of half the uniform Rayleigh quotient (<= lambda_1 / 2) keeps the
    # eigenvectors but stops the -lambda_1 component of bipartite blocks from
    # making the iterates oscillate
    shift = 0.5 * float(x @ M @ x)
    for _ in range(max_iter):
        y = M @ x + shift * x
        norm = np.linalg.norm(y)
        if norm == 0:
            raise ValueError("power iteration collapsed to the zero vector")
        y /= norm
        if np.linalg.norm(y - x) < tol:
            x = y
            break
        x = y
    else:
        # slow convergence means a small spectral gap; the iterate is still usable
        logger.debug("power iteration stopped at max_iter=%d before reaching tol", max_iter)
    return np.clip(x, 0.0, None)


@dataclass(frozen=True)
class Assignment:
    pairs: tuple[tuple[int, int], ...]
    objective: float
    id_pairs: tuple[tuple[str, str], ...] = ()


def assignment_objective(M: np.ndarray, pairs, n2: int) -> float:
    """x^T M x for the indicator of ``pairs``, summed with exact rounding."""
    idx = [i * n2 + a for i, a in pairs]
    if not idx:
        return 0.0
    return math.fsum(M[np.ix_(idx, idx)].ravel().tolist())


def greedy_discretize(x, n1: int, n2: int) -> Assignment:
    """Round a candidate score vector to a one-to-one assignment.

    Takes the largest remaining score (ties go to the smallest ``(i, a)``),
    then discards row ``i`` and column ``a``. Stops when nothing positive is
    left (scores under ``1e-12`` of the peak count as zero) or ``min(n1, n2)``
    pairs are chosen. ``objective`` is left at 0;
    see :func:`sm_match`.
    """
    X = np.array(x, dtype=np.float64).reshape(n1, n2) if n1 * n2 else np.zeros((n1, n2))
    # entries this far below the peak are round-off or underflow, not signal
    floor = ZERO_RELATIVE * X.max() if X.size else 0.0
    pairs = []
    while len(pairs) < min(n1, n2):
        k = int(np.argmax(X))
        if not X.flat[k] > floor:
            break
        i, a = divmod(k, n2)
        pairs.append((i, a))
        X[i, :] = -np.inf
        X[:, a] = -np.inf
    return Assignment(tuple(sorted(pairs)), 0.0)


def _with_ids(aff: AffinityMatrix, pairs) -> Assignment:
    pairs = tuple(sorted(pairs))
    return Assignment(
        pairs,
        assignment_objective(aff.M, pairs, aff.n2),
        tuple((aff.ids1[i], aff.ids2[a]) for i, a in pairs),
    )


def sm_match_affinity(aff: AffinityMatrix, cfg: MatchConfig | None = None) -> Assignment:
    """Spectral matching on a prebuilt affinity.

    The principal eigenvector is zero on candidates outside its connected
    block (isolated nodes, for one), so once greedy rounding runs dry the
    solver repeats on the unassigned rows and columns. The diagonal of that
    residual problem is each candidate's gain given the pairs already taken.
    Leftovers that can add nothing are paired in index order so the
    assignment always has ``min(n1, n2)`` pairs.
    """
    cfg = cfg or MatchConfig()
    n1, n2, M = aff.n1, aff.n2, aff.M
    if n1 == 0 or n2 == 0:
        return Assignment((), 0.0)
    rows, cols = list(range(n1)), list(range(n2))
    pairs: list[tuple[int, int]] = []
    while rows and cols:
        cand = [i * n2 + a for i in rows for a in cols]
        R = M[np.ix_(cand, cand)].copy()
        if pairs:
            taken = [i * n2 + a for i, a in pairs]
            R[np.diag_indices_from(R)] += 2 * M[np.ix_(cand, taken)].sum(axis=1)
        if not R.any():
            break
        x = principal_eigenvector(R, cfg.tol, cfg.max_iter)
        found = greedy_discretize(x, len(rows), len(cols)).pairs
        if not found:
            break
        pairs += [(rows[r], cols[c]) for r, c in found]
        rows = [i for i in rows if i not in {r for r, _ in pairs}]
        cols = [a for a in cols if a not in {c for _, c in pairs}]
    pairs += list(zip(rows, cols))
    return _with_ids(aff, pairs)


def sm_match(g1: GestGraph, g2: GestGraph, table: EmbeddingTable, cfg: MatchConfig | None = None) -> Assignment:
    """Spectral matching: affinity -> principal eigenvector -> greedy rounding."""
    cfg = cfg or MatchConfig()
    return sm_match_affinity(build_affinity(g1, g2, table, cfg), cfg)


def brute_force_affinity(aff: AffinityMatrix) -> Assignment:
    n1, n2 = aff.n1, aff.n2
    k = min(n1, n2)
    if k == 0:
        return Assignment((), 0.0)
    if k > BRUTE_FORCE_MAX_NODES:
        raise ValueError(f"brute force limited to min(n1, n2) <= {BRUTE_FORCE_MAX_NODES}")
    if math.perm(max(n1, n2), k) > BRUTE_FORCE_MAX_MAPS:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_MAPS} injective maps")

    if n1 <= n2:
        maps = np.array(list(itertools.permutations(range(n2), n1)), dtype=np.int64)
        idx = np.arange(n1)[None, :] * n2 + maps
    else:
        maps = np.array(list(itertools.permutations(range(n1), n2)), dtype=np.int64)
        idx = maps * n2 + np.arange(n2)[None, :]
    M = aff.M
    scores = np.empty(len(idx))
    for start in range(0, len(idx), 20000):
        chunk = idx[start : start + 20000]
        scores[start : start + len(chunk)] = M[chunk[:, :, None], chunk[:, None, :]].sum(axis=(1, 2))
    top = scores.max()
    best = None
    for row in np.flatnonzero(scores >= top - 1e-9 * max(1.0, abs(top))):
        if n1 <= n2:
            pairs = tuple((i, int(a)) for i, a in enumerate(maps[row]))
        else:
            pairs = tuple(sorted((int(i), a) for a, i in enumerate(maps[row])))
        obj = assignment_objective(M, pairs, n2)
        if best is None or obj > best[0] or (obj == best[0] and pairs < best[1]):
            best = (obj, pairs)
    return _with_ids(aff, best[1])


def brute_force_match(g1: GestGraph, g2: GestGraph, table: EmbeddingTable, cfg: MatchConfig | None = None) -> Assignment:
    """Exhaustive optimum of x^T M x over injective maps (test oracle)."""
    if min(len(g1), len(g2)) > BRUTE_FORCE_MAX_NODES:
        raise ValueError(f"brute force limited to min(n1, n2) <= {BRUTE_FORCE_MAX_NODES}")
    return brute_force_affinity(build_affinity(g1, g2, table, cfg or MatchConfig()))


def normalized_score(raw12: float, raw11: float, raw22: float) -> float:
    denom = math.sqrt(raw11 * raw22)
    if denom <= 0:
        return 0.0
    return min(1.0, max(0.0, raw12 / denom))


def _orientation_key(g: GestGraph):
    return (len(g), to_canonical_string(g))


def self_objective(g: GestGraph, table: EmbeddingTable, cfg: MatchConfig | None = None) -> float:
    return sm_match(g, g, table, cfg).objective


def graph_similarity(
    g1: GestGraph,
    g2: GestGraph,
    table: EmbeddingTable,
    cfg: MatchConfig | None = None,
    self_scores: tuple[float, float] | None = None,
) -> float:
    """Matching objective normalized by the two self-match objectives, in [0, 1].

    ``self_scores`` may carry precomputed ``self_objective`` values for
    ``(g1, g2)`` when scoring many pairs over the same graphs.
    """
    cfg = cfg or MatchConfig()
    if not g1.events and not g2.events:
        return 1.0
    if not g1.events or not g2.events:
        return 0.0
    if self_scores is None:
        self_scores = (self_objective(g1, table, cfg), self_objective(g2, table, cfg))
    raw11, raw22 = self_scores
    # the solver is directional; fix the orientation so the score is symmetric
    if _orientation_key(g2) < _orientation_key(g1):
        g1, g2 = g2, g1
    raw12 = sm_match(g1, g2, table, cfg).objective
    return normalized_score(raw12, raw11, raw22)
