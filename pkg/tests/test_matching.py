import itertools
import math
import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gest.embeddings import EmbeddingTable, load_embeddings
from gest.model import Event, GestGraph, Relation, Timeframe
from gest.matching import (
    CandidateCapError,
    MatchConfig,
    assignment_objective,
    brute_force_match,
    build_affinity,
    edge_similarity,
    entity_similarity,
    graph_similarity,
    greedy_discretize,
    node_similarity,
    principal_eigenvector,
    sm_match,
)

from .helpers import distinct_graph, permuted, random_graph

DATA = Path(__file__).parent / "data"
CFG = MatchConfig()


@pytest.fixture(scope="module")
def table():
    return load_embeddings(DATA / "fixture_embeddings.txt", expected_dim=10)


@pytest.fixture(scope="module")
def vocab(table):
    return sorted(table.vectors)


def raw_vectors():
    """Parse the fixture file without going through the loader."""
    out = {}
    for line in (DATA / "fixture_embeddings.txt").read_text().splitlines():
        w, *vals = line.split()
        out[w] = np.array([float(v) for v in vals])
    return out


# ------------------------------------------------------------ node / edge


def test_identical_events(table):
    ev = Event("x", "open", ("man", "door"), "kitchen", Timeframe("morning", 1), {"k": "v"})
    assert node_similarity(ev, ev, table, CFG) == pytest.approx(1.0, abs=1e-12)


def test_missing_location_costs_its_weight(table):
    a = Event("x", "open", ("man",), "kitchen")
    b = Event("y", "open", ("man",), None)
    assert node_similarity(a, b, table, CFG) == pytest.approx(1 - CFG.w_location, abs=1e-12)


def test_open_vs_close(table):
    vec = raw_vectors()
    u, v = vec["open"], vec["close"]
    s = (float(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v)) + 1) / 2
    a, b = Event("x", "open", ("door",)), Event("y", "close", ("door",))
    assert node_similarity(a, b, table, CFG) == pytest.approx(1 - CFG.w_action * (1 - s), abs=1e-12)


def test_entity_similarity_rules(table):
    assert entity_similarity(table, [], []) == 1.0
    assert entity_similarity(table, ["man"], []) == 0.0
    # unequal lengths average over the longer list
    vec = raw_vectors()

    def ps(x, y):
        c = float(vec[x] @ vec[y]) / (np.linalg.norm(vec[x]) * np.linalg.norm(vec[y]))
        return (c + 1) / 2

    # equal lengths: symmetric average of both directions
    got = entity_similarity(table, ["man", "door", "zzz"], ["dog", "cat", "zzz"])
    other = entity_similarity(table, ["dog", "cat", "zzz"], ["man", "door", "zzz"])
    assert got == pytest.approx(other, abs=1e-15)
    longer = entity_similarity(table, ["man", "door", "zzz"], ["dog", "cat"])
    exp_longer = (max(ps("man", "dog"), ps("man", "cat")) + max(ps("door", "dog"), ps("door", "cat")) + 0.0) / 3
    assert longer == pytest.approx(exp_longer, abs=1e-12)


def test_edge_similarity_examples():
    a = 0.5
    cfg = MatchConfig(alpha_rel=a)
    r = lambda k, v=None: Relation("a", "b", k, v)
    assert edge_similarity(r("next"), r("next"), 1, 1, cfg) == 1.0
    assert edge_similarity(r("next"), r("causes"), 1, 1, cfg) == pytest.approx(1 - a)
    assert edge_similarity(r("before"), r("after"), 1, 1, cfg) == pytest.approx(1 - 0.5 * a)
    assert edge_similarity(r("caused_by"), r("causes"), 0.25, 1, cfg) == pytest.approx(0.5 * a + (1 - a) * 0.5)
    t = EmbeddingTable({"avoid": [1, 0], "dodge": [0, 1]})
    assert edge_similarity(r("other", "avoid"), r("other", "dodge"), 1, 1, cfg, t) == pytest.approx(a * 0.5 + (1 - a))


def test_config_validation():
    with pytest.raises(ValueError):
        MatchConfig(w_action=0.5)
    with pytest.raises(ValueError):
        MatchConfig(alpha_rel=1.5)
    cfg = MatchConfig(w_action=0.2, w_entities=0.5)
    assert MatchConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ValueError):
        MatchConfig.from_dict({"nope": 1})


# ----------------------------------------------------------------- affinity


def test_affinity_single_nodes(table):
    g1 = GestGraph({"a": Event("a", "open", ("door",))})
    g2 = GestGraph({"b": Event("b", "close", ("door",))})
    aff = build_affinity(g1, g2, table)
    assert aff.M.shape == (1, 1)
    assert aff.M[0, 0] == node_similarity(g1.events["a"], g2.events["b"], table)


def test_affinity_self_two_nodes(table):
    g = GestGraph(
        {"a": Event("a", "open", ("door",)), "b": Event("b", "walk", ("man",), "kitchen")},
        (Relation("a", "b", "next"),),
    )
    M = build_affinity(g, g, table).M
    ns = lambda u, v: node_similarity(g.events[u], g.events[v], table)
    ids = ["a", "b"]
    expected = np.zeros((4, 4))
    for i, a in itertools.product(range(2), repeat=2):
        expected[i * 2 + a, i * 2 + a] = ns(ids[i], ids[a])
    # only the aligned pair (a->a, b->b) agrees on the single edge
    expected[0, 3] = expected[3, 0] = 1.0
    np.testing.assert_allclose(M, expected, atol=1e-12)


def test_affinity_without_edges_is_diagonal(table, vocab):
    rng = random.Random(3)
    g1, g2 = distinct_graph(rng, 3, vocab, edge_p=0), distinct_graph(rng, 4, vocab, edge_p=0)
    M = build_affinity(g1, g2, table).M
    np.testing.assert_array_equal(M, np.diag(np.diag(M)))


def test_affinity_cap(table, vocab):
    g = distinct_graph(random.Random(0), 5, vocab)
    with pytest.raises(CandidateCapError):
        build_affinity(g, g, table, MatchConfig(max_candidates=24))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_affinity_invariants(seed):
    rng = random.Random(seed)
    table = load_embeddings(DATA / "fixture_embeddings.txt")
    g1, g2 = random_graph(rng, rng.randint(1, 6)), random_graph(rng, rng.randint(1, 6))
    for cfg in (CFG, MatchConfig(refs_as_edges=True)):
        aff = build_affinity(g1, g2, table, cfg)
        M = aff.M
        assert np.abs(M - M.T).max() <= 1e-12
        assert M.min() >= 0 and M.max() <= 1
        n2 = aff.n2
        for p, q in zip(*np.nonzero(M)):
            i, a = divmod(p, n2)
            j, b = divmod(q, n2)
            assert p == q or (i != j and a != b)


# ------------------------------------------------------------ eigenvector


def test_eigen_diagonal():
    np.testing.assert_allclose(principal_eigenvector(np.diag([2.0, 1.0])), [1, 0], atol=1e-6)


def test_eigen_swap():
    x = principal_eigenvector(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(x, [1 / math.sqrt(2)] * 2, atol=1e-6)


def test_eigen_bipartite_path():
    # spectrum +-sqrt(2), 0: plain iteration from uniform would oscillate
    M = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    x = principal_eigenvector(M, tol=1e-12)
    np.testing.assert_allclose(x, [0.5, 1 / math.sqrt(2), 0.5], atol=1e-9)


def test_eigen_zero_matrix():
    with pytest.raises(ValueError):
        principal_eigenvector(np.zeros((3, 3)))


def eigh_oracle(M):
    w, V = np.linalg.eigh(M)
    v = V[:, np.argmax(w)]
    return np.abs(v) / np.linalg.norm(v)


@pytest.mark.parametrize("seed", range(10))
def test_eigen_random_6x6(seed):
    rng = np.random.default_rng(seed)
    A = rng.random((6, 6))
    M = (A + A.T) / 2
    x = principal_eigenvector(M)
    assert abs(np.linalg.norm(x) - 1) < 1e-12 and x.min() >= 0
    assert float(x @ eigh_oracle(M)) >= 1 - 1e-6


# -------------------------------------------------------------- discretize


def test_greedy_two_step():
    a = greedy_discretize([0.9, 0.1, 0.2, 0.8], 2, 2)
    assert a.pairs == ((0, 0), (1, 1))


def test_greedy_tie_prefers_smaller_index():
    a = greedy_discretize([0.5, 0.0, 0.0, 0.5], 2, 2)
    assert a.pairs == ((0, 0), (1, 1))
    b = greedy_discretize([0.5, 0.5, 0.0, 0.0], 2, 2)
    assert b.pairs == ((0, 0),)


def test_greedy_zeros():
    assert greedy_discretize(np.zeros(6), 2, 3).pairs == ()


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 10**6))
def test_greedy_is_one_to_one(n1, n2, seed):
    x = np.random.default_rng(seed).random(n1 * n2)
    pairs = greedy_discretize(x, n1, n2).pairs
    assert len({i for i, _ in pairs}) == len(pairs) == len({a for _, a in pairs}) == min(n1, n2)


# -------------------------------------------------------------- matching


def test_isolated_nodes_are_matched(table, vocab):
    g = distinct_graph(random.Random(4), 5, vocab, edge_p=0)
    g = GestGraph(g.events, (Relation("n0", "n1", "next"),))
    a = sm_match(g, g, table)
    assert a.id_pairs == tuple((i, i) for i in sorted(g.events))


def test_assignment_is_complete_even_without_affinity(table):
    g1 = GestGraph([Event("a", "alpha"), Event("b", "beta")])
    g2 = GestGraph([Event("x", "omega"), Event("y", "psi"), Event("z", "chi")])
    anti = load_embeddings(DATA / "antipodal_embeddings.txt")
    cfg = MatchConfig(w_action=1.0, w_entities=0.0, w_location=0.0, w_time=0.0, w_props=0.0)
    a = sm_match(g1, g2, anti, cfg)
    assert len(a.pairs) == 2 and a.objective == 0.0


def test_empty_graph_match(table, vocab):
    g = distinct_graph(random.Random(1), 3, vocab)
    a = sm_match(g, GestGraph(), table)
    assert a.pairs == () and a.objective == 0.0


def test_brute_force_single(table):
    g1 = GestGraph({"a": Event("a", "open")})
    g2 = GestGraph({"b": Event("b", "close")})
    a = brute_force_match(g1, g2, table)
    assert a.pairs == ((0, 0),)
    assert a.objective == node_similarity(g1.events["a"], g2.events["b"], table)


def brute_reference(M, n1, n2):
    """Loop-only reference optimum, independent of the vectorised oracle."""
    best = -1.0
    for perm in itertools.permutations(range(n2), n1):
        x = np.zeros(n1 * n2)
        for i, a in enumerate(perm):
            x[i * n2 + a] = 1
        best = max(best, float(x @ M @ x))
    return best


@pytest.mark.parametrize("seed", range(8))
def test_brute_force_3_vs_4(table, vocab, seed):
    rng = random.Random(seed)
    g1, g2 = distinct_graph(rng, 3, vocab), distinct_graph(rng, 4, vocab)
    aff = build_affinity(g1, g2, table)
    bf = brute_force_match(g1, g2, table)
    assert bf.objective == pytest.approx(brute_reference(aff.M, 3, 4), abs=1e-12)
    sm = sm_match(g1, g2, table)
    assert sm.objective <= bf.objective
    # oracle is orientation-independent
    assert brute_force_match(g2, g1, table).objective == pytest.approx(bf.objective, abs=1e-12)


def test_brute_force_limit(table, vocab):
    g = distinct_graph(random.Random(0), 7, vocab)
    with pytest.raises(ValueError):
        brute_force_match(g, g, table)


@pytest.mark.parametrize("seed", range(10))
def test_sm_recovers_identity_and_permutation(table, vocab, seed):
    rng = random.Random(seed)
    g = distinct_graph(rng, rng.randint(3, 5), vocab)
    self_match = sm_match(g, g, table)
    assert self_match.pairs == tuple((i, i) for i in range(len(g)))
    h, mapping = permuted(g, rng)
    sm = sm_match(g, h, table)
    assert dict(sm.id_pairs) == mapping
    bf = brute_force_match(g, h, table)
    assert sm.objective == bf.objective == self_match.objective


def test_objective_is_order_free():
    rng = np.random.default_rng(0)
    A = rng.random((9, 9))
    M = A + A.T
    pairs = [(0, 1), (1, 2), (2, 0)]
    assert assignment_objective(M, pairs, 3) == assignment_objective(M, pairs[::-1], 3)


# -------------------------------------------------------------- similarity


def test_similarity_empty_cases(table, vocab):
    g = distinct_graph(random.Random(0), 2, vocab)
    assert graph_similarity(GestGraph(), GestGraph(), table) == 1.0
    assert graph_similarity(g, GestGraph(), table) == 0.0
    assert graph_similarity(GestGraph(), g, table) == 0.0


def test_self_and_permuted_similarity(table, vocab):
    rng = random.Random(11)
    g = distinct_graph(rng, 5, vocab)
    assert graph_similarity(g, g, table) == pytest.approx(1.0, abs=1e-9)
    h, _ = permuted(g, rng)
    assert graph_similarity(g, h, table) == pytest.approx(1.0, abs=1e-6)


def disjoint_pair():
    left = GestGraph(
        [
            Event("a1", "alpha", ("beta",), "gamma", Timeframe("delta"), {"k": "alpha"}),
            Event("a2", "beta", ("gamma", "delta"), "epsilon", Timeframe("zeta"), {"k": "beta"}),
        ],
        (Relation("a1", "a2", "next"),),
    )
    right = GestGraph(
        [
            Event("b1", "omega", ("psi",), "chi", Timeframe("phi"), {"k": "omega"}),
            Event("b2", "psi", ("chi", "phi"), "upsilon", Timeframe("tau"), {"j": "psi"}),
        ],
        (Relation("b1", "b2", "causes"),),
    )
    return left, right


def test_disjoint_vocabularies():
    table = load_embeddings(DATA / "antipodal_embeddings.txt")
    left, right = disjoint_pair()
    assert graph_similarity(left, right, table) <= 0.05


def test_orthogonal_words_sit_at_midpoint():
    table = EmbeddingTable({"x": [1, 0], "y": [0, 1]})
    a, b = Event("a", "x"), Event("b", "y")
    # only the action differs; orthogonal vectors score 0.5 after rescaling
    assert node_similarity(a, b, table) == pytest.approx(1 - 0.4 * 0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_similarity_symmetric_bounded_permutation_invariant(seed):
    rng = random.Random(seed)
    table = load_embeddings(DATA / "fixture_embeddings.txt")
    vocab = sorted(table.vectors)
    # distinct actions keep the affinity free of exact ties
    g1, g2 = distinct_graph(rng, rng.randint(1, 6), vocab), distinct_graph(rng, rng.randint(1, 6), vocab)
    s = graph_similarity(g1, g2, table)
    assert 0 <= s <= 1
    assert abs(s - graph_similarity(g2, g1, table)) <= 1e-9
    p1, _ = permuted(g1, rng, "q")
    assert abs(graph_similarity(p1, g2, table) - s) <= 1e-6
