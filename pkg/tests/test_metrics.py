from __future__ import annotations

import itertools

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asmell.detect import SmellInstance, SmellType
from asmell.errors import EmptyGraphError, MissingMetricError
from asmell.graph import Level, Node, build_graph
from asmell.metrics import compute_fan, instability, node_metrics, pagerank, smell_centrality


def cgraph(names, edges):
    return build_graph(Level.COMPONENT, [Node(n, Level.COMPONENT, 1) for n in names], edges)


def hand_pagerank(names, edges, d=0.85, iters=50):
    """Textbook power iteration written out with plain dicts."""
    n = len(names)
    out = {v: [b for a, b in edges if a == v] for v in names}
    r = {v: 1 / n for v in names}
    for _ in range(iters):
        dangling = sum(r[v] for v in names if not out[v])
        nxt = {v: (1 - d) / n + d * dangling / n for v in names}
        for v in names:
            for w in out[v]:
                nxt[w] += d * r[v] / len(out[v])
        r = nxt
    return r


def test_fan_counts():
    g = cgraph("ABC", [("A", "B"), ("A", "B")])
    assert compute_fan(g) == {"A": (0, 1), "B": (1, 0), "C": (0, 0)}


@pytest.mark.parametrize("fi,fo,expected", [(0, 5, 1.0), (5, 0, 0.0), (3, 1, 0.25), (0, 0, 0.0)])
def test_instability(fi, fo, expected):
    assert instability(fi, fo) == expected


def test_pagerank_two_cycle():
    pr = pagerank(cgraph("AB", [("A", "B"), ("B", "A")]))
    assert pr["A"] == pytest.approx(0.5, abs=1e-12) and pr["B"] == pytest.approx(0.5, abs=1e-12)


def test_pagerank_single_node():
    assert pagerank(cgraph("A", [])) == {"A": pytest.approx(1.0)}


def test_pagerank_empty():
    with pytest.raises(EmptyGraphError):
        pagerank(cgraph("", []))


def test_pagerank_chain_matches_hand_iteration():
    edges = [("A", "B"), ("B", "C")]
    pr = pagerank(cgraph("ABC", edges))
    oracle = hand_pagerank("ABC", edges)
    assert pr["C"] > pr["B"] > pr["A"]
    for v in "ABC":
        assert pr[v] == pytest.approx(oracle[v], abs=1e-9)


def test_pagerank_not_converged_is_flagged(caplog):
    caplog.set_level("WARNING", logger="asmell")
    pagerank(cgraph("ABC", [("A", "B"), ("B", "C")]), max_iter=2)
    assert "converge" in caplog.text


def _uniform_cycle():
    return cgraph("ABCD", [("A", "B"), ("B", "C"), ("C", "D"), ("D", "A")])


def test_centrality_uniform_graph_is_one():
    g = _uniform_cycle()
    m = node_metrics(g)
    inst = SmellInstance(SmellType.CD, Level.COMPONENT, 0, {"member": frozenset("AB")})
    assert smell_centrality(inst, m, len(g)) == pytest.approx(1.0)


def test_centrality_chain_sink_above_one():
    g = cgraph("ABC", [("A", "B"), ("B", "C")])
    m = node_metrics(g)
    assert smell_centrality({"C"}, m, 3) == pytest.approx(3 * hand_pagerank("ABC", [("A", "B"), ("B", "C")])["C"], abs=1e-8)
    assert smell_centrality({"C"}, m, 3) > 1.0


def test_centrality_errors():
    m = node_metrics(_uniform_cycle())
    with pytest.raises(MissingMetricError):
        smell_centrality(set(), m, 4)
    with pytest.raises(MissingMetricError):
        smell_centrality({"Z"}, m, 4)


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 9))
    names = [f"n{i}" for i in range(n)]
    pairs = [(a, b) for a, b in itertools.product(names, names) if a != b]
    edges = draw(st.lists(st.sampled_from(pairs), max_size=20)) if pairs else []
    return names, edges


@settings(max_examples=150, deadline=None)
@given(graphs())
def test_pagerank_properties(data):
    names, edges = data
    g = cgraph(names, edges)
    pr = pagerank(g)
    assert sum(pr.values()) == pytest.approx(1.0, abs=1e-9)
    assert all(v > 0 for v in pr.values())
    G = nx.DiGraph()
    G.add_nodes_from(names)
    G.add_edges_from(g.edges)
    ref = nx.pagerank(G, alpha=0.85, tol=1e-13, max_iter=1000)
    for v in names:
        assert pr[v] == pytest.approx(ref[v], abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50))
def test_instability_properties(fi, fo):
    i = instability(fi, fo)
    assert 0.0 <= i <= 1.0
    assert instability(2 * fi, 2 * fo) == pytest.approx(i)
    assert instability(fi, fo + 1) >= i


@settings(max_examples=100, deadline=None)
@given(graphs())
def test_node_metrics_consistent(data):
    names, edges = data
    g = cgraph(names, edges)
    m = node_metrics(g)
    fan = compute_fan(g)
    for v in names:
        assert (m[v].fan_in, m[v].fan_out) == fan[v]
        assert m[v].instability == instability(*fan[v])
