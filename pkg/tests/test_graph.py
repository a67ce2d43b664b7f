import numpy as np
import pytest
from hypothesis import given

from curvegnn.datasets import path_graph, star_graph
from curvegnn.graph import (
    GraphFormatError,
    WeightedGraph,
    disjoint_union,
    format_edge_list,
    load_features,
    load_graph,
    load_labels,
    parse_edge_list,
    save_graph,
    write_vertex_csv,
)

from conftest import graphs


def test_default_weight_path():
    g = parse_edge_list("0 1\n1 2")
    assert g.n_vertices == 3 and g.n_edges == 2
    assert g.neighbors(1) == [(0, 1.0), (2, 1.0)]


def test_explicit_weight():
    g = parse_edge_list("0 1 2.5")
    assert g.neighbors(0) == [(1, 2.5)]


def test_self_loop_rejected():
    with pytest.raises(GraphFormatError, match=":1: self-loop"):
        parse_edge_list("0 0 1.0")


def test_conflicting_duplicate_reports_line():
    with pytest.raises(GraphFormatError, match="3: conflicting weight"):
        parse_edge_list("0 1 1.0\n1 2\n1 0 2.0")


def test_duplicate_edge_rejected():
    with pytest.raises(GraphFormatError, match="duplicate edge"):
        parse_edge_list("0 1\n1 0")


@pytest.mark.parametrize("text", ["0 1 x", "0 1 -1", "0 1 2 3", "0 1 nan"])
def test_bad_lines(text):
    with pytest.raises(GraphFormatError, match="<string>:1"):
        parse_edge_list(text)


def test_comments_and_isolated_vertices():
    g = parse_edge_list("# header\n5\n0 1 # trailing\n\n")
    assert g.n_vertices == 3
    assert g.neighbors(g.names.index("5")) == []


def test_non_numeric_ids_keep_first_appearance():
    g = parse_edge_list("b a\nc b")
    assert g.names == ("b", "a", "c")


def test_numeric_ids_sorted():
    g = parse_edge_list("10 2\n2 7")
    assert g.names == ("2", "7", "10")


def test_neighbors_k2_and_isolated():
    g = WeightedGraph(3, [(0, 1, 1.0)])
    assert g.neighbors(0) == [(1, 1.0)]
    assert g.neighbors(2) == []
    with pytest.raises(IndexError):
        g.neighbors(3)


def test_two_ball_examples():
    assert path_graph(3).two_ball(0) == [0, 1, 2]
    assert path_graph(2).two_ball(0) == [0, 1]
    assert star_graph(3).two_ball(1) == [1, 0, 2, 3]


def test_constructor_validation():
    with pytest.raises(ValueError):
        WeightedGraph(2, [(0, 1, 0.0)])
    with pytest.raises(ValueError):
        WeightedGraph(2, [(0, 2, 1.0)])
    with pytest.raises(ValueError):
        WeightedGraph(2, [(0, 1, 1.0), (1, 0, 1.0)])


@given(graphs(min_n=1))
def test_symmetry_and_two_ball_bounds(g):
    for x in range(g.n_vertices):
        for y, w in g.neighbors(x):
            assert (x, w) in g.neighbors(y)
        ball = g.two_ball(x)
        assert ball[0] == x
        assert set(y for y, _ in g.neighbors(x)) <= set(ball)
        assert len(ball) <= 1 + g.degree(x) + sum(g.degree(y) for y, _ in g.neighbors(x))


@given(graphs(min_n=1))
def test_round_trip(g):
    h = parse_edge_list(format_edge_list(g))
    assert h.n_vertices == g.n_vertices
    assert np.array_equal(h.edges, g.edges)
    assert np.array_equal(h.weights, g.weights)


def test_round_trip_file(tmp_path):
    g = WeightedGraph(4, [(0, 1, 0.1 + 0.2), (2, 1, 1e-7)])
    save_graph(g, tmp_path / "g.edges")
    assert load_graph(tmp_path / "g.edges") == g


def test_arcs_and_matrices():
    g = WeightedGraph(3, [(0, 1, 2.0), (1, 2, 3.0)])
    src, dst, eid = g.arcs
    assert len(src) == 4
    W = g.weight_matrix()
    assert np.allclose(W, W.T)
    assert W[0, 1] == 2.0 and W[2, 1] == 3.0
    assert np.allclose(g.weights[eid], W[src, dst])


def test_disjoint_union_owner():
    u, owner = disjoint_union([path_graph(2), path_graph(3)])
    assert u.n_vertices == 5 and u.n_edges == 3
    assert owner.tolist() == [0, 0, 1, 1, 1]
    assert u.neighbors(3) == [(2, 1.0), (4, 1.0)]


def test_relabel_and_components():
    g = WeightedGraph(4, [(0, 1, 1.0), (2, 3, 2.0)])
    assert len(set(g.components().tolist())) == 2
    assert not g.is_connected()
    h = g.relabel([3, 2, 1, 0])
    assert h.neighbors(3) == [(2, 1.0)]


def test_features_and_labels(tmp_path):
    g = parse_edge_list("a b\nb c")
    (tmp_path / "x.csv").write_text("vertex,f1,f2\nc,1,2\na,3,4\nb,5,6\n")
    X = load_features(tmp_path / "x.csv", g)
    assert X.tolist() == [[3, 4], [5, 6], [1, 2]]
    (tmp_path / "y.csv").write_text("vertex,label,split\na,0,train\nb,1,test\nc,0,val\n")
    labels, splits = load_labels(tmp_path / "y.csv", g)
    assert labels == {0: "0", 1: "1", 2: "0"}
    assert splits[2] == "val"
    write_vertex_csv(tmp_path / "o.csv", g, {"v": [0.5, 1, 2]})
    assert (tmp_path / "o.csv").read_text().splitlines()[1] == "a,0.5"


def test_feature_errors(tmp_path):
    g = parse_edge_list("a b")
    (tmp_path / "x.csv").write_text("vertex,f\na,1\nzz,2\n")
    with pytest.raises(GraphFormatError, match="unknown vertex 'zz'"):
        load_features(tmp_path / "x.csv", g)
    (tmp_path / "x.csv").write_text("vertex,f\na,1\n")
    with pytest.raises(GraphFormatError, match="no features"):
        load_features(tmp_path / "x.csv", g)
