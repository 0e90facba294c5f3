import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from swarmmoments.network import (
    Digraph,
    PacketLossModel,
    build_radius_graph,
    complete_graph,
    cycle_graph,
    from_edges,
    out_laplacian,
    parse_topology,
    sample_delivery,
    strongly_connected,
    write_edges_csv,
)


def adjacency(n_max=7):
    return st.integers(1, n_max).flatmap(
        lambda n: arrays(bool, (n, n)).map(lambda a: a & ~np.eye(n, dtype=bool))
    )


def test_radius_graph_examples():
    near = build_radius_graph([(0, 0), (0.4, 0)], 0.5)
    assert near.edges() == [(0, 1), (1, 0)]
    assert build_radius_graph([(0, 0), (0.6, 0)], 0.5).edges() == []
    pts = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    assert np.array_equal(build_radius_graph(pts, 2.9).adj, complete_graph(50).adj)


@given(arrays(float, (8, 2), elements=st.floats(-1, 1)), st.floats(0.05, 3.0))
def test_radius_graph_symmetric(pts, radius):
    g = build_radius_graph(pts, radius)
    assert np.array_equal(g.adj, g.adj.T)
    assert not np.any(np.diag(g.adj))


def test_self_loops_rejected():
    with pytest.raises(ValueError):
        Digraph(np.eye(3, dtype=bool))


def test_laplacian_examples():
    L = out_laplacian(complete_graph(3))
    assert np.array_equal(L, 3 * np.eye(3) - np.ones((3, 3)))
    L = out_laplacian(cycle_graph(4))
    assert np.array_equal(np.diag(L), np.ones(4))
    assert np.array_equal((L == -1).sum(axis=1), np.ones(4))


@given(adjacency())
def test_laplacian_rows_sum_to_zero(adj):
    g = Digraph(adj)
    L = out_laplacian(g)
    assert np.allclose(L.sum(axis=1), 0)
    assert np.array_equal(np.diag(L), g.out_degree)


@given(adjacency())
def test_strong_connectivity_matches_reachability(adj):
    assert strongly_connected(Digraph(adj)) == oracles.strongly_connected(adj)


def test_connectivity_examples():
    assert strongly_connected(complete_graph(5))
    assert strongly_connected(cycle_graph(6))
    assert not strongly_connected(from_edges(3, [(0, 1), (1, 0)]))


@given(adjacency(6))
def test_left_null_vector_positive_when_connected(adj):
    g = Digraph(adj)
    if g.n < 2 or not strongly_connected(g):
        return
    z = oracles.left_null_vector(out_laplacian(g))
    assert np.allclose(out_laplacian(g).T @ z, 0, atol=1e-10)
    assert np.all(z > 0)


def test_complete_graph_null_vector_is_uniform():
    z = oracles.left_null_vector(out_laplacian(complete_graph(6)))
    assert np.allclose(z, 1 / 6)


def test_delivery_examples():
    g = complete_graph(4)
    assert np.array_equal(sample_delivery(g, PacketLossModel(0.0, seed=1)), g.adj)
    sparse = sample_delivery(complete_graph(30), PacketLossModel(0.999, seed=1))
    assert sparse.sum() < 10
    with pytest.raises(ValueError):
        PacketLossModel(1.0)


def test_delivery_rate_law_of_large_numbers():
    g = from_edges(2, [(0, 1)])
    loss = PacketLossModel(0.3, seed=7)
    rate = np.mean([sample_delivery(g, loss)[0, 1] for _ in range(10_000)])
    assert abs(rate - 0.7) < 0.02


def test_delivery_is_deterministic_per_seed():
    g = complete_graph(10)
    a = [sample_delivery(g, PacketLossModel(0.3, seed=3)) for _ in range(1)]
    b = [sample_delivery(g, PacketLossModel(0.3, seed=3)) for _ in range(1)]
    assert np.array_equal(a[0], b[0])


def test_parse_topology():
    assert parse_topology("all_to_all") == ("all_to_all", None)
    assert parse_topology("radius:0.5") == ("radius", 0.5)
    assert parse_topology([[0, 1], [1, 0]]) == ("edges", [(0, 1), (1, 0)])
    for bad in ("radius:-1", "ring"):
        with pytest.raises(ValueError):
            parse_topology(bad)


def test_edges_csv(tmp_path):
    path = tmp_path / "edges.csv"
    write_edges_csv(cycle_graph(3), path)
    assert path.read_text().splitlines() == ["src,dst", "0,1", "1,2", "2,0"]
