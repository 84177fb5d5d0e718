import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from netadapt.graph import (
    CombinationMatrix,
    build_topology,
    complete_topology,
    dump_topology,
    fiedler_value,
    identity_weights,
    largest_laplacian_eigenvalue,
    load_topology,
    metropolis_weights,
    random_geometric_topology,
    spectral_split,
)

from conftest import connected_topologies


def test_edges_are_canonical_and_sorted():
    topo = build_topology(4, [(3, 1), (2, 1), (4, 3)])
    assert topo.edges == ((1, 2), (1, 3), (3, 4))
    assert topo.neighborhoods[0] == {1, 2, 3}
    assert topo.connected
    assert list(topo.degrees()) == [2, 1, 2, 1]


def test_incidence_signs():
    C = build_topology(3, [(2, 3), (1, 2)]).incidence
    assert_allclose(C, [[1, -1, 0], [0, 1, -1]])


@pytest.mark.parametrize(
    "edges",
    [[(1, 1)], [(1, 2), (2, 1)], [(0, 1)], [(1, 4)], [(1, 2, 3)]],
)
def test_bad_edges_rejected(edges):
    with pytest.raises(ValueError):
        build_topology(3, edges)


def test_disconnected_is_flagged():
    topo = build_topology(4, [(1, 2), (3, 4)])
    assert not topo.connected
    assert fiedler_value(topo) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        spectral_split(topo)
    with pytest.raises(ValueError):
        metropolis_weights(topo)


def test_single_node():
    topo = build_topology(1, [])
    assert topo.connected
    assert fiedler_value(topo) == 0.0
    with pytest.raises(ValueError):
        spectral_split(topo)


def test_complete_graph_largest_eigenvalue():
    assert largest_laplacian_eigenvalue(complete_topology(5)) == pytest.approx(5.0, abs=1e-12)


@given(connected_topologies())
def test_laplacian_properties(topo):
    L = topo.laplacian
    assert_allclose(L, L.T)
    assert_allclose(L @ np.ones(topo.num_nodes), 0.0, atol=1e-12)
    assert_allclose(np.diag(L), topo.degrees())
    assert np.linalg.eigvalsh(L)[0] > -1e-10
    assert fiedler_value(topo) > 1e-9


@given(connected_topologies())
def test_spectral_split_reconstructs_incidence(topo):
    split = spectral_split(topo)
    N = topo.num_nodes
    C = topo.incidence
    assert_allclose(split.u_factor @ split.padded_s() @ split.v_full.T, C, atol=1e-10)
    assert_allclose(split.v_full.T @ split.v_full, np.eye(N), atol=1e-10)
    assert_allclose(split.v2.T @ topo.laplacian @ split.v2, np.diag(split.laplacian_eigs), atol=1e-9)
    assert_allclose(np.sort(split.laplacian_eigs), np.sort(np.diag(split.s2) ** 2), atol=1e-9)
    # sign convention: first nonzero entry of each v2 column is positive
    for col in split.v2.T:
        assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0


@given(connected_topologies())
def test_metropolis_is_symmetric_doubly_stochastic(topo):
    A = metropolis_weights(topo)
    W = A.weights
    assert_allclose(W, W.T)
    assert_allclose(W.sum(axis=0), 1.0, atol=1e-12)
    assert_allclose(W.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(W >= 0)
    assert A.respects(topo)


def test_combination_matrix_validation():
    with pytest.raises(ValueError):
        CombinationMatrix(np.array([[0.5, 0.5], [0.4, 0.5]]))
    with pytest.raises(ValueError):
        CombinationMatrix(np.array([[1.5, 0.0], [-0.5, 1.0]]))
    with pytest.raises(ValueError):
        CombinationMatrix(np.ones((2, 3)) / 2)
    assert identity_weights(3).respects(build_topology(3, [(1, 2), (2, 3)]))


def test_respects_detects_non_neighbors():
    topo = build_topology(3, [(1, 2), (2, 3)])
    assert not metropolis_weights(complete_topology(3)).respects(topo)


@given(connected_topologies(max_nodes=10))
def test_topology_file_round_trip(tmp_path_factory, topo):
    path = tmp_path_factory.mktemp("topo") / "g.txt"
    path.write_text("# generated\n" + dump_topology(topo))
    assert load_topology(path) == topo


def test_load_topology_errors(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("3 2\n1 2\n")
    with pytest.raises(ValueError, match="declares 2 edges"):
        load_topology(p)
    p.write_text("")
    with pytest.raises(ValueError):
        load_topology(p)


@pytest.mark.parametrize("n", [5, 20, 60])
def test_geometric_graph_is_connected(n):
    topo = random_geometric_topology(n, np.random.default_rng(n))
    assert topo.connected and topo.num_nodes == n


@given(st.integers(0, 1000))
def test_geometric_graph_is_seeded(seed):
    a = random_geometric_topology(12, np.random.default_rng(seed))
    b = random_geometric_topology(12, np.random.default_rng(seed))
    assert a == b
