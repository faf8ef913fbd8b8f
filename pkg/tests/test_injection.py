import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvgad.config import InjectionConfig
from cvgad.errors import ConfigError
from cvgad.graph import AttributedGraph
from cvgad.injection import (
    derive_interfering_ground_truth,
    inject,
    inject_contextual,
    inject_structural,
    read_ground_truth,
    write_ground_truth,
)

from conftest import random_graph


def test_single_clique_on_edgeless_graph():
    g = AttributedGraph.from_pairs(np.zeros((20, 2)), [])
    g2, clique_edges, nodes = inject_structural(g, InjectionConfig(clique_size=15, clique_count=1))
    assert g2.num_edges == 105 == len(clique_edges)
    assert len(nodes) == 15


def test_zero_cliques_is_identity(triangle):
    g2, e, nodes = inject_structural(triangle, InjectionConfig(clique_count=0))
    assert g2 is triangle and len(e) == 0 and len(nodes) == 0


def test_default_clique_size():
    assert InjectionConfig().clique_size == 15


def test_structural_needs_enough_nodes():
    with pytest.raises(ConfigError):
        inject_structural(AttributedGraph.from_pairs(np.zeros((10, 1)), []), InjectionConfig(clique_count=1))


def test_contextual_copies_farthest_candidate():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 4.0], [0.0, 1.0]])
    g = AttributedGraph.from_pairs(X, [])
    cfg = InjectionConfig(clique_count=0, contextual_count=1, candidate_pool_size=3)
    # only node 0 is eligible; its pool is every other node
    g2, nodes = inject_contextual(g, cfg, exclude=[1, 2, 3])
    assert nodes.tolist() == [0]
    assert g2.features[0].tolist() == [3.0, 4.0]
    np.testing.assert_array_equal(g2.features[1:], X[1:])


def test_contextual_zero_is_identity(triangle):
    g2, nodes = inject_contextual(triangle, InjectionConfig(clique_count=0, contextual_count=0))
    assert len(nodes) == 0
    np.testing.assert_array_equal(g2.features, triangle.features)


def test_contextual_too_many():
    with pytest.raises(ConfigError):
        inject_contextual(AttributedGraph.from_pairs(np.zeros((4, 1)), []), InjectionConfig(clique_count=0, contextual_count=3), exclude=[0, 1])


def test_default_pool_size():
    assert InjectionConfig().candidate_pool_size == 50


def test_derive_interfering_examples():
    g = AttributedGraph.from_pairs(np.zeros((8, 1)), [(1, 2), (5, 6), (3, 4)])
    got = derive_interfering_ground_truth(np.array([[1, 2]]), [5], g)
    assert {tuple(e) for e in got.tolist()} == {(1, 2), (5, 6)}
    assert len(derive_interfering_ground_truth(np.empty((0, 2)), [7], g)) == 0
    # a clique edge touching a contextual node is counted once
    got = derive_interfering_ground_truth(np.array([[5, 6]]), [5], g)
    assert got.tolist() == [[5, 6]]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.integers(0, 20), st.integers(0, 2**31 - 1))
def test_injection_invariants(m, n_ctx, seed):
    g = random_graph(120, 0.05, o=4, seed=seed)
    cfg = InjectionConfig(clique_size=5, clique_count=m, contextual_count=n_ctx, seed=seed)
    g2, gt = inject(g, cfg)
    s, c = set(gt.structural_nodes.tolist()), set(gt.contextual_nodes.tolist())
    assert not s & c
    assert gt.anomaly_labels.sum() == 5 * m + n_ctx == len(s) + len(c)
    # edges only get added, and only inside cliques
    assert g.edge_set() <= g2.edge_set()
    added = g2.edge_set() - g.edge_set()
    assert all(u in s and v in s for u, v in added)
    changed = np.flatnonzero((g2.features != g.features).any(axis=1))
    assert set(changed.tolist()) == c
    interfering = gt.interfering_set()
    assert interfering <= g2.edge_set()
    for u, v in g2.edge_set():
        if u in c or v in c:
            assert (u, v) in interfering
    # repeat: identical output
    g3, gt3 = inject(g, cfg)
    assert g3.edge_set() == g2.edge_set()
    assert g3.features.tobytes() == g2.features.tobytes()
    assert gt3.interfering_set() == interfering


def test_equal_numbers_default():
    cfg = InjectionConfig(clique_count=5)
    assert cfg.n_contextual == 75


def test_ground_truth_roundtrip(tmp_path):
    g = random_graph(60, 0.1, seed=1)
    g2, gt = inject(g, InjectionConfig(clique_size=5, clique_count=2, seed=3))
    write_ground_truth(gt, tmp_path)
    back = read_ground_truth(tmp_path, g2.n)
    assert back.interfering_set() == gt.interfering_set()
    assert back.anomaly_labels.tolist() == gt.anomaly_labels.tolist()
    assert back.structural_nodes.tolist() == gt.structural_nodes.tolist()
    header = (tmp_path / "anomalies.csv").read_text().splitlines()[0]
    assert header == "node,type"
