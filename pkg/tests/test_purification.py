import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cvgad.config import Hyperparams
from cvgad.errors import ConfigError, ConsistencyError
from cvgad.graph import AttributedGraph
from cvgad.model import PairScores, Trainer, prepare_features
from cvgad.purification import (
    EdgeInterference,
    PurificationState,
    ablation_mode,
    cosine_edge_similarity,
    edge_interference_matrix,
    node_contrast_scores,
    purify_step,
    removal_budget,
    run_pipeline,
    select_lowest_random_ties,
    select_top_k,
    write_purification_artifacts,
)

from conftest import random_graph


def test_node_scores_examples():
    raw = np.array([[0.9, 0.4, 1.0], [0.1, 0.4, 0.0], [0.5, 0.2, 1.0], [0.5, 0.2, 0.0]])
    s = node_contrast_scores(raw, beta=0.6)
    np.testing.assert_allclose(s.ns, [-0.8, 0.0, -1.0])
    np.testing.assert_allclose(s.nn, [0.0, 0.0, -1.0])
    np.testing.assert_allclose(s.msc[2], -1.0)


def test_node_scores_from_pair_scores():
    raw = np.random.default_rng(0).random((4, 5))
    ps = PairScores(*raw)
    a = node_contrast_scores(ps, 0.3)
    b = node_contrast_scores(raw, 0.3)
    np.testing.assert_array_equal(a.msc, b.msc)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0, 1))
def test_msc_is_linear_blend(seed, beta):
    raw = np.random.default_rng(seed).random((4, 30))
    s = node_contrast_scores(raw, beta)
    np.testing.assert_allclose(s.msc, beta * s.ns + (1 - beta) * s.nn, rtol=0, atol=1e-12)
    assert np.isfinite(s.msc).all()


def test_edge_interference_examples():
    g = AttributedGraph.from_pairs(np.zeros((3, 1)), [(0, 1)])
    E = edge_interference_matrix(np.array([0.3, 0.5, 9.0]), g)
    assert E.get(0, 1) == pytest.approx(0.8)
    assert E.get(1, 0) == E.get(0, 1)
    assert E.get(0, 2) == 0.0
    assert E.edges.tolist() == [[0, 1]]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_edge_interference_support_is_edge_set(seed):
    g = random_graph(25, 0.2, seed=seed)
    msc = np.random.default_rng(seed).normal(size=g.n)
    E = edge_interference_matrix(msc, g)
    assert {tuple(e) for e in E.edges.tolist()} == g.edge_set()
    np.testing.assert_array_equal(E.values, msc[E.edges[:, 0]] + msc[E.edges[:, 1]])


def test_top_k_ties_are_lexicographic():
    E = EdgeInterference(edges=np.array([[0, 1], [0, 2], [1, 2]]), values=np.array([0.9, 0.1, 0.9]))
    assert select_top_k(E, 1.0, 3, budget=2).tolist() == [[0, 1], [1, 2]]
    E2 = EdgeInterference(edges=np.array([[2, 3], [0, 5], [1, 4]]), values=np.array([0.5, 0.5, 0.5]))
    assert select_top_k(E2, 1.0, 3, budget=2).tolist() == [[0, 5], [1, 4]]


def test_top_k_saturation_and_empty():
    E = EdgeInterference(edges=np.array([[0, 1], [1, 2]]), values=np.array([0.1, 0.2]))
    assert len(select_top_k(E, 1.0, 2, budget=10)) == 2
    empty = EdgeInterference(edges=np.empty((0, 2), dtype=np.int64), values=np.empty(0))
    assert len(select_top_k(empty, 0.5, 10)) == 0
    with pytest.raises(ValueError):
        select_top_k(E, 0.0, 2)


def test_removal_budget():
    assert removal_budget(0.01, 5278) == 53
    assert removal_budget(0.01, 100) == 1
    assert removal_budget(0.05, 5278) == 264
    assert Hyperparams().K == 0.01


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.integers(1, 20))
def test_top_k_invariant_to_constant_shift(seed, c, budget):
    g = random_graph(30, 0.15, seed=seed)
    # coarse grid so ties are frequent; shifting by c keeps tie groups intact
    msc = np.random.default_rng(seed).integers(-4, 5, size=g.n) / 4.0
    a = select_top_k(edge_interference_matrix(msc, g), 1.0, g.num_edges, budget=budget)
    b = select_top_k(edge_interference_matrix(msc + c, g), 1.0, g.num_edges, budget=budget)
    assert {tuple(e) for e in a.tolist()} == {tuple(e) for e in b.tolist()}


def test_lowest_random_ties():
    edges = np.array([[0, 1], [0, 2], [1, 2], [2, 3]])
    vals = np.array([0.0, 0.0, 0.0, 0.7])
    picks = set()
    for s in range(30):
        sel, ties = select_lowest_random_ties(edges, vals, 2, np.random.default_rng(s))
        assert ties == 3 and len(sel) == 2
        assert [2, 3] not in sel.tolist()
        picks.add(tuple(map(tuple, sel.tolist())))
    assert len(picks) == 3


def test_cosine_similarity_handles_zero_rows():
    Z = np.array([[1.0, 0.0], [0.0, 0.0], [2.0, 0.0]])
    sim = cosine_edge_similarity(Z, np.array([[0, 1], [0, 2]]))
    np.testing.assert_allclose(sim, [0.0, 1.0])


def test_ablation_modes():
    assert ablation_mode("full").selector == "score"
    assert ablation_mode("sim").selector == "sim"
    assert ablation_mode("con").gamma_override == 1.0
    assert ablation_mode("ore").one_shot
    assert ablation_mode("ocla").single_view
    with pytest.raises(ConfigError):
        ablation_mode("nope")


def step_setup(seed=0, K=0.05):
    g = random_graph(60, 0.1, o=5, seed=seed)
    h = Hyperparams(d=8, K=K, iterations=3, epochs=3, refine_epochs=1, seed=seed)
    X = prepare_features(g.features, h.feature_norm)
    tr = Trainer(g.o, h, seed=seed)
    return g, h, X, tr


def test_purify_step_bookkeeping():
    g, h, X, tr = step_setup()
    frozen = (g.edges.copy(), g.features.copy())
    state = PurificationState(clean=g, original_edge_count=g.num_edges)
    before = tr.model.w_ns[0].detach().clone()
    tr.train_epoch(X, g, g)
    prev = g.edge_set()
    for t in range(3):
        removed_so_far = state.counters.sum()
        purify_step(state, tr, g, X, h)
        rem = state.removed[-1]
        assert len(rem) == removal_budget(h.K, g.num_edges)
        assert state.counters.sum() - removed_so_far == 2 * len(rem)
        cur = state.clean.edge_set()
        assert cur < prev
        assert prev - cur == {tuple(e) for e in rem.tolist()}
        prev = cur
    # anomalous graph untouched
    assert g.edges.tobytes() == frozen[0].tobytes()
    assert g.features.tobytes() == frozen[1].tobytes()
    # removals disjoint, counters equal incident removals
    allrem = state.all_removed()
    assert len({tuple(e) for e in allrem.tolist()}) == len(allrem)
    incident = np.bincount(allrem.ravel(), minlength=g.n)
    np.testing.assert_array_equal(incident, state.counters)
    assert [r["iteration"] for r in state.log] == [0, 1, 2]
    # model and optimiser were reinitialised
    assert tr.epoch == 0
    assert not np.allclose(before.numpy(), tr.model.w_ns[0].detach().numpy())


def test_purify_step_saturates():
    g = AttributedGraph.from_pairs(np.eye(4), [(0, 1), (2, 3)])
    h = Hyperparams(d=4, K=1.0, batch_size=4)
    tr = Trainer(4, h, seed=0)
    state = PurificationState(clean=g, original_edge_count=2)
    purify_step(state, tr, g, prepare_features(g.features), h)
    assert state.clean.num_edges == 0 and not state.log[0]["saturated"]
    purify_step(state, tr, g, prepare_features(g.features), h)
    assert state.log[1]["saturated"] and state.log[1]["removed"] == 0


def test_remove_missing_edge_is_consistency_error():
    from cvgad.graph import remove_edges

    g = AttributedGraph.from_pairs(np.zeros((3, 1)), [(0, 1)])
    with pytest.raises(ConsistencyError):
        remove_edges(g, [(1, 2)])


def test_pipeline_deterministic_and_artifacts(tmp_path):
    g = random_graph(50, 0.12, o=4, seed=3)
    h = Hyperparams(d=8, K=0.05, iterations=2, epochs=4, refine_epochs=2, seed=7)
    a = run_pipeline(g, h)
    b = run_pipeline(g, h)
    assert [r.tolist() for r in a.state.removed] == [r.tolist() for r in b.state.removed]
    assert a.losses == b.losses
    assert len(a.losses) == h.epochs + h.refine_epochs
    assert a.graph_a is g
    write_purification_artifacts(a.state, tmp_path)
    assert (tmp_path / "removed_edges_iter1.tsv").read_text().count("\n") == len(a.state.removed[1])
    assert (tmp_path / "node_scores_iter0.csv").read_text().startswith("node,ns,nn,msc\n")
    import json

    log = json.loads((tmp_path / "purification_log.json").read_text())
    assert log["original_edges"] == g.num_edges
    assert {"budget", "ties_at_cut", "saturated"} <= set(log["iterations"][0])


def test_pipeline_total_removed_fraction():
    g = random_graph(120, 0.08, o=4, seed=1)
    h = Hyperparams(d=8, K=0.01, iterations=5, epochs=5, refine_epochs=0)
    r = run_pipeline(g, h)
    total = len(r.state.all_removed())
    assert total == 5 * removal_budget(0.01, g.num_edges)
    assert abs(total / g.num_edges - 0.05) < 0.05


def test_pipeline_zero_iterations():
    g = random_graph(40, 0.1, o=4, seed=2)
    h = Hyperparams(d=8, iterations=0, epochs=0, refine_epochs=2)
    r = run_pipeline(g, h)
    assert r.clean.edge_set() == g.edge_set() and r.state.counters.sum() == 0


def test_ore_removes_whole_budget_once():
    g = random_graph(80, 0.1, o=4, seed=4)
    h = Hyperparams(d=8, K=0.02, iterations=3, epochs=3, refine_epochs=0)
    r = run_pipeline(g, h, mode="ore")
    sizes = [len(x) for x in r.state.removed]
    assert sizes == [removal_budget(0.06, g.num_edges), 0, 0]


@pytest.mark.parametrize("mode", ["sim", "gcn", "bano", "bcla", "ocla", "con"])
def test_every_ablation_runs(mode):
    g = random_graph(40, 0.12, o=4, seed=5)
    h = Hyperparams(d=8, K=0.05, iterations=2, epochs=2, refine_epochs=1)
    r = run_pipeline(g, h, mode=mode)
    assert r.variant.mode == mode
    assert len(r.state.removed) == 2
