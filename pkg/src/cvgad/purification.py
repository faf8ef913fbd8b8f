"""Progressive removal of interfering edges from the clean view."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from cvgad.config import Hyperparams, check_mode
from cvgad.errors import ConsistencyError, DivergenceError
from cvgad.graph import AttributedGraph, remove_edges
from cvgad.model import Trainer, contrast_pass, prepare_features

log = logging.getLogger(__name__)


@dataclass
class NodeScoreVector:
    ns: np.ndarray
    nn: np.ndarray
    msc: np.ndarray


@dataclass
class EdgeInterference:
    """Interference value per existing clean-graph edge; absent pairs are 0."""

    edges: np.ndarray
    values: np.ndarray

    def get(self, i: int, j: int) -> float:
        u, v = min(i, j), max(i, j)
        hit = np.flatnonzero((self.edges[:, 0] == u) & (self.edges[:, 1] == v))
        return float(self.values[hit[0]]) if hit.size else 0.0


@dataclass
class PurificationState:
    clean: AttributedGraph
    original_edge_count: int
    iteration: int = 0
    removed: list = field(default_factory=list)
    counters: np.ndarray | None = None
    log: list = field(default_factory=list)
    node_scores: list = field(default_factory=list)

    def __post_init__(self):
        if self.counters is None:
            self.counters = np.zeros(self.clean.n, dtype=np.int64)

    def all_removed(self) -> np.ndarray:
        if not self.removed:
            return np.empty((0, 2), dtype=np.int64)
        return np.concatenate(self.removed, axis=0)


def node_contrast_scores(pair_scores, beta: float) -> NodeScoreVector:
    """Per-node score from anomalous-view discriminator outputs.

    ``pair_scores`` is a (4, n) array of (s+, s-, s^+, s^-) rows, or any
    object with ``pos_ns``/``neg_ns``/``pos_nn``/``neg_nn`` attributes.
    """
    if hasattr(pair_scores, "pos_ns"):
        rows = [np.asarray(getattr(pair_scores, k), dtype=np.float64) for k in ("pos_ns", "neg_ns", "pos_nn", "neg_nn")]
    else:
        rows = np.asarray(pair_scores, dtype=np.float64)
    pos_ns, neg_ns, pos_nn, neg_nn = rows
    ns = neg_ns - pos_ns
    nn_ = neg_nn - pos_nn
    return NodeScoreVector(ns=ns, nn=nn_, msc=beta * ns + (1 - beta) * nn_)


def edge_interference_matrix(scores, graph: AttributedGraph) -> EdgeInterference:
    msc = scores.msc if hasattr(scores, "msc") else np.asarray(scores, dtype=np.float64)
    e = graph.edges
    return EdgeInterference(edges=e.copy(), values=msc[e[:, 0]] + msc[e[:, 1]])


def removal_budget(K: float, original_edge_count: int) -> int:
    # round first so that e.g. 0.01 * 100 does not ceil to 2
    return int(math.ceil(round(K * original_edge_count, 9)))


def select_top_k(E: EdgeInterference, K: float, original_edge_count: int, budget: int | None = None) -> np.ndarray:
    """Highest-interference edges; ties broken by lexicographic edge id."""
    if budget is None:
        if not 0.0 < K <= 1.0:
            raise ValueError(f"K must lie in (0, 1], got {K}")
        budget = removal_budget(K, original_edge_count)
    budget = min(budget, E.edges.shape[0])
    if budget <= 0:
        return np.empty((0, 2), dtype=np.int64)
    order = np.lexsort((E.edges[:, 1], E.edges[:, 0], -E.values))
    return E.edges[order[:budget]]


def select_lowest_random_ties(edges: np.ndarray, values: np.ndarray, budget: int, rng: np.random.Generator):
    """Lowest-valued edges; ties straddling the cut are drawn uniformly.

    Returns the selection and the number of edges tied at the cut value.
    """
    budget = min(budget, edges.shape[0])
    if budget <= 0:
        return np.empty((0, 2), dtype=np.int64), 0
    order = np.lexsort((edges[:, 1], edges[:, 0], values))
    cut = values[order[budget - 1]]
    below = order[values[order] < cut]
    tied = order[values[order] == cut]
    pick = rng.choice(tied, size=budget - below.size, replace=False)
    sel = np.sort(np.concatenate([below, pick]))
    return edges[sel], int(tied.size)


def cosine_edge_similarity(Z: np.ndarray, edges: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(Z, axis=1)
    num = (Z[edges[:, 0]] * Z[edges[:, 1]]).sum(axis=1)
    den = norms[edges[:, 0]] * norms[edges[:, 1]]
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def aggregated_features(graph: AttributedGraph) -> np.ndarray:
    """One parameter-free propagation D^-1/2 (A+I) D^-1/2 X over the whole graph."""
    import scipy.sparse as sp

    a = graph.csr + sp.identity(graph.n, format="csr")
    dinv = 1.0 / np.sqrt(np.asarray(a.sum(axis=1)).ravel())
    norm = sp.diags(dinv) @ a @ sp.diags(dinv)
    return np.asarray(norm @ graph.features)


# --- ablation variants -----------------------------------------------------

@dataclass(frozen=True)
class Variant:
    """How a pipeline variant samples views, selects edges and blends scores."""

    mode: str = "full"
    selector: str = "score"  # score | sim | gcn
    one_shot: bool = False
    view_a: str = "anomalous"
    view_c: str = "clean"
    single_view: bool = False
    gamma_override: float | None = None


def ablation_mode(mode: str) -> Variant:
    check_mode(mode)
    return {
        "full": Variant("full"),
        "sim": Variant("sim", selector="sim"),
        "gcn": Variant("gcn", selector="gcn"),
        "ore": Variant("ore", one_shot=True),
        "bano": Variant("bano", view_c="anomalous"),
        "bcla": Variant("bcla", view_a="clean"),
        "ocla": Variant("ocla", view_a="clean", single_view=True),
        "con": Variant("con", gamma_override=1.0),
    }[mode]


def _derived_seed(seed: int, *tags: int) -> int:
    return int(np.random.default_rng([seed, *tags]).integers(2**31 - 1))


def purify_step(state: PurificationState, trainer: Trainer, graph_a: AttributedGraph, X, hyper: Hyperparams, variant: Variant | None = None):
    """Score nodes, drop the top edges from the clean view, reset the model."""
    variant = variant or Variant()
    t = state.iteration
    rng = np.random.default_rng([hyper.seed, t, 0xC0DE])
    raw = contrast_pass(trainer.model, X, graph_a, hyper, rng)
    scores = node_contrast_scores(raw, hyper.beta)
    if not np.isfinite(scores.msc).all():
        raise DivergenceError(f"non-finite node scores at purification iteration {t}")

    clean = state.clean
    per_iter = removal_budget(hyper.K, state.original_edge_count)
    if variant.one_shot:
        budget = removal_budget(hyper.K * hyper.iterations, state.original_edge_count) if t == 0 else 0
    else:
        budget = per_iter
    ties = 0
    if variant.selector == "score":
        E = edge_interference_matrix(scores, clean)
        chosen = select_top_k(E, hyper.K, state.original_edge_count, budget=budget)
        if chosen.shape[0]:
            cut = E.values[np.lexsort((E.edges[:, 1], E.edges[:, 0], -E.values))][chosen.shape[0] - 1]
            ties = int((E.values == cut).sum())
    else:
        Z = clean.features if variant.selector == "sim" else aggregated_features(clean)
        sim = cosine_edge_similarity(Z, clean.edges)
        chosen, ties = select_lowest_random_ties(clean.edges, sim, budget, rng)

    saturated = budget > clean.num_edges
    try:
        state.clean = remove_edges(clean, chosen)
    except ConsistencyError as exc:
        raise ConsistencyError(f"purification iteration {t}: {exc}") from exc
    np.add.at(state.counters, chosen.ravel(), 1)
    state.removed.append(chosen)
    state.node_scores.append(scores)
    state.log.append(
        {
            "iteration": t,
            "budget": int(budget),
            "removed": int(chosen.shape[0]),
            "ties_at_cut": ties,
            "saturated": bool(saturated),
            "clean_edges": int(state.clean.num_edges),
        }
    )
    state.iteration += 1
    trainer.reset(_derived_seed(hyper.seed, t + 1, 0x5EED))
    return state


@dataclass
class PipelineResult:
    trainer: Trainer
    graph_a: AttributedGraph
    state: PurificationState
    X: object
    variant: Variant
    losses: list

    @property
    def model(self):
        return self.trainer.model

    @property
    def clean(self) -> AttributedGraph:
        return self.state.clean


def _views(variant: Variant, graph_a, clean):
    pick = {"anomalous": graph_a, "clean": clean}
    return pick[variant.view_a], pick[variant.view_c]


def run_pipeline(graph: AttributedGraph, hyper: Hyperparams, mode: str = "full", progress=None) -> PipelineResult:
    """Alternate training and purification, then refine on the final views.

    ``progress(stage, iteration, epoch, loss)`` is called after every epoch
    when given.
    """
    variant = ablation_mode(mode)
    X = prepare_features(graph.features, hyper.feature_norm)
    trainer = Trainer(graph.o, hyper, seed=_derived_seed(hyper.seed, 0, 0x5EED))
    state = PurificationState(clean=graph, original_edge_count=graph.num_edges)
    losses = []

    def train(stage, it, epochs):
        va, vc = _views(variant, graph, state.clean)
        for _ in range(epochs):
            try:
                loss = trainer.train_epoch(X, va, vc, single_view=variant.single_view)
            except DivergenceError as exc:
                raise DivergenceError(f"{stage} iteration {it}: {exc}") from exc
            losses.append(loss)
            if progress:
                progress(stage, it, trainer.epoch, loss)

    for it in range(hyper.iterations):
        train("purify", it, hyper.epochs_per_iteration)
        purify_step(state, trainer, graph, X, hyper, variant)
    train("refine", hyper.iterations, hyper.refine_epochs)
    return PipelineResult(trainer=trainer, graph_a=graph, state=state, X=X, variant=variant, losses=losses)


def write_purification_artifacts(state: PurificationState, path) -> None:
    os.makedirs(path, exist_ok=True)
    for t, (rem, sc) in enumerate(zip(state.removed, state.node_scores)):
        with open(os.path.join(path, f"removed_edges_iter{t}.tsv"), "w", newline="\n") as fh:
            fh.write("".join(f"{u}\t{v}\n" for u, v in rem))
        with open(os.path.join(path, f"node_scores_iter{t}.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", "ns", "nn", "msc"])
            for i in range(sc.msc.size):
                w.writerow([i, f"{sc.ns[i]:.17g}", f"{sc.nn[i]:.17g}", f"{sc.msc[i]:.17g}"])
    with open(os.path.join(path, "purification_log.json"), "w") as fh:
        json.dump({"original_edges": state.original_edge_count, "iterations": state.log}, fh, indent=2, sort_keys=True)
        fh.write("\n")
