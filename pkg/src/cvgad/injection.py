"""Structural (clique) and contextual (feature swap) anomaly injection."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from cvgad.config import InjectionConfig
from cvgad.errors import ConfigError, MalformedBundleError
from cvgad.graph import AttributedGraph, add_edges, canonical_edges

STRUCTURAL = "structural"
CONTEXTUAL = "contextual"


@dataclass
class GroundTruth:
    anomaly_labels: np.ndarray
    interfering_edges: np.ndarray
    structural_nodes: np.ndarray
    contextual_nodes: np.ndarray

    def interfering_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.interfering_edges}


def inject_structural(graph: AttributedGraph, cfg: InjectionConfig, rng: np.random.Generator | None = None):
    """Plant ``clique_count`` disjoint cliques of ``clique_size`` random nodes.

    Returns ``(graph', clique_edges, clique_nodes)`` where ``clique_edges`` are
    all intra-clique pairs, including any that already existed.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    need = cfg.clique_size * cfg.clique_count
    if need > graph.n:
        raise ConfigError(f"{cfg.clique_count} cliques of {cfg.clique_size} need {need} nodes, graph has {graph.n}")
    if need == 0:
        return graph, np.empty((0, 2), dtype=np.int64), np.empty(0, dtype=np.int64)
    nodes = rng.choice(graph.n, size=need, replace=False)
    pairs = [p for clique in nodes.reshape(cfg.clique_count, cfg.clique_size) for p in combinations(clique, 2)]
    clique_edges = canonical_edges(pairs)
    out, _ = add_edges(graph, clique_edges)
    return out, clique_edges, np.sort(nodes)


def inject_contextual(
    graph: AttributedGraph,
    cfg: InjectionConfig,
    exclude=(),
    rng: np.random.Generator | None = None,
    count: int | None = None,
):
    """Overwrite the features of random nodes with those of a distant node.

    For each chosen node a pool of ``candidate_pool_size`` other nodes is
    drawn and the row of the candidate farthest in Euclidean distance is
    copied over. Distances use the features as they were before injection.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    count = cfg.n_contextual if count is None else count
    excluded = np.zeros(graph.n, dtype=bool)
    excluded[np.asarray(list(exclude), dtype=np.int64)] = True
    available = np.flatnonzero(~excluded)
    if count > available.size:
        raise ConfigError(f"{count} contextual anomalies requested, only {available.size} eligible nodes")
    if count == 0:
        return graph, np.empty(0, dtype=np.int64)
    chosen = rng.choice(available, size=count, replace=False)
    X0 = graph.features
    X = X0.copy()
    pool = min(cfg.candidate_pool_size, graph.n - 1)
    for v in chosen:
        others = rng.choice(graph.n - 1, size=pool, replace=False)
        others = others + (others >= v)  # skip v itself
        dist = np.linalg.norm(X0[others] - X0[v], axis=1)
        X[v] = X0[others[int(np.argmax(dist))]]
    return graph.with_features(X), np.sort(chosen)


def derive_interfering_ground_truth(clique_edges, contextual_nodes, graph: AttributedGraph) -> np.ndarray:
    """Clique edges plus every edge of ``graph`` touching a contextual anomaly."""
    touched = graph.incident_edges(contextual_nodes) if len(contextual_nodes) else np.empty((0, 2), np.int64)
    return canonical_edges(np.concatenate([np.asarray(clique_edges, dtype=np.int64).reshape(-1, 2), touched]))


def inject(graph: AttributedGraph, cfg: InjectionConfig) -> tuple[AttributedGraph, GroundTruth]:
    rng = np.random.default_rng(cfg.seed)
    g, clique_edges, clique_nodes = inject_structural(graph, cfg, rng)
    g, ctx_nodes = inject_contextual(g, cfg, exclude=clique_nodes, rng=rng)
    labels = np.zeros(graph.n, dtype=np.int64)
    labels[clique_nodes] = 1
    labels[ctx_nodes] = 1
    gt = GroundTruth(
        anomaly_labels=labels,
        interfering_edges=derive_interfering_ground_truth(clique_edges, ctx_nodes, g),
        structural_nodes=clique_nodes,
        contextual_nodes=ctx_nodes,
    )
    return g, gt


ANOMALIES_FILE = "anomalies.csv"
INTERFERING_FILE = "interfering_edges.tsv"


def write_ground_truth(gt: GroundTruth, path) -> None:
    with open(os.path.join(path, ANOMALIES_FILE), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "type"])
        rows = [(int(v), STRUCTURAL) for v in gt.structural_nodes] + [(int(v), CONTEXTUAL) for v in gt.contextual_nodes]
        w.writerows(sorted(rows))
    with open(os.path.join(path, INTERFERING_FILE), "w", newline="\n") as fh:
        fh.write("".join(f"{u}\t{v}\n" for u, v in gt.interfering_edges))


def read_ground_truth(path, n: int) -> GroundTruth | None:
    """Load the ground truth written by :func:`write_ground_truth`, if present."""
    afile = os.path.join(path, ANOMALIES_FILE)
    efile = os.path.join(path, INTERFERING_FILE)
    if not os.path.exists(afile):
        return None
    structural, contextual = [], []
    with open(afile, newline="") as fh:
        for row in csv.DictReader(fh):
            (structural if row["type"] == STRUCTURAL else contextual).append(int(row["node"]))
    labels = np.zeros(n, dtype=np.int64)
    labels[structural + contextual] = 1
    edges = np.empty((0, 2), dtype=np.int64)
    if os.path.exists(efile) and os.path.getsize(efile):
        try:
            edges = canonical_edges(np.loadtxt(efile, delimiter="\t", dtype=np.int64, ndmin=2))
        except ValueError as exc:
            raise MalformedBundleError(f"{efile}: {exc}") from exc
    return GroundTruth(
        anomaly_labels=labels,
        interfering_edges=edges,
        structural_nodes=np.array(sorted(structural), dtype=np.int64),
        contextual_nodes=np.array(sorted(contextual), dtype=np.int64),
    )
