"""Attributed graph container, bundle I/O and subgraph normalisation."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from cvgad.errors import (
    ConsistencyError,
    GraphValidationError,
    LoadError,
    MalformedBundleError,
)

log = logging.getLogger(__name__)

EDGES_FILE = "edges.tsv"
FEATURES_FILE = "features.csv"
LABELS_FILE = "labels.csv"


def canonical_edges(pairs) -> np.ndarray:
    """Return pairs as a sorted, deduplicated (E, 2) array with u < v.

    Self-loops are dropped silently; callers that care count them first.
    """
    arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if arr.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    lo = np.minimum(arr[:, 0], arr[:, 1])
    hi = np.maximum(arr[:, 0], arr[:, 1])
    keep = lo != hi
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return np.empty((0, 2), dtype=np.int64)
    out = np.unique(np.stack([lo, hi], axis=1), axis=0)
    return out


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected attributed graph.

    ``edges`` holds each unordered pair once as ``(u, v)`` with ``u < v``,
    sorted lexicographically. Instances are treated as immutable; every
    mutation helper returns a new graph.
    """

    features: np.ndarray
    edges: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))

    @classmethod
    def from_pairs(cls, features, pairs) -> "AttributedGraph":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise GraphValidationError("features is a 2-d matrix", f"got ndim={features.ndim}")
        return cls(features=features, edges=canonical_edges(pairs))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def o(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    @cached_property
    def edge_keys(self) -> np.ndarray:
        # sorted because edges are lexicographically sorted with u < v
        return self.edges[:, 0] * self.n + self.edges[:, 1]

    @cached_property
    def csr(self) -> sp.csr_matrix:
        n = self.n
        u, v = self.edges[:, 0], self.edges[:, 1]
        data = np.ones(2 * u.size, dtype=np.float64)
        mat = sp.csr_matrix((data, (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(n, n))
        mat.sort_indices()
        return mat

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.csr.indptr)

    @cached_property
    def component_sizes(self) -> np.ndarray:
        """Size of the connected component containing each node."""
        _, comp = sp.csgraph.connected_components(self.csr, directed=False)
        return np.bincount(comp)[comp]

    def has_edges(self, u, v) -> np.ndarray:
        """Vectorised adjacency lookup for arrays of node ids."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        keys = np.minimum(u, v) * self.n + np.maximum(u, v)
        if self.edge_keys.size == 0:
            return np.zeros(keys.shape, dtype=bool)
        pos = np.searchsorted(self.edge_keys, keys)
        pos = np.minimum(pos, self.edge_keys.size - 1)
        return (self.edge_keys[pos] == keys) & (u != v)

    def incident_edges(self, nodes) -> np.ndarray:
        """Edges with at least one endpoint in ``nodes``."""
        mask = np.zeros(self.n, dtype=bool)
        mask[np.asarray(list(nodes), dtype=np.int64)] = True
        hit = mask[self.edges[:, 0]] | mask[self.edges[:, 1]]
        return self.edges[hit]

    def with_features(self, features: np.ndarray) -> "AttributedGraph":
        return AttributedGraph(features=np.asarray(features, dtype=np.float64), edges=self.edges)

    def with_edges(self, pairs) -> "AttributedGraph":
        return AttributedGraph(features=self.features, edges=canonical_edges(pairs))


def remove_edges(graph: AttributedGraph, to_remove) -> AttributedGraph:
    """Return ``graph`` without the listed undirected edges.

    Raises ConsistencyError if any listed edge is absent, since that means the
    caller's removal bookkeeping has drifted from the graph.
    """
    rem = canonical_edges(to_remove)
    if rem.shape[0] == 0:
        return graph
    present = graph.has_edges(rem[:, 0], rem[:, 1])
    if not present.all():
        missing = [tuple(map(int, e)) for e in rem[~present][:5]]
        raise ConsistencyError(f"cannot remove nonexistent edges: {missing}")
    keys = rem[:, 0] * graph.n + rem[:, 1]
    keep = ~np.isin(graph.edge_keys, keys)
    return AttributedGraph(features=graph.features, edges=graph.edges[keep])


def add_edges(graph: AttributedGraph, pairs) -> tuple[AttributedGraph, np.ndarray]:
    """Add pairs that are not already edges. Returns (new graph, newly added edges)."""
    new = canonical_edges(pairs)
    if new.shape[0] == 0:
        return graph, new
    fresh = new[~graph.has_edges(new[:, 0], new[:, 1])]
    merged = np.concatenate([graph.edges, fresh], axis=0)
    return AttributedGraph(features=graph.features, edges=canonical_edges(merged)), fresh


def validate(graph: AttributedGraph) -> dict:
    """Check every graph invariant; return node/edge/isolated counts."""
    x = graph.features
    if x.ndim != 2:
        raise GraphValidationError("features is a 2-d matrix")
    if not np.isfinite(x).all():
        bad = int(np.argwhere(~np.isfinite(x))[0, 0])
        raise GraphValidationError("all feature values finite", f"first bad row {bad}")
    e = graph.edges
    if e.ndim != 2 or e.shape[1] != 2:
        raise GraphValidationError("edges is an (E, 2) array")
    if e.size:
        if (e < 0).any() or (e >= graph.n).any():
            raise GraphValidationError("edge endpoints are < n", f"n={graph.n}")
        if (e[:, 0] == e[:, 1]).any():
            raise GraphValidationError("no self-loops")
        if (e[:, 0] > e[:, 1]).any():
            raise GraphValidationError("each unordered pair stored once as (u<v)")
        keys = e[:, 0] * graph.n + e[:, 1]
        if (np.diff(keys) <= 0).any():
            raise GraphValidationError("edges sorted and unique")
    isolated = int((graph.degrees == 0).sum())
    return {"nodes": graph.n, "edges": graph.num_edges, "isolated": isolated}


def normalized_adjacency(sub_nodes, graph: AttributedGraph) -> np.ndarray:
    """D^-1/2 (A_sub + I) D^-1/2 over the subgraph induced by ``sub_nodes``.

    Rows follow the order of ``sub_nodes``. A repeated id (padding) is an
    isolated slot: only its first occurrence carries edges.
    """
    nodes = np.asarray(sub_nodes, dtype=np.int64)
    if nodes.ndim != 1 or nodes.size == 0:
        raise ValueError("sub_nodes must be a non-empty 1-d sequence")
    if (nodes < 0).any() or (nodes >= graph.n).any():
        raise IndexError(f"node index out of range for graph with n={graph.n}")
    return normalize_dense(induced_adjacency(nodes[None], graph))[0]


def induced_adjacency(members: np.ndarray, graph: AttributedGraph) -> np.ndarray:
    """(B, N, N) 0/1 adjacency of each row of ``members`` in ``graph``."""
    m = np.asarray(members, dtype=np.int64)
    adj = graph.has_edges(m[:, :, None], m[:, None, :])
    # a slot is a duplicate if the same id occurs at an earlier position
    same = m[:, :, None] == m[:, None, :]
    dup = np.tril(same, k=-1).any(axis=2)
    adj[dup, :] = False
    adj.transpose(0, 2, 1)[dup, :] = False
    return adj.astype(np.float64)


def normalize_dense(adj: np.ndarray) -> np.ndarray:
    """Batched symmetric normalisation with self-loops for (B, N, N) 0/1 arrays."""
    a = adj + np.eye(adj.shape[-1])
    dinv = 1.0 / np.sqrt(a.sum(axis=-1))
    return a * dinv[..., :, None] * dinv[..., None, :]


def load_bundle(path) -> AttributedGraph:
    """Read an ``edges.tsv`` / ``features.csv`` bundle directory."""
    path = os.fspath(path)
    graph, _ = load_bundle_with_labels(path)
    return graph


def load_labels(path) -> np.ndarray | None:
    fp = os.path.join(os.fspath(path), LABELS_FILE)
    if not os.path.exists(fp):
        return None
    try:
        labels = np.loadtxt(fp, dtype=np.int64, ndmin=1)
    except ValueError as exc:
        raise MalformedBundleError(f"{fp}: {exc}") from exc
    if not np.isin(labels, (0, 1)).all():
        raise MalformedBundleError(f"{fp}: labels must be 0 or 1")
    return labels


def load_bundle_with_labels(path) -> tuple[AttributedGraph, np.ndarray | None]:
    path = os.fspath(path)
    efile = os.path.join(path, EDGES_FILE)
    ffile = os.path.join(path, FEATURES_FILE)
    for fp in (efile, ffile):
        if not os.path.exists(fp):
            raise LoadError(f"missing bundle file: {fp}")
    try:
        features = np.loadtxt(ffile, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise MalformedBundleError(f"{ffile}: {exc}") from exc
    if not np.isfinite(features).all():
        raise MalformedBundleError(f"{ffile}: non-finite feature value")
    n = features.shape[0]
    if os.path.getsize(efile) == 0:
        raw = np.empty((0, 2), dtype=np.int64)
    else:
        try:
            raw = np.loadtxt(efile, delimiter="\t", dtype=np.int64, ndmin=2)
        except ValueError as exc:
            raise MalformedBundleError(f"{efile}: {exc}") from exc
        if raw.size and raw.shape[1] != 2:
            raise MalformedBundleError(f"{efile}: expected two columns, got {raw.shape[1]}")
    if raw.size and ((raw < 0).any() or (raw >= n).any()):
        raise MalformedBundleError(f"{efile}: node index outside [0, {n})")
    loops = int((raw[:, 0] == raw[:, 1]).sum()) if raw.size else 0
    if loops:
        log.warning("dropped %d self-loop rows from %s", loops, efile)
    graph = AttributedGraph(features=features, edges=canonical_edges(raw))
    labels = load_labels(path)
    if labels is not None and labels.shape[0] != n:
        raise MalformedBundleError(f"{LABELS_FILE}: {labels.shape[0]} rows but {n} nodes")
    return graph, labels


def save_bundle(graph: AttributedGraph, path, labels=None) -> None:
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, EDGES_FILE), "w", newline="\n") as fh:
        for u, v in graph.edges:
            fh.write(f"{u}\t{v}\n")
    # repr() is the shortest string that round-trips a float64 exactly
    with open(os.path.join(path, FEATURES_FILE), "w", newline="\n") as fh:
        for row in graph.features:
            fh.write(",".join(_fmt_feature(x) for x in row.tolist()))
            fh.write("\n")
    if labels is not None:
        with open(os.path.join(path, LABELS_FILE), "w", newline="\n") as fh:
            fh.write("".join(f"{int(x)}\n" for x in labels))


def _fmt_feature(x: float) -> str:
    r = repr(x)
    return r[:-2] if r.endswith(".0") else r
