"""Random-walk-with-restart subgraph sampling and contrast batch assembly."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from cvgad.errors import DegenerateBatchError
from cvgad.graph import AttributedGraph, induced_adjacency, normalize_dense

ANOMALOUS = "anomalous"
CLEAN = "clean"


@dataclass(frozen=True)
class SubgraphSample:
    target: int
    members: np.ndarray
    view: str = ANOMALOUS


@dataclass
class Batch:
    """One mini-batch of paired samples.

    ``members_*`` are (B, N) node ids with the target in column 0 and
    ``adj_*`` the matching normalised (B, N, N) adjacencies. Row ``k`` is
    contrasted against row ``negatives[k]``.
    """

    node_ids: np.ndarray
    members_a: np.ndarray
    members_c: np.ndarray
    adj_a: np.ndarray
    adj_c: np.ndarray
    negatives: np.ndarray

    def __len__(self) -> int:
        return int(self.node_ids.shape[0])


def rwr_sample_many(
    graph: AttributedGraph,
    targets,
    N: int,
    restart_p: float,
    rng: np.random.Generator,
    step_cap: int | None = None,
) -> np.ndarray:
    """Sample N distinct nodes around each target; returns a (B, N) id array.

    All walkers advance in lock-step. A walker stops once it holds N distinct
    nodes, once it has exhausted its connected component, or at the step
    cap. Unfilled slots repeat the target id.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if targets.ndim != 1:
        raise ValueError("targets must be 1-d")
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0.0 < restart_p < 1.0:
        raise ValueError("restart_p must lie in (0, 1)")
    if targets.size and ((targets < 0).any() or (targets >= graph.n).any()):
        raise IndexError(f"target outside [0, {graph.n})")
    step_cap = 1000 * N if step_cap is None else step_cap

    B = targets.size
    members = np.repeat(targets[:, None], N, axis=1)
    if B == 0 or N == 1:
        return members
    count = np.ones(B, dtype=np.int64)
    need = np.minimum(N, graph.component_sizes[targets])
    cur = targets.copy()
    indptr, indices = graph.csr.indptr, graph.csr.indices
    deg = graph.degrees

    active = np.flatnonzero(count < need)
    steps = 0
    while active.size and steps < step_cap:
        c = cur[active]
        d = deg[c]
        restart = (rng.random(active.size) < restart_p) | (d == 0)
        offs = np.floor(rng.random(active.size) * d).astype(np.int64)
        nbr = indices[np.minimum(indptr[c] + offs, indices.size - 1)] if indices.size else c
        nxt = np.where(restart, targets[active], nbr)
        cur[active] = nxt
        fresh = ~(members[active] == nxt[:, None]).any(axis=1)
        rows = active[fresh]
        members[rows, count[rows]] = nxt[fresh]
        count[rows] += 1
        active = active[count[active] < need[active]]
        steps += 1
    return members


def rwr_sample(graph: AttributedGraph, target: int, N: int, restart_p: float, seed) -> SubgraphSample:
    rng = np.random.default_rng(seed)
    members = rwr_sample_many(graph, [target], N, restart_p, rng)[0]
    return SubgraphSample(target=int(target), members=members)


def mask_target(sample: SubgraphSample, features: np.ndarray) -> np.ndarray:
    """Member feature rows with the target row (row 0) zeroed; a copy."""
    out = np.array(features[sample.members], dtype=np.float64, copy=True)
    out[0] = 0.0
    # padded slots repeat the target and are masked the same way
    out[sample.members == sample.target] = 0.0
    return out


def cyclic_negatives(B: int) -> np.ndarray:
    if B < 2:
        raise DegenerateBatchError(f"batch of size {B} has no valid negative partner")
    return (np.arange(B) + 1) % B


def make_batch(
    graph_a: AttributedGraph,
    graph_c: AttributedGraph,
    node_ids,
    N: int,
    restart_p: float,
    seed=None,
    rng: np.random.Generator | None = None,
) -> Batch:
    """Sample both views for ``node_ids`` and pair each row with the next one."""
    node_ids = np.asarray(node_ids, dtype=np.int64)
    if node_ids.size == 0:
        raise DegenerateBatchError("empty batch")
    negatives = cyclic_negatives(node_ids.size)
    rng = np.random.default_rng(seed) if rng is None else rng
    members_a = rwr_sample_many(graph_a, node_ids, N, restart_p, rng)
    members_c = rwr_sample_many(graph_c, node_ids, N, restart_p, rng)
    return Batch(
        node_ids=node_ids,
        members_a=members_a,
        members_c=members_c,
        adj_a=normalize_dense(induced_adjacency(members_a, graph_a)),
        adj_c=normalize_dense(induced_adjacency(members_c, graph_c)),
        negatives=negatives,
    )


def split_batches(order: np.ndarray, batch_size: int) -> list[np.ndarray]:
    """Chunk ``order`` into batches, folding a size-1 tail into its predecessor."""
    chunks = [order[i : i + batch_size] for i in range(0, order.size, batch_size)]
    if len(chunks) > 1 and chunks[-1].size == 1:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def dump_members(batch: Batch, path) -> None:
    """Write sampled member lists as TSV (debugging aid)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t", lineterminator="\n")
        w.writerow(["target", "view", "members"])
        for view, mem in ((ANOMALOUS, batch.members_a), (CLEAN, batch.members_c)):
            for t, row in zip(batch.node_ids, mem):
                w.writerow([int(t), view, ",".join(str(int(x)) for x in row)])
