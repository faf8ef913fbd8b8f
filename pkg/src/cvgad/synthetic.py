"""Seeded homophilous random graphs with Gaussian community features."""

from __future__ import annotations

import numpy as np

from cvgad.graph import AttributedGraph


def community_graph(
    n: int = 300,
    p: float = 0.02,
    o: int = 16,
    communities: int = 4,
    homophily: float = 0.9,
    mean_scale: float = 2.0,
    noise: float = 1.0,
    seed: int = 0,
) -> tuple[AttributedGraph, np.ndarray]:
    """Planted-partition graph whose overall edge density is ``p``.

    A fraction ``homophily`` of the expected edges falls inside communities.
    Node features are the community mean (N(0, mean_scale^2) per dimension)
    plus N(0, noise^2) noise. Returns the graph and community assignment.
    """
    rng = np.random.default_rng(seed)
    comm = rng.integers(communities, size=n)
    iu, ju = np.triu_indices(n, k=1)
    same = comm[iu] == comm[ju]
    frac_in = same.mean()
    p_in = min(1.0, homophily * p / frac_in) if frac_in > 0 else 0.0
    p_out = min(1.0, (1 - homophily) * p / (1 - frac_in)) if frac_in < 1 else 0.0
    prob = np.where(same, p_in, p_out)
    hit = rng.random(iu.size) < prob
    means = rng.normal(0.0, mean_scale, size=(communities, o))
    X = means[comm] + rng.normal(0.0, noise, size=(n, o))
    return AttributedGraph.from_pairs(X, np.stack([iu[hit], ju[hit]], axis=1)), comm
