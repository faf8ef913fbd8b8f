import os
import warnings

import numpy as np
import pytest
import torch

from cvgad.config import Hyperparams
from cvgad.graph import AttributedGraph

torch.set_num_threads(1)
warnings.filterwarnings("ignore", message="Sparse CSR tensor support is in beta state")

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def random_graph(n, p, o=3, seed=0):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(iu.size) < p
    return AttributedGraph.from_pairs(rng.normal(size=(n, o)), np.stack([iu[hit], ju[hit]], axis=1))


@pytest.fixture
def triangle():
    return AttributedGraph.from_pairs(np.arange(6, dtype=float).reshape(3, 2), [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def tiny_hyper():
    return Hyperparams(d=8, batch_size=300, epochs=4, iterations=2, refine_epochs=2, rounds=3, K=0.05, seed=0)


# acceptance verdicts, filled by tests/test_acceptance.py and echoed in the summary
CRITERIA: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        name, ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k}. {name}: {detail}")
