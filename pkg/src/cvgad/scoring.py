"""Final anomaly scores, ROC-AUC, edge-removal accuracy and run reports."""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.stats import rankdata

from cvgad.config import Hyperparams
from cvgad.errors import UndefinedMetricError
from cvgad.model import ContrastModel, contrast_pass
from cvgad.purification import node_contrast_scores

NORMALIZATION = "min-max"


def _round_stats(rounds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean and population std over axis 0 of an (R, n) array."""
    mean = rounds.mean(axis=0)
    std = np.sqrt(((rounds - mean) ** 2).mean(axis=0))
    return mean, std


def multi_round_scores(model: ContrastModel, X, graph, R: int, hyper: Hyperparams, seed: int | None = None):
    """Mean and population std of the blended contrast score over R rounds."""
    if R < 1:
        raise ValueError("R must be >= 1")
    seed = hyper.seed if seed is None else seed
    with torch.no_grad():
        proj_all = model.project(X, torch.arange(graph.n))
    rounds = np.empty((R, graph.n), dtype=np.float64)
    for r in range(R):
        rng = np.random.default_rng([seed, r, 0x5C0E])
        raw = contrast_pass(model, X, graph, hyper, rng, proj_all=proj_all)
        rounds[r] = node_contrast_scores(raw, hyper.beta).msc
    return _round_stats(rounds)


def contrast_score(mean: np.ndarray, std: np.ndarray) -> np.ndarray:
    return mean + std


def minmax(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    lo, hi = x.min(), x.max()
    if hi - lo <= 0:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def final_scores(contrast_scores, detection_counts, gamma: float) -> np.ndarray:
    return gamma * minmax(contrast_scores) + (1 - gamma) * minmax(detection_counts)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with ties credited one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    P = int(labels.sum())
    N = labels.size - P
    if P == 0 or N == 0:
        raise UndefinedMetricError("ROC-AUC needs at least one positive and one negative label")
    ranks = rankdata(scores, method="average")  # half-integers, so the sum below is exact
    U = ranks[labels].sum() - P * (P + 1) / 2.0
    return float(U / (P * N))


def edge_removal_accuracy(removed_log, interfering) -> list[dict]:
    """Per-iteration precision plus cumulative precision and recall."""
    truth = {(int(u), int(v)) for u, v in np.asarray(interfering).reshape(-1, 2)}
    seen: set = set()
    rows = []
    for t, rem in enumerate(removed_log):
        cur = {(int(min(u, v)), int(max(u, v))) for u, v in np.asarray(rem).reshape(-1, 2)}
        seen |= cur
        hits = len(cur & truth)
        cum_hits = len(seen & truth)
        rows.append(
            {
                "iteration": t,
                "removed": len(cur),
                "precision": hits / len(cur) if cur else None,
                "cumulative_precision": cum_hits / len(seen) if seen else None,
                "recall": cum_hits / len(truth) if truth else None,
            }
        )
    return rows


@dataclass
class ScoreReport:
    msc_mean: np.ndarray
    msc_std: np.ndarray
    contrast: np.ndarray
    detection: np.ndarray
    final: np.ndarray
    labels: np.ndarray | None = None
    auc: float | None = None
    removal: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        return {
            "auc": self.auc,
            "n_nodes": int(self.final.size),
            "n_anomalies": None if self.labels is None else int(np.sum(self.labels)),
            "normalization": NORMALIZATION,
            "removal": self.removal,
            "seeds": self.seeds,
            **self.extra,
        }


def build_report(result, hyper: Hyperparams, labels=None, interfering=None, config=None) -> ScoreReport:
    """Score a finished pipeline run on its anomalous graph."""
    mean, std = multi_round_scores(result.model, result.X, result.graph_a, hyper.rounds, hyper)
    contrast = contrast_score(mean, std)
    gamma = hyper.gamma if result.variant.gamma_override is None else result.variant.gamma_override
    final = final_scores(contrast, result.state.counters, gamma)
    auc = None
    if labels is not None and 0 < int(np.sum(labels)) < len(labels):
        auc = roc_auc(final, labels)
    removal = edge_removal_accuracy(result.state.removed, interfering) if interfering is not None else []
    return ScoreReport(
        msc_mean=mean,
        msc_std=std,
        contrast=contrast,
        detection=result.state.counters.copy(),
        final=final,
        labels=None if labels is None else np.asarray(labels),
        auc=auc,
        removal=removal,
        config=config or {},
        seeds={"seed": hyper.seed},
        extra={"mode": result.variant.mode, "gamma_effective": gamma, "purification": result.state.log},
    )


def _g(x) -> str:
    return f"{float(x):.17g}"


def emit_report(report: ScoreReport, path) -> dict[str, str]:
    """Write report.json, node_scores.csv and removal_accuracy.csv under ``path``."""
    try:
        os.makedirs(path, exist_ok=True)
        files = {k: os.path.join(path, k) for k in ("report.json", "node_scores.csv", "removal_accuracy.csv")}
        with open(files["report.json"], "w", newline="\n") as fh:
            json.dump({"metrics": report.metrics(), "config": report.config}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(files["node_scores.csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = ["node", "msc_mean", "msc_std", "msc", "dec", "final"]
            if report.labels is not None:
                head.append("label")
            w.writerow(head)
            for i in range(report.final.size):
                row = [i, _g(report.msc_mean[i]), _g(report.msc_std[i]), _g(report.contrast[i]),
                       int(report.detection[i]), _g(report.final[i])]
                if report.labels is not None:
                    row.append(int(report.labels[i]))
                w.writerow(row)
        with open(files["removal_accuracy.csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "removed", "precision", "cumulative_precision", "recall"])
            for r in report.removal:
                w.writerow([r["iteration"], r["removed"]] + [
                    "" if r[k] is None else _g(r[k]) for k in ("precision", "cumulative_precision", "recall")
                ])
    except OSError as exc:
        raise OSError(f"writing report under {path}: {exc}") from exc
    return files


def read_report(path) -> dict:
    with open(os.path.join(path, "report.json")) as fh:
        return json.load(fh)
