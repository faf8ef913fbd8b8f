"""Command line entry point: ``cvgad {inject,run,ablate,plotdata,validate}``."""

from __future__ import annotations

import argparse
import ast
import csv
import json
import logging
import os
import shutil
import sys

import numpy as np

from cvgad.config import RunConfig, check_mode, load_config_file, resolve_config
from cvgad.errors import CVGADError, ConfigError, DataError, LoadError
from cvgad.graph import load_bundle, load_bundle_with_labels, save_bundle, validate
from cvgad.injection import inject, read_ground_truth, write_ground_truth
from cvgad.model import save_params
from cvgad.purification import run_pipeline, write_purification_artifacts
from cvgad.scoring import build_report, emit_report

log = logging.getLogger("cvgad")

HIST_BINS = 50
# run-location keys are left out of the echoed config so reports depend only on inputs
_NON_SEMANTIC = ("out", "force", "threads")


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _overrides(args) -> dict:
    out: dict = {}
    for key in ("data", "out", "mode", "dataset"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    if getattr(args, "force", False):
        out["force"] = True
    if getattr(args, "threads", None) is not None:
        out["threads"] = args.threads
    if getattr(args, "modes", None) is not None:
        out["modes"] = [m for m in args.modes.split(",") if m]
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        section, _, name = key.rpartition(".")
        if section:
            out.setdefault(section, {})[name] = _parse_value(val)
        else:
            out[name] = _parse_value(val)
    return out


def _seed(args, raw: dict, over: dict) -> int:
    """--seed flag, then --set/config value, then $CVGAD_SEED, then 0."""
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    for src in (over, raw):
        if "seed" in src:
            return int(src["seed"])
    env = os.environ.get("CVGAD_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"CVGAD_SEED must be an integer, got {env!r}") from exc
    return 0


def build_config(args) -> RunConfig:
    raw = load_config_file(args.config) if getattr(args, "config", None) else {}
    over = _overrides(args)
    over["seed"] = _seed(args, raw, over)
    return resolve_config(raw, over)


def _set_threads(n: int) -> None:
    import torch

    torch.set_num_threads(n if n and n > 0 else (os.cpu_count() or 1))


def _config_echo(cfg: RunConfig) -> dict:
    d = cfg.to_dict()
    for k in _NON_SEMANTIC:
        d.pop(k, None)
    return d


def _prepare_out(path: str, force: bool) -> None:
    if os.path.exists(path) and os.listdir(path):
        if not force:
            raise ConfigError(f"output directory {path} exists and is not empty (use --force)")
        shutil.rmtree(path)
    os.makedirs(path, exist_ok=True)


# --- commands -------------------------------------------------------------

def cmd_inject(cfg: RunConfig) -> str:
    if not cfg.data:
        raise ConfigError("inject needs a source bundle (data)")
    graph = load_bundle(cfg.data)
    _prepare_out(cfg.out, cfg.force)
    injected, gt = inject(graph, cfg.injection)
    save_bundle(injected, cfg.out, labels=gt.anomaly_labels)
    write_ground_truth(gt, cfg.out)
    print(
        f"injected {len(gt.structural_nodes)} structural + {len(gt.contextual_nodes)} contextual anomalies; "
        f"{injected.num_edges - graph.num_edges} edges added; {len(gt.interfering_edges)} interfering edges -> {cfg.out}"
    )
    return cfg.out


def _run_one(cfg: RunConfig, graph, labels, gt, out: str, mode: str) -> dict:
    hyper = cfg.hyper.replace(seed=cfg.seed)
    interfering = gt.interfering_edges if gt is not None else None
    result = run_pipeline(graph, hyper, mode=mode)
    echo = _config_echo(cfg)
    echo["mode"] = mode
    report = build_report(result, hyper, labels=labels, interfering=interfering, config=echo)
    os.makedirs(out, exist_ok=True)
    emit_report(report, out)
    write_purification_artifacts(result.state, out)
    save_params(result.model, os.path.join(out, "model.npz"))
    return report.metrics()


def _load_run_inputs(cfg: RunConfig):
    if not cfg.data:
        raise ConfigError("no data bundle configured")
    graph, labels = load_bundle_with_labels(cfg.data)
    gt = read_ground_truth(cfg.data, graph.n)
    if labels is None and gt is not None:
        labels = gt.anomaly_labels
    return graph, labels, gt


def cmd_run(cfg: RunConfig) -> dict:
    graph, labels, gt = _load_run_inputs(cfg)
    validate(graph)
    _prepare_out(cfg.out, cfg.force)
    metrics = _run_one(cfg, graph, labels, gt, cfg.out, cfg.mode)
    auc = metrics["auc"]
    print(f"mode={cfg.mode} seed={cfg.seed} auc={'null' if auc is None else f'{auc:.4f}'} -> {cfg.out}")
    return metrics


def cmd_ablate(cfg: RunConfig) -> list[tuple[str, float | None]]:
    if not cfg.modes:
        raise ConfigError("ablate needs at least one mode")
    for m in cfg.modes:
        check_mode(m)
    graph, labels, gt = _load_run_inputs(cfg)
    validate(graph)
    _prepare_out(cfg.out, cfg.force)
    seeds = [int(s) for s in cfg.seeds] or [cfg.seed]
    rows = []
    for mode in cfg.modes:
        aucs = []
        for s in seeds:
            sub = RunConfig(**{**cfg.__dict__, "seed": s, "mode": mode})
            m = _run_one(sub, graph, labels, gt, os.path.join(cfg.out, f"{mode}_seed{s}"), mode)
            aucs.append(m["auc"])
        mean = None if any(a is None for a in aucs) else float(np.mean(aucs))
        rows.append((mode, mean))
        print(f"{mode}: auc={'null' if mean is None else f'{mean:.4f}'}")
    with open(os.path.join(cfg.out, "ablation.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mode", "auc"])
        for mode, auc in rows:
            w.writerow([mode, "" if auc is None else f"{auc:.17g}"])
    return rows


def cmd_plotdata(run_dir: str, out: str | None = None) -> dict[str, str]:
    """Export removal-accuracy series and score histograms for external plotting."""
    out = out or run_dir
    need = {k: os.path.join(run_dir, k) for k in ("removal_accuracy.csv", "node_scores.csv")}
    for name, fp in need.items():
        if not os.path.exists(fp):
            raise LoadError(f"run directory is missing {name}: {fp}")
    os.makedirs(out, exist_ok=True)
    files = {"fig_removal": os.path.join(out, "fig_removal.csv"), "hist_scores": os.path.join(out, "hist_scores.csv")}
    with open(need["removal_accuracy.csv"], newline="") as src, open(files["fig_removal"], "w", newline="") as dst:
        rows = list(csv.DictReader(src))
        w = csv.writer(dst, lineterminator="\n")
        w.writerow(["iteration", "precision", "cumulative_precision", "recall"])
        for r in rows:
            w.writerow([r["iteration"], r["precision"], r["cumulative_precision"], r["recall"]])
    with open(need["node_scores.csv"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    final = np.array([float(r["final"]) for r in rows])
    labels = np.array([int(r["label"]) for r in rows]) if rows and "label" in rows[0] else None
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    with open(files["hist_scores"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["bin_lo", "bin_hi", "count"] + (["normal", "anomalous"] if labels is not None else [])
        w.writerow(head)
        total = np.histogram(final, bins=edges)[0]
        by = [np.histogram(final[labels == k], bins=edges)[0] for k in (0, 1)] if labels is not None else []
        for b in range(HIST_BINS):
            w.writerow([f"{edges[b]:.17g}", f"{edges[b + 1]:.17g}", int(total[b])] + [int(x[b]) for x in by])
    return files


def cmd_validate(path: str) -> dict:
    graph, labels = load_bundle_with_labels(path)
    rep = validate(graph)
    rep["labels"] = None if labels is None else int(labels.sum())
    print(json.dumps(rep, sort_keys=True))
    return rep


# --- argument parsing -----------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML config file")
    p.add_argument("--data", help="input bundle directory")
    p.add_argument("--out", help="output directory")
    p.add_argument("--dataset", help="dataset preset name (cora, citeseer, pubmed, citation, acm)")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int, help="torch threads (default: all cores)")
    p.add_argument("--force", action="store_true", help="overwrite a non-empty output directory")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override e.g. hyper.alpha=0.4")


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cvgad", description="Clean-view graph anomaly detection")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("inject", help="inject anomalies into a bundle")
    _common(p)
    p = sub.add_parser("run", help="train, purify and score")
    _common(p)
    p.add_argument("--mode", help="ablation mode (default full)")
    p = sub.add_parser("ablate", help="compare ablation modes on one bundle")
    _common(p)
    p.add_argument("--modes", help="comma-separated modes, e.g. full,ore,sim")
    p.add_argument("--seeds", help="comma-separated seeds (default: --seed)")
    p = sub.add_parser("plotdata", help="export plot-ready CSVs from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p = sub.add_parser("validate", help="check a bundle and print counts")
    p.add_argument("data")
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cmd_validate(args.data)
        elif args.command == "plotdata":
            cmd_plotdata(args.run_dir, args.out)
        else:
            cfg = build_config(args)
            if args.command == "ablate" and getattr(args, "seeds", None):
                cfg.seeds = [int(s) for s in args.seeds.split(",") if s]
            _set_threads(cfg.threads)
            {"inject": cmd_inject, "run": cmd_run, "ablate": cmd_ablate}[args.command](cfg)
    except CVGADError as exc:
        stage = {2: "config", 3: "data", 4: "numeric"}.get(exc.exit_code, "error")
        print(f"cvgad {args.command}: {stage} error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"cvgad {args.command}: data error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
