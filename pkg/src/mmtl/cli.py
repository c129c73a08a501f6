"""Batch experiment driver.

``mmtl run config.json`` sweeps (composer x capacity x replicate) grid
cells for one experiment family, writing ``results.csv`` and
``manifest.json`` into the output directory. ``mmtl verify <suite>``
runs one of the library's invariant suites.

Runs are deterministic: rerunning an identical config reproduces
``results.csv`` byte-for-byte except the wall_time_ms column.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .composition import Composer, default_alpha
from .core import (ConfigError, DataError, LossKind, SolverDivergenceError)
from .data import (TableSchema, TournamentSpec, TwoModesConfig,
                   build_mnist_tournament, generate_ltl_two_modes_test_tasks,
                   generate_two_modes, load_idx_images, load_idx_labels,
                   load_task_table, tournament_features, two_modes_center)
from .evaluation import evaluate_ltl, evaluate_mtl, multiclass_01
from .models import AepConfig, EpConfig
from .solver import SolveConfig, solve
from .theory import default_environment, verify_tail_bound
from .verification import SUITES, run_suite

RESULT_HEADER = ("experiment", "composer", "capacity", "replicate",
                 "metric_kind", "max_value", "mean_value", "std",
                 "wall_time_ms")

_EXPERIMENTS = ("two_modes", "task_table", "mnist", "theory")


# ---------------------------------------------------------------------------
# Config parsing


def _fail_field(field, why):
    raise ConfigError("config field %r: %s" % (field, why))


def _parse_composer_spec(entry):
    """Normalize a composer config entry to ('variant', level-or-None)."""
    if isinstance(entry, str):
        if entry not in ("l1", "l2", "minimax"):
            _fail_field("composers", "unknown composer %r" % (entry,))
        return (entry, None)
    if isinstance(entry, dict) and set(entry) == {"alpha_minimax"}:
        level = entry["alpha_minimax"]
        if not isinstance(level, (int, float)) or not 0 < level:
            _fail_field("composers", "alpha_minimax level must be positive")
        return ("alpha_minimax", float(level))
    _fail_field("composers", "expected 'l1'/'l2'/'minimax' or "
                "{'alpha_minimax': level}, got %r" % (entry,))


def composer_label(spec) -> str:
    variant, level = spec
    if variant == "alpha_minimax":
        return "alpha_minimax(%g)" % level
    return variant


def make_composer(spec, T: int) -> Composer:
    """Instantiate a parsed composer spec for a T-task problem."""
    variant, level = spec
    if variant == "l1":
        return Composer.uniform_l1(T)
    if variant == "l2":
        return Composer("l2")
    if variant == "minimax":
        return Composer("max")
    return Composer("alpha_minimax", alpha=default_alpha(T, level))


def parse_config(raw: dict) -> dict:
    """Validate the raw JSON document and fill defaults."""
    if not isinstance(raw, dict):
        _fail_field("<root>", "config must be a JSON object")
    experiment = raw.get("experiment")
    if experiment not in _EXPERIMENTS:
        _fail_field("experiment", "must be one of %s" % (_EXPERIMENTS,))
    model = raw.get("model", "aep" if experiment == "mnist" else "ep")
    if model not in ("ep", "aep"):
        _fail_field("model", "must be 'ep' or 'aep'")
    mode = raw.get("mode", "constrained")
    if mode not in ("constrained", "regularized"):
        _fail_field("mode", "must be 'constrained' or 'regularized'")
    composers = raw.get("composers")
    if not isinstance(composers, list) or not composers:
        _fail_field("composers", "must be a nonempty list")
    composer_specs = [_parse_composer_spec(c) for c in composers]
    capacity_grid = raw.get("capacity_grid")
    if (not isinstance(capacity_grid, list) or not capacity_grid
            or not all(isinstance(c, (int, float)) and c > 0
                       for c in capacity_grid)):
        _fail_field("capacity_grid", "must be a nonempty list of positive "
                    "numbers")
    replicates = raw.get("replicates", 1)
    if not isinstance(replicates, int) or replicates < 1:
        _fail_field("replicates", "must be an integer >= 1")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or seed < 0:
        _fail_field("seed", "must be a nonnegative integer")
    solver = dict(raw.get("solver", {}))
    try:
        solve_cfg = SolveConfig(seed=seed, **solver)
    except TypeError as exc:
        _fail_field("solver", str(exc))
    data = raw.get("data", {})
    if not isinstance(data, dict):
        _fail_field("data", "must be an object")
    if experiment == "task_table":
        for key in ("path", "schema"):
            if key not in data:
                _fail_field("data.%s" % key, "required for task_table runs")
    if experiment == "mnist":
        for key in ("train_images", "train_labels", "test_images",
                    "test_labels"):
            if key not in data:
                _fail_field("data.%s" % key, "required for mnist runs")
    return {
        "experiment": experiment,
        "model": model,
        "mode": mode,
        "composer_specs": composer_specs,
        "capacity_grid": [float(c) for c in capacity_grid],
        "replicates": replicates,
        "seed": seed,
        "solver": solver,
        "solve_cfg": solve_cfg,
        "data": data,
        "output_dir": raw.get("output_dir", "."),
        "loss": raw.get("loss", "squared"),
    }


def _model_config(cfg: dict, capacity: float):
    """Capacity sweeps tau1 / lam1 for EP and r / lam for AEP."""
    data = cfg["data"]
    if cfg["model"] == "ep":
        if cfg["mode"] == "constrained":
            return EpConfig("constrained", tau0=float(data.get("tau0", 10.0)),
                            tau1=capacity)
        return EpConfig("regularized", lam0=float(data.get("lam0", 1e-3)),
                        lam1=capacity)
    if cfg["mode"] == "constrained":
        return AepConfig("constrained", r=capacity)
    return AepConfig("regularized", lam=capacity)


# ---------------------------------------------------------------------------
# Grid-cell runners (module-level so worker pools can pickle them)


def _report_summary(report) -> dict:
    return {"best_objective": report.best_objective,
            "final_objective": report.final_objective,
            "iterations_run": report.iterations_run,
            "converged": report.converged}


def _trace_path(cfg, label, capacity, replicate):
    if not cfg.get("trace"):
        return None
    name = "trace_%s_%g_%d.csv" % (label.replace("(", "_").rstrip(")"),
                                   capacity, replicate)
    return str(Path(cfg["output_dir"]) / name)


def _metric_rows(cfg, label, capacity, replicate, tagged_metrics, wall_ms):
    rows = []
    for tag, metrics in tagged_metrics:
        rows.append({
            "experiment": cfg["experiment"], "composer": label,
            "capacity": "%g" % capacity, "replicate": replicate,
            "metric_kind": "%s_%s" % (tag, metrics.metric_kind),
            "max_value": "%.12g" % metrics.max_risk,
            "mean_value": "%.12g" % metrics.mean_risk,
            "std": "%.12g" % float(np.std(metrics.per_task)),
            "wall_time_ms": "%d" % wall_ms,
        })
    return rows


def run_two_modes_cell(cfg: dict, spec, capacity: float, replicate: int):
    data = cfg["data"]
    kwargs = {k: data[k] for k in ("d", "n_type1", "n_type2", "mode_radius",
                                   "sigma_task", "sigma_noise", "m_train",
                                   "m_test") if k in data}
    tm = TwoModesConfig(seed=cfg["seed"] + replicate, **kwargs)
    train, test, _ = generate_two_modes(tm)
    mu = two_modes_center(tm)
    new_pair = generate_ltl_two_modes_test_tasks(
        tm, mu, int(data.get("n_new_tasks", train.T)))
    composer = make_composer(spec, train.T)
    kind = LossKind(cfg["loss"])
    model_cfg = _model_config(cfg, capacity)
    label = composer_label(spec)
    t0 = time.perf_counter()
    params, report = solve(train, model_cfg, composer, kind, cfg["solve_cfg"],
                           _trace_path(cfg, label, capacity, replicate))
    mtl = evaluate_mtl(params, test, kind)
    ltl = evaluate_ltl(params.v0, new_pair, model_cfg, composer, kind,
                       cfg["solve_cfg"])
    wall_ms = int((time.perf_counter() - t0) * 1000)
    rows = _metric_rows(cfg, label, capacity, replicate,
                        [("mtl", mtl), ("ltl", ltl)], wall_ms)
    return rows, _report_summary(report)


def run_task_table_cell(cfg: dict, spec, capacity: float, replicate: int):
    data = cfg["data"]
    schema = TableSchema(task_column=data["schema"]["task_column"],
                         feature_columns=data["schema"]["feature_columns"],
                         target_column=data["schema"]["target_column"])
    table = load_task_table(data["path"], schema,
                            holdout=int(data.get("holdout", 4)),
                            seed=cfg["seed"] + replicate)
    kind = LossKind(cfg["loss"])
    train, test = table.to_datasets(
        "classification" if kind.variant == "hinge" else "regression")
    composer = make_composer(spec, train.T)
    model_cfg = _model_config(cfg, capacity)
    label = composer_label(spec)
    t0 = time.perf_counter()
    params, report = solve(train, model_cfg, composer, kind, cfg["solve_cfg"],
                           _trace_path(cfg, label, capacity, replicate))
    mtl = evaluate_mtl(params, test, kind,
                       data.get("metric_kind", "l2_risk"))
    wall_ms = int((time.perf_counter() - t0) * 1000)
    rows = _metric_rows(cfg, label, capacity, replicate, [("mtl", mtl)],
                        wall_ms)
    return rows, _report_summary(report)


def run_mnist_cell(cfg: dict, spec, capacity: float, replicate: int):
    data = cfg["data"]
    tspec = TournamentSpec(
        n_classes=int(data.get("n_classes", 10)),
        pca_dim=int(data.get("pca_dim", 50)),
        train_fraction=float(data.get("train_fraction", 0.002)))
    dataset, projection, mean = build_mnist_tournament(
        data["train_images"], data["train_labels"], tspec)
    composer = make_composer(spec, dataset.T)
    kind = LossKind("hinge")
    model_cfg = _model_config(cfg, capacity)
    label = composer_label(spec)
    t0 = time.perf_counter()
    params, report = solve(dataset, model_cfg, composer, kind,
                           cfg["solve_cfg"],
                           _trace_path(cfg, label, capacity, replicate))
    test_images = load_idx_images(data["test_images"])
    test_labels = load_idx_labels(data["test_labels"])
    features = tournament_features(test_images, projection, mean)
    err = multiclass_01(params.W, features, test_labels, tspec)
    wall_ms = int((time.perf_counter() - t0) * 1000)
    rows = [{
        "experiment": cfg["experiment"], "composer": label,
        "capacity": "%g" % capacity, "replicate": replicate,
        "metric_kind": "multiclass_01",
        "max_value": "%.12g" % err, "mean_value": "%.12g" % err,
        "std": "0", "wall_time_ms": "%d" % wall_ms,
    }]
    return rows, _report_summary(report)


def run_theory_cell(cfg: dict, spec, capacity: float, replicate: int):
    """Theory sweeps reuse the capacity axis as the task count T."""
    data = cfg["data"]
    env = default_environment(C=int(data.get("C", 4)),
                              m=int(data.get("m", 10)))
    t0 = time.perf_counter()
    report = verify_tail_bound(env, T=int(capacity),
                               gamma=float(data.get("gamma", 0.25)),
                               delta=float(data.get("delta", 0.1)),
                               meta_reps=int(data.get("meta_reps", 500)),
                               seed=cfg["seed"] + replicate)
    wall_ms = int((time.perf_counter() - t0) * 1000)
    rows = [{
        "experiment": cfg["experiment"], "composer": composer_label(spec),
        "capacity": "%g" % capacity, "replicate": replicate,
        "metric_kind": "theory_tail",
        "max_value": "%.12g" % report.empirical_tail_freq,
        "mean_value": "%.12g" % report.mean_tail_estimate,
        "std": "%.12g" % report.skip_rate,
        "wall_time_ms": "%d" % wall_ms,
    }]
    return rows, report.to_dict()


_CELL_RUNNERS = {
    "two_modes": run_two_modes_cell,
    "task_table": run_task_table_cell,
    "mnist": run_mnist_cell,
    "theory": run_theory_cell,
}


def _run_cell(args):
    cfg, spec, capacity, replicate = args
    rows, summary = _CELL_RUNNERS[cfg["experiment"]](cfg, spec, capacity,
                                                     replicate)
    summary = dict(summary, composer=composer_label(spec), capacity=capacity,
                   replicate=replicate)
    return rows, summary


# ---------------------------------------------------------------------------
# Orchestration


def run_experiment(cfg: dict, raw_config: dict, workers: int = 1) -> Path:
    """Run the full grid and write results.csv + manifest.json.

    Returns the path of the written results.csv.
    """
    out_dir = Path(cfg["output_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = [(cfg, spec, capacity, replicate)
             for spec in cfg["composer_specs"]
             for capacity in cfg["capacity_grid"]
             for replicate in range(cfg["replicates"])]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_run_cell, cells))
    else:
        outputs = [_run_cell(c) for c in cells]
    rows = [row for cell_rows, _ in outputs for row in cell_rows]
    rows.sort(key=lambda r: (r["composer"], float(r["capacity"]),
                             r["replicate"], r["metric_kind"]))
    results_path = out_dir / "results.csv"
    with open(results_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_HEADER)
        writer.writeheader()
        writer.writerows(rows)
    manifest = {
        "version": __version__,
        "config": raw_config,
        "seed": cfg["seed"],
        "cells": [summary for _, summary in outputs],
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, default=float)
        fh.write("\n")
    return results_path


# ---------------------------------------------------------------------------
# Entry points


def _cmd_run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        print("cannot read config: %s" % exc, file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print("config is not valid JSON: %s" % exc, file=sys.stderr)
        return 2
    try:
        cfg = parse_config(raw)
        if args.output_dir is not None:
            cfg["output_dir"] = args.output_dir
        cfg["trace"] = args.trace
        path = run_experiment(cfg, raw, workers=args.workers)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except (DataError, OSError) as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return 3
    except SolverDivergenceError as exc:
        print("solver divergence: %s" % exc, file=sys.stderr)
        return 4
    print("wrote %s" % path)
    return 0


def _cmd_verify(args) -> int:
    try:
        ok = run_suite(args.suite)
    except ConfigError as exc:
        print("verify error: %s" % exc, file=sys.stderr)
        return 2
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmtl",
        description="Loss-compositional multi-task learning experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a JSON-configured experiment")
    p_run.add_argument("config", help="path to the experiment JSON config")
    p_run.add_argument("--output-dir", default=None,
                       help="override the config's output directory")
    p_run.add_argument("--workers", type=int, default=1,
                       help="grid cells solved in parallel")
    p_run.add_argument("--trace", action="store_true",
                       help="write per-cell objective traces")
    p_run.set_defaults(func=_cmd_run)
    p_verify = sub.add_parser("verify", help="run an invariant suite")
    p_verify.add_argument("suite", choices=sorted(SUITES))
    p_verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
