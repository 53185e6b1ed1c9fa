"""Experiment runner: strategy x seed sweeps, deterministic persistence.

A run is one (strategy, seed) pair. The stream is rebuilt from the seed
alone, so every strategy in a config sees byte-identical data under the
same seed, no matter what its hyperparameters are. After each domain the
strategy is evaluated on the test splits of all seen domains, filling the
lower-triangular accuracy matrix; routing strategies are additionally
scored on domain identification over the union of test sets.

Persisted files (all CSV rows newline-terminated, floats to 6 places):

* matrix.csv      run_id,strategy,seed,s,t,alpha
* summary.csv     run_id,strategy,seed,t,avg_accuracy,bwt_final
* routing.csv     run_id,router_kind,domain,accuracy  (per-domain rows,
                  then one 'overall' row per run)
* report.txt      strategy x benchmark table, mean +/- std over seeds
* projection.csv  run_id,router_kind,domain,sample_index,pc1,pc2,routed_domain

Re-running an identical config overwrites all five files byte-identically.
"""

from __future__ import annotations

import hashlib
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .benchmarks import StreamGuard, build_stream
from .config import ExperimentConfig, expand_grid, make_recipes, serialize_config
from .metrics import (AccuracyMatrix, RoutingReport, average_accuracy, bwt,
                      evaluate_accuracy, routing_accuracy)
from .pca import pca_project_2d
from .rng import derive
from .strategies import save_checkpoint, strategy_dispatch
from .harness_report import render_report

MATRIX_HEADER = "run_id,strategy,seed,s,t,alpha"
SUMMARY_HEADER = "run_id,strategy,seed,t,avg_accuracy,bwt_final"
ROUTING_HEADER = "run_id,router_kind,domain,accuracy"
PROJECTION_HEADER = "run_id,router_kind,domain,sample_index,pc1,pc2,routed_domain"


@dataclass
class RunRecord:
    """Everything one (strategy, seed) run produced."""

    run_id: str
    strategy: str
    seed: int
    benchmark_label: str
    n_domains: int
    matrix: AccuracyMatrix = None
    avg_accuracy: list = field(default_factory=list)   # A_t for t = 0..T-1
    bwt_final: float = None
    router_kind: str = None
    routing: RoutingReport = None
    projection: list = field(default_factory=list)     # rows for projection.csv
    duration: float = 0.0
    failure: str = ""

    @property
    def ok(self) -> bool:
        return not self.failure

    @property
    def final_accuracy(self) -> float:
        return self.avg_accuracy[-1]


def run_id_for(cfg: ExperimentConfig, strategy_name: str, seed: int) -> str:
    """Deterministic run identifier: hash of the canonical config text plus
    the (strategy, seed) coordinates of the run within it."""
    digest = hashlib.sha256()
    digest.update(serialize_config(cfg).encode())
    digest.update(f"|{strategy_name}|{seed}".encode())
    return digest.hexdigest()[:12]


def benchmark_label(cfg: ExperimentConfig) -> str:
    return f"{cfg.benchmark.kind}/T{cfg.benchmark.n_domains}"


def _select_and_train(strategy, grid, t, guard):
    """Per-domain model selection on the current domain's validation split.

    With a single grid point the strategy trains in place. Otherwise each
    combination trains a cloned candidate; the best current-domain
    validation accuracy wins, ties resolving to the earliest combination.
    """
    if len(grid) == 1:
        strategy.train_on_domain(t, guard, grid[0])
        return strategy
    val = guard.val(t)
    best, best_score = None, -1.0
    for hp in grid:
        candidate = strategy.clone()
        candidate.train_on_domain(t, guard, hp)
        score = evaluate_accuracy(candidate.predict, val)
        if score > best_score:
            best, best_score = candidate, score
    return best


def execute_run(cfg: ExperimentConfig, strategy_cfg, seed: int) -> RunRecord:
    """One strategy under one seed, start to finish. Failures are captured
    in the record instead of propagating, so sibling runs continue."""
    record = RunRecord(
        run_id=run_id_for(cfg, strategy_cfg.name, seed),
        strategy=strategy_cfg.name,
        seed=seed,
        benchmark_label=benchmark_label(cfg),
        n_domains=cfg.benchmark.n_domains,
    )
    start = time.perf_counter()
    try:
        _execute_into(record, cfg, strategy_cfg, seed)
    except Exception as exc:   # a failing run must not sink its siblings
        record.failure = f"{type(exc).__name__}: {exc}"
    record.duration = time.perf_counter() - start
    return record


def _execute_into(record: RunRecord, cfg: ExperimentConfig, strategy_cfg, seed: int):
    recipes = make_recipes(cfg.benchmark)
    stream = build_stream(recipes, derive(seed, "stream"))
    grid = expand_grid(strategy_cfg)
    strategy = strategy_dispatch(strategy_cfg.name, seed, stream.dim,
                                 stream.n_classes, grid[0])
    guard = StreamGuard(stream, privileged=strategy.privileged)
    T = stream.n_domains
    matrix = AccuracyMatrix(T)
    for t in range(T):
        guard.advance(t)
        strategy = _select_and_train(strategy, grid, t, guard)
        for s in range(t + 1):
            test = stream.domains[s].test
            matrix.record_alpha(s, t, strategy.predict(test.X), test.y)
        record.avg_accuracy.append(average_accuracy(matrix, t))
    record.matrix = matrix
    if T >= 2:
        record.bwt_final = bwt(matrix)
    if strategy.router_kind is not None:
        record.router_kind = strategy.router_kind
        X = np.vstack([d.test.X for d in stream.domains])
        true = np.concatenate([np.full(len(d.test), d.domain_id) for d in stream.domains])
        routed = strategy.route(X)
        record.routing = routing_accuracy(routed, true, T)
        proj = pca_project_2d(X)
        record.projection = [
            (int(true[i]), i, float(proj.coords[i, 0]), float(proj.coords[i, 1]),
             int(routed[i]))
            for i in range(len(true))
        ]
    record._strategy = strategy     # kept for checkpointing; not persisted


def run_experiment(cfg: ExperimentConfig, out_dir=None, jobs: int = 1):
    """Execute every (strategy, seed) pair of a config.

    Returns the records in config order (strategies outer, seeds inner)
    and writes per-run checkpoints under <out>/runs/<run_id>/. Persisting
    the aggregate CSVs is a separate step (persist_results).
    """
    out = out_dir if out_dir is not None else cfg.out_dir
    tasks = [(sc, seed) for sc in cfg.strategies for seed in cfg.seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_task, [(cfg, sc, seed, out) for sc, seed in tasks]))
    else:
        records = [_run_task((cfg, sc, seed, out)) for sc, seed in tasks]
    return records


def _run_task(payload):
    cfg, sc, seed, out = payload
    record = execute_run(cfg, sc, seed)
    # checkpoint in the worker: strategies do not cross process boundaries
    strategy = getattr(record, "_strategy", None)
    if strategy is not None:
        save_checkpoint(strategy, os.path.join(out, "runs", record.run_id))
        record._strategy = None
    return record


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def persist_results(records, out_dir) -> dict:
    """Write the five result files; returns {name: path}.

    Rows follow record order (config order), then domain indices ascending;
    identical records always produce byte-identical files.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}

    lines = [MATRIX_HEADER]
    for rec in records:
        if not rec.ok:
            continue
        for t in range(rec.n_domains):
            for s in range(t + 1):
                lines.append(",".join([
                    rec.run_id, rec.strategy, str(rec.seed), str(s), str(t),
                    _fmt(rec.matrix.entry(s, t)),
                ]))
    paths["matrix.csv"] = _write_lines(out_dir, "matrix.csv", lines)

    lines = [SUMMARY_HEADER]
    for rec in records:
        if not rec.ok:
            continue
        bwt_text = _fmt(rec.bwt_final) if rec.bwt_final is not None else ""
        for t, a_t in enumerate(rec.avg_accuracy):
            lines.append(",".join([
                rec.run_id, rec.strategy, str(rec.seed), str(t), _fmt(a_t), bwt_text,
            ]))
    paths["summary.csv"] = _write_lines(out_dir, "summary.csv", lines)

    lines = [ROUTING_HEADER]
    for rec in records:
        if not rec.ok or rec.routing is None:
            continue
        for d in range(rec.n_domains):
            lines.append(",".join([
                rec.run_id, rec.router_kind, str(d), _fmt(rec.routing.per_domain[d]),
            ]))
        lines.append(",".join([
            rec.run_id, rec.router_kind, "overall", _fmt(rec.routing.accuracy),
        ]))
    paths["routing.csv"] = _write_lines(out_dir, "routing.csv", lines)

    lines = [PROJECTION_HEADER]
    for rec in records:
        if not rec.ok or not rec.projection:
            continue
        for domain, idx, pc1, pc2, routed in rec.projection:
            lines.append(",".join([
                rec.run_id, rec.router_kind, str(domain), str(idx),
                _fmt(pc1), _fmt(pc2), str(routed),
            ]))
    paths["projection.csv"] = _write_lines(out_dir, "projection.csv", lines)

    report_path = os.path.join(out_dir, "report.txt")
    with open(report_path, "w") as fh:
        fh.write(render_report(records))
    paths["report.txt"] = report_path
    return paths


def _write_lines(out_dir, name, lines) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
