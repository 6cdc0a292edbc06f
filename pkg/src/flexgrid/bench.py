"""Benchmark harness: timed runs, threshold sweeps, and the amortized audit.

A run builds each requested variant from the same initial data, replays the
same trace against each, verifies that all variants returned identical
search-result checksums (the correctness gate), and only then writes
per-variant JSON reports plus cumulative-time CSV curves. The audit checks
the observed re-partition event frequency and per-update container-op cost
against their analytical bounds.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .core import GridIndex, Vector
from .repartition import Thresholds
from .tuner import DEFAULT_CELL_LOAD, PartitionSpec, heuristic_spec
from .variants import DELTA_BUFFER, FLEXFLOOD, UPDATABLE_FLOOD, VARIANT_KINDS, make_variant
from .workload import ReplayResult, WorkloadSpec, gen_initial, gen_trace, ingest_csv, read_trace, replay

SEED_ENV = "FLEXGRID_SEED"
DEFAULT_ALPHAS = [round(1.5 + 0.1 * i, 10) for i in range(11)]   # 1.5 .. 2.5
DEFAULT_BETAS = [round(0.1 + 0.05 * i, 10) for i in range(11)]   # 0.1 .. 0.6
BASELINE_ALPHA, BASELINE_BETA = 2.0, 1.0 / 3.0


class ConfigError(ValueError):
    """Invalid run configuration; message carries the offending field path."""


class GateError(RuntimeError):
    """Cross-variant search results disagreed; timings are not trustworthy."""


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------

@dataclass
class RunConfig:
    workload: WorkloadSpec
    partition: PartitionSpec | None = None
    thresholds: Thresholds = field(default_factory=Thresholds)
    variants: list[str] = field(default_factory=lambda: [FLEXFLOOD, UPDATABLE_FLOOD])
    delta_k: int = 10_000
    target_cell_load: int = DEFAULT_CELL_LOAD
    freeze_denominators: bool = False
    trace_file: str | None = None
    initial_csv: str | None = None
    alphas: list[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    betas: list[float] = field(default_factory=lambda: list(DEFAULT_BETAS))

    def to_json(self) -> dict:
        return {
            "seed": self.workload.seed,
            "workload": self.workload.to_json(),
            "partition": self.partition.to_json() if self.partition else None,
            "thresholds": self.thresholds.to_json(),
            "variants": list(self.variants),
            "delta_k": self.delta_k,
            "target_cell_load": self.target_cell_load,
            "freeze_denominators": self.freeze_denominators,
            "trace_file": self.trace_file,
            "initial_csv": self.initial_csv,
            "alphas": list(self.alphas),
            "betas": list(self.betas),
        }


def _need(obj: dict, key: str, kind, path: str):
    if key in obj and obj[key] is not None and not isinstance(obj[key], kind):
        raise ConfigError(f"{path}.{key}: expected {kind.__name__ if not isinstance(kind, tuple) else 'number'}")
    return obj.get(key)


def parse_config(obj: dict) -> RunConfig:
    """Validate a JSON config dict; raises ConfigError with a field path."""
    if not isinstance(obj, dict):
        raise ConfigError("config: expected a JSON object")
    seed = obj.get("seed", 0)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"{SEED_ENV}={env_seed!r}: expected an integer")
    wl = obj.get("workload", {})
    if not isinstance(wl, dict):
        raise ConfigError("workload: expected an object")
    try:
        workload = WorkloadSpec.from_json({**wl, "seed": int(seed)})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"workload: {exc}") from exc
    part = obj.get("partition")
    partition = None
    if part is not None:
        try:
            partition = PartitionSpec.from_json(part)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"partition: {exc}") from exc
    try:
        thresholds = Thresholds.from_json(obj.get("thresholds", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"thresholds: {exc}") from exc
    variants = obj.get("variants", [FLEXFLOOD, UPDATABLE_FLOOD])
    if not isinstance(variants, list) or not variants:
        raise ConfigError("variants: expected a non-empty list")
    for v in variants:
        if v not in VARIANT_KINDS:
            raise ConfigError(f"variants: unknown kind {v!r} (choose from {list(VARIANT_KINDS)})")
    delta_k = obj.get("delta_k", 10_000)
    if not isinstance(delta_k, int) or delta_k < 1:
        raise ConfigError("delta_k: expected an integer >= 1")
    target = obj.get("target_cell_load", DEFAULT_CELL_LOAD)
    if not isinstance(target, int) or target < 1:
        raise ConfigError("target_cell_load: expected an integer >= 1")
    freeze = bool(obj.get("freeze_denominators", False))
    alphas = obj.get("alphas", list(DEFAULT_ALPHAS))
    betas = obj.get("betas", list(DEFAULT_BETAS))
    for name, seq in (("alphas", alphas), ("betas", betas)):
        if not isinstance(seq, list) or not all(isinstance(x, (int, float)) for x in seq):
            raise ConfigError(f"{name}: expected a list of numbers")
    return RunConfig(
        workload=workload, partition=partition, thresholds=thresholds,
        variants=list(variants), delta_k=delta_k, target_cell_load=target,
        freeze_denominators=freeze,
        trace_file=_need(obj, "trace_file", str, "config"),
        initial_csv=_need(obj, "initial_csv", str, "config"),
        alphas=[float(x) for x in alphas], betas=[float(x) for x in betas],
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path) as f:
            obj = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(obj)


# ----------------------------------------------------------------------
# report assembly
# ----------------------------------------------------------------------

def assumption_check(slab_counts: Sequence[int], n: int, dims: int) -> dict:
    """prod(x_d) * sum(x_d) vs D * N * log2(N)."""
    lhs = math.prod(slab_counts) * sum(slab_counts)
    rhs = dims * n * math.log2(n) if n >= 2 else 0.0
    return {"lhs": lhs, "rhs": rhs, "satisfied": lhs <= rhs}


def _event_summary(events, dims: int) -> dict:
    per_kind: dict[str, dict[str, int]] = {}
    per_axis = [0] * dims
    for ev in events:
        row = per_kind.setdefault(ev.kind, {"count": 0, "moved": 0, "container_ops": 0})
        row["count"] += 1
        row["moved"] += ev.moved
        row["container_ops"] += ev.container_ops
        per_axis[ev.axis] += 1
    return {"per_kind": per_kind, "per_axis": per_axis, "total": len(events)}


def _halves(rr: ReplayResult) -> dict:
    """Per-half mean container ops per update, from block samples."""
    if not rr.blocks or rr.updates == 0:
        empty = {"updates": 0, "container_ops": 0, "mean_live_n": 0.0,
                 "mean_ops_per_update": 0.0}
        return {"first": dict(empty), "second": dict(empty)}
    target = rr.updates / 2
    mid = min(range(len(rr.blocks)), key=lambda k: abs(rr.blocks[k].cum_updates - target))
    m = rr.blocks[mid]
    last = rr.blocks[-1]
    first_updates = m.cum_updates
    first_ops = m.cum_container_ops - rr.container_ops_start
    second_updates = last.cum_updates - m.cum_updates
    second_ops = last.cum_container_ops - m.cum_container_ops
    live_first = [b.live_n for b in rr.blocks[: mid + 1]]
    live_second = [b.live_n for b in rr.blocks[mid + 1:]] or [last.live_n]
    return {
        "first": {
            "updates": first_updates, "container_ops": first_ops,
            "mean_live_n": sum(live_first) / len(live_first),
            "mean_ops_per_update": first_ops / first_updates if first_updates else 0.0,
        },
        "second": {
            "updates": second_updates, "container_ops": second_ops,
            "mean_live_n": sum(live_second) / len(live_second),
            "mean_ops_per_update": second_ops / second_updates if second_updates else 0.0,
        },
    }


def build_report(config: RunConfig, variant, rr: ReplayResult,
                 initial_n: int) -> dict:
    """Assemble the JSON-ready report for one variant's replay."""
    stats = variant.index.stats()
    dims = stats.dims
    total_ops = variant.container_ops() - rr.container_ops_start
    mean_ops = total_ops / rr.updates if rr.updates else 0.0
    nbar = rr.mean_live_n
    dlog = dims * math.log2(nbar) if nbar >= 2 else 0.0
    final_live = rr.blocks[-1].live_n if rr.blocks else initial_n
    delta_est = 0.0
    if rr.updates:
        delta_est = min(1.0, max(0.0, (final_live - initial_n) / rr.updates))
    return {
        "config": config.to_json(),
        "variant": variant.name,
        "blocks": [[b.end, b.cum_search_s, b.cum_update_s] for b in rr.blocks],
        "totals": {
            "search_s": rr.total_search_s, "update_s": rr.total_update_s,
            "searches": rr.n_searches, "inserts": rr.n_inserts,
            "erases": rr.n_erases, "skipped_erases": rr.n_skipped_erases,
        },
        "search_checksum": rr.search_checksum,
        "mean_search_s": rr.total_search_s / rr.n_searches if rr.n_searches else 0.0,
        "final_stats": {
            "n": stats.n, "dims": dims, "sort_dim": stats.sort_dim,
            "slab_counts": stats.slab_counts, "cell_count": stats.cell_count,
            "slab_loads": stats.slab_loads, "counters": stats.counters,
        },
        "events": _event_summary(variant.events, dims),
        "assumption2": assumption_check(stats.slab_counts, stats.n, dims),
        "amortized": {
            "updates": rr.updates,
            "mean_live_n": nbar,
            "mean_slab_counts": rr.mean_slab_counts(),
            "per_axis_events": _event_summary(variant.events, dims)["per_axis"],
            "delta_est": delta_est,
            "container_ops": total_ops,
            "mean_container_ops_per_update": mean_ops,
            "amortized_constant": mean_ops / dlog if dlog else 0.0,
            "halves": _halves(rr),
        },
    }


# ----------------------------------------------------------------------
# the audit (event frequency and amortized-cost bounds)
# ----------------------------------------------------------------------

def event_bound(k: int, x_d: float, n_bar: float, delta: float) -> float:
    """Upper bound on re-partition events on one axis over k updates."""
    if n_bar <= 0:
        return 0.0
    return k * ((5 + delta) * x_d - 3 * delta - 5 * delta * delta) / (4 * n_bar)


def audit_report(report: dict, delta: float | None = None,
                 slack: float = 1.10) -> dict:
    """Compare observed event counts and per-update cost against bounds.

    Axes whose event count exceeds slack * bound are listed as exceeding;
    the amortized constant is mean container ops per update divided by
    D * log2(mean N).
    """
    am = report["amortized"]
    if delta is None:
        delta = am.get("delta_est", 0.0)
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"delta must be in [0, 1], got {delta}")
    k = am["updates"]
    nbar = am["mean_live_n"]
    xbars = am["mean_slab_counts"]
    events = am["per_axis_events"]
    axes = []
    exceeding = []
    for d, (xb, ev) in enumerate(zip(xbars, events)):
        bound = event_bound(k, xb, nbar, delta)
        ratio = ev / bound if bound > 0 else (0.0 if ev == 0 else math.inf)
        axes.append({"axis": d, "events": ev, "bound": bound, "ratio": ratio})
        if ev > slack * bound:
            exceeding.append(d)
    return {
        "delta": delta,
        "updates": k,
        "mean_live_n": nbar,
        "axes": axes,
        "exceeding_axes": exceeding,
        "within_bounds": not exceeding,
        "mean_container_ops_per_update": am["mean_container_ops_per_update"],
        "amortized_constant": am["amortized_constant"],
        "halves": am["halves"],
    }


# ----------------------------------------------------------------------
# run / readonly / sweep drivers
# ----------------------------------------------------------------------

def _prepare(config: RunConfig):
    w = config.workload
    if config.initial_csv:
        data, _ = ingest_csv(config.initial_csv, w.dims)
    else:
        data = gen_initial(w)
    if config.partition is not None:
        spec = config.partition
        if spec.dims != w.dims:
            raise ConfigError(f"partition.counts: {spec.dims} axes but workload.dims={w.dims}")
    elif data:
        spec = heuristic_spec(data, w.dims, config.target_cell_load)
    else:
        spec = PartitionSpec(w.dims - 1, tuple([1] * w.dims), source="heuristic")
    if config.trace_file:
        trace = read_trace(config.trace_file, w.dims)
    else:
        trace = gen_trace(w, sample=data)
    return data, spec, trace


def _run_variant(kind: str, config: RunConfig, data, spec, trace,
                 thresholds: Thresholds | None = None) -> tuple[Any, ReplayResult]:
    w = config.workload
    variant = make_variant(kind, data, spec,
                           thresholds=thresholds or config.thresholds,
                           delta_k=config.delta_k,
                           freeze_denominators=config.freeze_denominators)
    rr = replay(trace, variant, data, seed=w.seed, block=w.block)
    return variant, rr


def _gate(results: dict[str, ReplayResult]) -> None:
    sums = {name: rr.search_checksum for name, rr in results.items()}
    if len(set(sums.values())) > 1:
        raise GateError(f"search checksums disagree across variants: {sums}")


def _write_curves(out_dir: Path, name: str, rr: ReplayResult) -> None:
    for metric, attr in (("search", "cum_search_s"), ("update", "cum_update_s")):
        with open(out_dir / f"curve_{name}_{metric}.csv", "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["query_ordinal", "cumulative_seconds"])
            for b in rr.blocks:
                wr.writerow([b.end, getattr(b, attr)])


def run(config: RunConfig, out_dir: str | Path | None = None) -> dict[str, dict]:
    """Replay the configured workload on every variant; gate, then report."""
    data, spec, trace = _prepare(config)
    variants: dict[str, Any] = {}
    results: dict[str, ReplayResult] = {}
    for kind in config.variants:
        variant, rr = _run_variant(kind, config, data, spec, trace)
        variants[kind], results[kind] = variant, rr
    _gate(results)
    reports = {kind: build_report(config, variants[kind], results[kind], len(data))
               for kind in config.variants}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for kind, rep in reports.items():
            with open(out / f"report_{kind}.json", "w") as f:
                json.dump(rep, f, indent=2)
            _write_curves(out, kind, results[kind])
    return reports


def read_only_bench(config: RunConfig, out_dir: str | Path | None = None) -> dict[str, dict]:
    """Searches-only comparison; rejects configs that contain update ops."""
    if not config.workload.read_only and config.trace_file is None:
        raise ConfigError("workload.read_only: must be true for the read-only benchmark")
    data, spec, trace = _prepare(config)
    for i, op in enumerate(trace):
        if op[0] != "S":
            raise ConfigError(f"trace: op {i} is an update; read-only benchmark requires searches only")
    variants: dict[str, Any] = {}
    results: dict[str, ReplayResult] = {}
    for kind in config.variants:
        variant, rr = _run_variant(kind, config, data, spec, trace)
        variants[kind], results[kind] = variant, rr
    _gate(results)
    reports = {kind: build_report(config, variants[kind], results[kind], len(data))
               for kind in config.variants}
    for kind, rep in reports.items():
        if rep["events"]["total"]:
            raise GateError(f"{kind}: re-partition events occurred on a read-only trace")
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report_readonly.json", "w") as f:
            json.dump(reports, f, indent=2)
        for kind, rr in results.items():
            _write_curves(out, kind, rr)
    return reports


def expand_sweep_grid(alphas: Sequence[float], betas: Sequence[float]) -> list[dict]:
    """All (alpha, beta) cells with validity flags; gamma sits midway."""
    cells = []
    for a in alphas:
        for b in betas:
            cell = {"alpha": a, "beta": b, "valid": True, "reason": None}
            try:
                Thresholds(a, b)
            except ValueError as exc:
                cell["valid"] = False
                cell["reason"] = str(exc)
            cells.append(cell)
    return cells


def _is_baseline(a: float, b: float) -> bool:
    return abs(a - BASELINE_ALPHA) < 1e-9 and abs(b - BASELINE_BETA) < 1e-9


def sweep(config: RunConfig, out_dir: str | Path | None = None) -> dict:
    """One flexflood run per threshold cell; times relative to (2, 1/3).

    When the grid itself does not contain the baseline cell an extra
    baseline run provides the reference.
    """
    data, spec, trace = _prepare(config)
    cells = expand_sweep_grid(config.alphas, config.betas)
    baseline_times: tuple[float, float] | None = None
    for cell in cells:
        if not cell["valid"]:
            continue
        variant, rr = _run_variant(FLEXFLOOD, config, data, spec, trace,
                                   thresholds=Thresholds(cell["alpha"], cell["beta"]))
        cell["search_s"] = rr.total_search_s
        cell["update_s"] = rr.total_update_s
        cell["events"] = len(variant.events)
        cell["search_checksum"] = rr.search_checksum
        if _is_baseline(cell["alpha"], cell["beta"]):
            baseline_times = (rr.total_search_s, rr.total_update_s)
    if baseline_times is None:
        _, rr = _run_variant(FLEXFLOOD, config, data, spec, trace,
                             thresholds=Thresholds(BASELINE_ALPHA, BASELINE_BETA))
        baseline_times = (rr.total_search_s, rr.total_update_s)
    base_s, base_u = baseline_times
    for cell in cells:
        if cell["valid"]:
            cell["search_pct"] = 100.0 * (cell["search_s"] - base_s) / base_s
            cell["update_pct"] = 100.0 * (cell["update_s"] - base_u) / base_u
    result = {"baseline": {"search_s": base_s, "update_s": base_u},
              "cells": cells, "config": config.to_json()}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "sweep.json", "w") as f:
            json.dump(result, f, indent=2)
        with open(out / "sweep_heatmap.csv", "w", newline="") as f:
            wr = csv.writer(f)
            wr.writerow(["alpha", "beta", "valid", "search_s", "update_s",
                         "search_pct", "update_pct"])
            for cell in cells:
                wr.writerow([cell["alpha"], cell["beta"], cell["valid"],
                             cell.get("search_s", ""), cell.get("update_s", ""),
                             cell.get("search_pct", ""), cell.get("update_pct", "")])
    return result
