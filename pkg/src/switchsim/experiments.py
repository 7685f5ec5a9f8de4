"""Replicated runs of expanded configs and their CSV rows."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import traffic as traffic_mod
from .config import ExperimentConfig
from .metrics import (
    Estimate,
    audit_pi2,
    audit_pi3,
    estimate_mean,
    pi2_slack,
)
from .schedulers import pc_delta
from .simulate import RunRecord, simulate

THREADS_ENV = "SWITCHSIM_THREADS"

CSV_HEADER = (
    "config_id", "n", "traffic_kind", "family", "epsilon", "load", "scheduler", "d", "m",
    "delta", "horizon", "warmup_fraction", "thinning", "trace_every", "replications",
    "replication", "metric", "mean", "ci_half_width", "samples", "seed",
)


def replication_rng(master_seed: int, replication: int) -> np.random.Generator:
    """Independent counter-based stream for one replication.

    ``SeedSequence`` hashes ``(master_seed, replication)`` into the Philox key,
    so streams for different indices do not overlap in practice.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([master_seed, replication])))


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_traffic(cfg: ExperimentConfig) -> traffic_mod.TrafficSpec:
    return traffic_mod.from_config(cfg.n, cfg.epsilon, cfg.traffic)


def effective_delta(cfg: ExperimentConfig) -> float | None:
    name = cfg.scheduler_name
    if name == "randomly_delayed_mw":
        return float(cfg.scheduler["delta"])
    if name == "pick_and_compare":
        return pc_delta(cfg.scheduler["d"], cfg.n)
    if name == "maxweight":
        return 1.0
    return None


def run_replication(cfg: ExperimentConfig, replication: int) -> RunRecord:
    spec = build_traffic(cfg)
    wants_trace = any(m in cfg.metrics for m in ("pi2_audit", "pi3_audit", "tau"))
    return simulate(
        spec,
        cfg.scheduler_name,
        cfg.scheduler_params,
        horizon=cfg.resolved_horizon(),
        warmup_fraction=cfg.warmup_fraction,
        thinning=cfg.thinning,
        ssc_every=cfg.ssc_every if "ssc" in cfg.metrics else 0,
        trace=wants_trace,
        trace_every=cfg.trace_every,
        rng=replication_rng(cfg.master_seed, replication),
    )


@dataclass(frozen=True)
class Metric:
    name: str
    mean: float
    half_width: float
    samples: int


def record_metrics(cfg: ExperimentConfig, rec: RunRecord) -> list[Metric]:
    """Metrics for one replication, in a fixed order."""
    out = []
    eps = cfg.epsilon
    if {"scaled_q", "ratio"} & set(cfg.metrics):
        est = estimate_mean(rec.sum_q, 0.0, cfg.batches)
        if "scaled_q" in cfg.metrics:
            spec = build_traffic(cfg)
            out.append(Metric("sum_q", est.mean, est.half_width, est.samples * cfg.thinning))
            out.append(Metric("scaled_q", eps * est.mean, eps * est.half_width, est.samples * cfg.thinning))
            out.append(Metric("lower_bound", spec.lower_bound(), 0.0, 0))
        if "ratio" in cfg.metrics:
            out.append(Metric("large_scale_ratio", eps / cfg.n * est.mean, eps / cfg.n * est.half_width,
                              est.samples * cfg.thinning))
    if "ssc" in cfg.metrics:
        for col, name in enumerate(("norm_perp_k", "norm_parallel_k", "norm_perp_s")):
            est = estimate_mean(rec.ssc[:, col], 0.0, cfg.batches)
            out.append(Metric(name, est.mean, est.half_width, est.samples))
        out.append(Metric("ssc_failures", rec.ssc_failures, 0.0, rec.ssc.shape[0]))
    if rec.weight is not None:
        slots = rec.weight.size
        if "pi2_audit" in cfg.metrics:
            m = cfg.scheduler.get("m", 1)
            spec = build_traffic(cfg)
            gap = rec.mw_weight - rec.weight
            out.append(Metric("pi2_violations", audit_pi2(rec.weight, rec.mw_weight, m, cfg.n, spec.a_max), 0.0, slots))
            out.append(Metric("pi2_max_gap", int(gap.max(initial=0)), 0.0, slots))
            out.append(Metric("pi2_slack", pi2_slack(m, cfg.n, spec.a_max), 0.0, 0))
        if "pi3_audit" in cfg.metrics or "tau" in cfg.metrics:
            audit = audit_pi3(rec.weight, rec.prev_weight, rec.is_mw)
            if "pi3_audit" in cfg.metrics:
                out.append(Metric("pi3_monotonicity_violations", audit.monotonicity_violations, 0.0, slots))
                out.append(Metric("empirical_delta", audit.empirical_delta, 0.0, slots))
                out.append(Metric("recompute_fraction", float(rec.recomputed.mean()), 0.0, slots))
            if "tau" in cfg.metrics:
                taus = audit.taus.taus
                if taus.size:
                    out.append(Metric("tau_mean", float(taus.mean()), 0.0, int(taus.size)))
                delta = effective_delta(cfg)
                if delta is not None:
                    bad = audit.taus.geometric_violations(delta)
                    out.append(Metric("tau_ccdf_violations", len(bad), 0.0, int(taus.size)))
        out.append(Metric("identity_violations", rec.identity_violations, 0.0, rec.horizon))
    return out


def _aggregate(per_rep: list[list[Metric]]) -> list[Metric]:
    """Across-replication summary: t-interval over replication means."""
    if len(per_rep) == 1:
        return per_rep[0]
    out = []
    R = len(per_rep)
    for k, first in enumerate(per_rep[0]):
        vals = np.array([rep[k].mean for rep in per_rep], dtype=float)
        samples = sum(rep[k].samples for rep in per_rep)
        if first.name.endswith(("violations", "failures")):
            out.append(Metric(first.name, float(vals.sum()), 0.0, samples))
            continue
        mean = float(vals.mean())
        hw = float(stats.t.ppf(0.975, R - 1) * vals.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
        out.append(Metric(first.name, mean, hw, samples))
    return out


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and x.is_integer() and abs(x) < 1e15:
        return repr(x)
    return repr(float(x))


def rows_for(cfg: ExperimentConfig, per_rep: list[list[Metric]]) -> list[dict]:
    echo = {
        "config_id": cfg.config_id,
        "n": cfg.n,
        "traffic_kind": cfg.traffic.get("kind", "uniform"),
        "family": cfg.traffic.get("family", "bernoulli"),
        "epsilon": cfg.epsilon,
        "load": cfg.load,
        "scheduler": cfg.scheduler_name,
        "d": cfg.scheduler.get("d", ""),
        "m": cfg.scheduler.get("m", ""),
        "delta": cfg.scheduler.get("delta", ""),
        "horizon": cfg.resolved_horizon(),
        "warmup_fraction": cfg.warmup_fraction,
        "thinning": cfg.thinning,
        "trace_every": cfg.trace_every,
        "replications": cfg.replications,
    }
    rows = []
    blocks = [(str(r), metrics) for r, metrics in enumerate(per_rep)]
    blocks.append(("all", _aggregate(per_rep)))
    for rep, metrics in blocks:
        for met in metrics:
            row = dict(echo)
            row.update(
                replication=rep,
                metric=met.name,
                mean=met.mean,
                ci_half_width=met.half_width,
                samples=met.samples,
                seed=cfg.master_seed,
            )
            rows.append(row)
    return rows


def run_points(points: list[ExperimentConfig], threads: int | None = None, progress=None) -> list[dict]:
    """Run every replication of every point; rows come out in config/replication order
    regardless of completion order."""
    threads = threads or default_threads()
    jobs = [(i, r) for i, cfg in enumerate(points) for r in range(cfg.replications)]

    def work(job):
        i, r = job
        cfg = points[i]
        metrics = record_metrics(cfg, run_replication(cfg, r))
        if progress:
            progress(cfg, r)
        return job, metrics

    results = {}
    if threads == 1:
        for job in jobs:
            key, metrics = work(job)
            results[key] = metrics
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for key, metrics in pool.map(work, jobs):
                results[key] = metrics
    rows = []
    for i, cfg in enumerate(points):
        rows.extend(rows_for(cfg, [results[(i, r)] for r in range(cfg.replications)]))
    return rows


def to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(v) if isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) else v
                         for k, v in row.items()})
    return buf.getvalue()


def write_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(to_csv(rows))


def estimate_of(rows: list[dict], metric: str, **match) -> Estimate:
    """Pick the aggregated row for ``metric`` among rows matching ``match``."""
    for row in rows:
        if row["metric"] == metric and row["replication"] == "all" and all(row[k] == v for k, v in match.items()):
            return Estimate(float(row["mean"]), float(row["ci_half_width"]), 0, int(row["samples"]))
    raise KeyError(f"no row for {metric} with {match}")
