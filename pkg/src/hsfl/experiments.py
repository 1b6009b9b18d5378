"""Policy comparisons and one-axis sweeps over an experiment config.

The GA cut is searched once per configuration point and shared by every
run seed and by the policies that keep it.  Run seeds only change the
round-by-round environment draws (and RCLS's random cut), so all policies
on one seed see the same rounds.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, replace

import numpy as np

from .config import SWEEP_AXES, ExperimentConfig
from .cutlayer import GAResult, optimize_cuts
from .policies import baseline_policy
from .protocol import jsonable, run_training

SUMMARY_FIELDS = ("policy", "axis", "value", "seed", "mean_round_latency",
                  "cumulative_latency", "straggler_rounds", "cut", "status")


@dataclass
class RunRow:
    policy: str
    axis: str
    value: float | None
    seed: int
    mean_round_latency: float
    cumulative_latency: float
    straggler_rounds: int
    cut: tuple
    status: str = "ok"
    round_totals: tuple = ()

    def csv_row(self) -> list:
        return [self.policy, self.axis, "" if self.value is None else repr(self.value),
                self.seed, repr(self.mean_round_latency), repr(self.cumulative_latency),
                self.straggler_rounds, " ".join(str(c) for c in self.cut), self.status]


@dataclass
class PointResult:
    axis: str
    value: float | None
    ga: GAResult
    rows: list


def run_point(cfg: ExperimentConfig, axis: str = "base", value=None, seeds=None,
              policies=None) -> PointResult:
    """Every (policy, seed) run at one configuration point."""
    scen = cfg.scenario(None if axis == "base" else axis, value)
    ga = optimize_cuts(cfg.ga, scen.stats, scen.model, scen.sys)
    rows = []
    for seed in (cfg.seeds if seeds is None else seeds):
        for name in (cfg.policies if policies is None else policies):
            policy = baseline_policy(name)
            try:
                recs = run_training(scen.sys.total_rounds, policy, scen.stats, scen.model,
                                    scen.sys, seed, optimized_cut=ga.cut)
            except Exception as exc:  # recorded per row, the sweep carries on
                rows.append(RunRow(policy.name, axis, value, seed, float("nan"),
                                   float("nan"), 0, (), f"error: {exc}"))
                continue
            totals = tuple(r.round_total for r in recs)
            rows.append(RunRow(policy.name, axis, value, seed,
                               recs[-1].cumulative / len(recs), recs[-1].cumulative,
                               sum(1 for r in recs if r.stragglers),
                               tuple(int(c) for c in recs[0].allocation.cut),
                               round_totals=totals))
    return PointResult(axis, value, ga, rows)


def sweep_points(cfg: ExperimentConfig, axes=None) -> list[tuple]:
    """(axis, value) pairs: the base point, then every sweep value in axis order."""
    points = [("base", None)]
    for axis in SWEEP_AXES:
        if axis in cfg.sweep and (axes is None or axis in axes):
            points.extend((axis, v) for v in cfg.sweep[axis])
    return points


def run_experiment(cfg: ExperimentConfig, seeds=None, policies=None, axes=None,
                   include_base: bool = True, log=None) -> list[PointResult]:
    """Run the base point and the sweeps; ``axes=()`` skips the sweeps."""
    results = []
    done = {}
    for axis, value in sweep_points(cfg, axes):
        if axis == "base" and not include_base:
            continue
        start = time.perf_counter()
        key = cfg.point_key(None if axis == "base" else axis, value)
        if key in done:
            # same scenario as an earlier point: relabel its rows
            prev = done[key]
            rows = [replace(r, axis=axis, value=value) for r in prev.rows]
            results.append(PointResult(axis, value, prev.ga, rows))
        else:
            results.append(run_point(cfg, axis, value, seeds, policies))
            done[key] = results[-1]
        if log is not None:
            label = axis if value is None else f"{axis}={value:g}"
            log(f"{label}: cut {results[-1].ga.cut.tolist()} "
                f"({time.perf_counter() - start:.1f} s)")
    return results


def _axis_rank(axis):
    return -1 if axis == "base" else SWEEP_AXES.index(axis)


def sorted_rows(results) -> list[RunRow]:
    order = {}
    rows = [row for res in results for row in res.rows]
    for row in rows:
        order.setdefault(row.policy, len(order))
    return sorted(rows, key=lambda r: (_axis_rank(r.axis), -np.inf if r.value is None else r.value,
                                       order[r.policy], r.seed))


def write_results(results, out_dir) -> dict:
    """summary.csv, runs.jsonl and ga.jsonl under ``out_dir``; returns the paths."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted_rows(results)
    paths = {"summary": out / "summary.csv", "runs": out / "runs.jsonl", "ga": out / "ga.jsonl"}
    with open(paths["summary"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_FIELDS)
        for row in rows:
            writer.writerow(row.csv_row())
    with open(paths["runs"], "w") as fh:
        for row in rows:
            rec = {"policy": row.policy, "axis": row.axis, "value": row.value, "seed": row.seed,
                   "cut": list(row.cut), "status": row.status,
                   "mean_round_latency": row.mean_round_latency,
                   "round_totals": list(row.round_totals)}
            fh.write(json.dumps(jsonable(rec), sort_keys=True) + "\n")
    with open(paths["ga"], "w") as fh:
        for res in sorted(results, key=lambda r: (_axis_rank(r.axis),
                                                  -np.inf if r.value is None else r.value)):
            rec = {"axis": res.axis, "value": res.value, "cut": res.ga.cut.tolist(),
                   "saa_latency": res.ga.latency, "generations": res.ga.generations,
                   "evaluations": res.ga.evaluations}
            fh.write(json.dumps(jsonable(rec), sort_keys=True) + "\n")
    return paths


def policy_means(rows, axis: str) -> dict:
    """{policy: {value: mean over seeds of mean_round_latency}} for one axis."""
    acc = {}
    for row in rows:
        if row.axis == axis:
            acc.setdefault(row.policy, {}).setdefault(row.value, []).append(row.mean_round_latency)
    return {p: {v: float(np.mean(x)) for v, x in sorted(d.items(), key=lambda kv: (kv[0] is not None, kv[0] or 0))}
            for p, d in acc.items()}
