"""Round-by-round latency simulation of the split federated workflow.

Each round draws an environment, applies a policy's allocation for the cut
vector fixed before round 0, and records who finished in time.  Clients
past the straggler tolerance are left out of that round's aggregation but
still receive the new global model.  The server-to-server exchange of
common layers is treated as free.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .channel import EnvStats, derive_seeds, sample_batch
from .latency import LatencyBreakdown, per_round_latency
from .policies import Policy
from .profiles import Allocation, EnvironmentSample, ModelProfile, SystemProfile


@dataclass
class RoundRecord:
    round: int
    allocation: Allocation
    breakdown: LatencyBreakdown
    stragglers: tuple
    participants: tuple
    cumulative: float

    @property
    def round_total(self) -> float:
        return self.breakdown.round_total

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "round_total": self.round_total,
            "cumulative": self.cumulative,
            "stragglers": list(self.stragglers),
            "participants": list(self.participants),
            "allocation": self.allocation.to_dict(),
            "clients": self.breakdown.as_rows(),
        }


@dataclass(frozen=True)
class AggregationPlan:
    """Who holds which global layer, and the averaging weights.

    ``client_side[j - 1, k]`` is True when layer j (1-based) sits on client
    k's side of its cut.  Every layer averages over all participants:
    client-side copies for holders, the main server's copy for the rest.
    """

    cuts: np.ndarray
    num_layers: int
    weights: np.ndarray
    client_side: np.ndarray
    common: tuple

    def layer_weights(self, layer: int) -> np.ndarray:
        self._check_layer(layer)
        return self.weights

    def is_common(self, layer: int) -> bool:
        self._check_layer(layer)
        return layer in self.common

    def holders(self, layer: int) -> np.ndarray:
        """Participants holding ``layer`` client-side (the rest via the MS)."""
        self._check_layer(layer)
        return np.flatnonzero(self.client_side[layer - 1] & (self.weights > 0))

    def _check_layer(self, layer):
        if not 1 <= layer <= self.num_layers:
            raise ValueError(f"layer {layer} outside 1..{self.num_layers}")


def build_aggregation_plan(cuts, num_layers: int, dataset_size,
                           participants=None) -> AggregationPlan:
    """Plan for one aggregation; non-participants get zero weight.

    The common layers are those client-side for some clients and
    server-side for others: min(cuts) < j <= max(cuts).
    """
    cuts = np.asarray(cuts, dtype=np.int64)
    sizes = np.asarray(dataset_size, dtype=float)
    if sizes.shape != cuts.shape:
        raise ValueError("need one dataset size per client")
    if np.any(cuts < 0) or np.any(cuts > num_layers):
        raise ValueError(f"cuts must lie in 0..{num_layers}")
    mask = np.ones(cuts.shape[0], bool)
    if participants is not None:
        mask[:] = False
        mask[np.asarray(participants, dtype=np.int64)] = True
    if not mask.any():
        raise ValueError("an aggregation needs at least one participant")
    weights = np.where(mask, sizes, 0.0)
    weights = weights / weights.sum()
    layers = np.arange(1, num_layers + 1)
    client_side = layers[:, None] <= cuts[None, :]
    common = tuple(int(j) for j in layers if cuts.min() < j <= cuts.max())
    return AggregationPlan(cuts, int(num_layers), weights, client_side, common)


def run_round(a: int, alloc: Allocation, env: EnvironmentSample, model: ModelProfile,
              sys: SystemProfile, cumulative: float = 0.0) -> RoundRecord:
    """Account one round; raises FeasibilityError for an infeasible ``alloc``."""
    bd = per_round_latency(model, sys, alloc, env, check=True)
    stragglers = tuple(int(k) for k in np.flatnonzero(bd.stragglers))
    participants = tuple(int(k) for k in np.flatnonzero(~bd.stragglers))
    return RoundRecord(a, alloc, bd, stragglers, participants, cumulative + bd.round_total)


def run_training(total_rounds: int, policy: Policy, stats: EnvStats, model: ModelProfile,
                 sys: SystemProfile, seed: int, optimized_cut=None) -> list[RoundRecord]:
    """Simulate ``total_rounds`` rounds under ``policy``.

    Environment draws depend only on ``seed``, so every policy run with the
    same seed sees the same rounds.  ``optimized_cut`` is the GA result for
    policies that keep it.
    """
    if total_rounds < 1:
        raise ValueError("total_rounds must be >= 1")
    round_seq, cut_seq = derive_seeds(seed, 2)
    cut = policy.choose_cuts(model, sys, rng=cut_seq, optimized_cut=optimized_cut)
    records = []
    cumulative = 0.0
    for a, env in enumerate(sample_batch(stats, round_seq, total_rounds)):
        plan = policy.allocate(model, sys, env, cut)
        rec = run_round(a, plan.allocation, env, model, sys, cumulative)
        cumulative = rec.cumulative
        records.append(rec)
    return records


def jsonable(obj):
    """Copy of ``obj`` with non-finite floats as the strings "inf", "-inf", "nan"."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)) and not np.isfinite(obj):
        return str(float(obj))
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_records_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(jsonable(rec.to_dict()), sort_keys=True) + "\n")


def write_summary_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["round", "round_total", "stragglers", "cumulative"])
        for rec in records:
            writer.writerow([rec.round, repr(rec.round_total), len(rec.stragglers),
                             repr(rec.cumulative)])
