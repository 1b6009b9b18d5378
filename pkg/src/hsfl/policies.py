"""The optimised pipeline and the one-axis baselines it is compared with.

Each baseline replaces exactly one decision of the full pipeline and keeps
the optimised solver for the rest:

    RCLS  uniform random feasible cut per client
    SCLS  every client at the smallest of the per-client maximum cuts
    ECFA  even split of the main-server frequency
    GTRA  greedy subchannel assignment by best gain on every link
    ETRA  even split of the server downlink power
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cutlayer import cut_bounds
from .profiles import EnvironmentSample, ModelProfile, SystemProfile
from .shortterm import OPT_RULE, RoundPlan, RoundRule, optimize_round

POLICY_NAMES = ("OPT", "RCLS", "SCLS", "ECFA", "GTRA", "ETRA")


@dataclass(frozen=True)
class Policy:
    """``cut_rule`` is "ga", "random" or "shallowest"."""

    name: str
    cut_rule: str
    round_rule: RoundRule

    def choose_cuts(self, model: ModelProfile, sys: SystemProfile, rng=None,
                    optimized_cut=None) -> np.ndarray:
        """Long-timescale cut vector.

        Policies that keep the GA cut need ``optimized_cut``; RCLS draws from
        ``rng``.
        """
        upper = cut_bounds(model, sys)
        if self.cut_rule == "random":
            rng = np.random.default_rng(rng)
            return rng.integers(0, upper + 1).astype(np.int64)
        if self.cut_rule == "shallowest":
            return np.full(sys.num_clients, int(upper.min()), dtype=np.int64)
        if optimized_cut is None:
            raise ValueError(f"policy {self.name} needs the optimised cut vector")
        return np.asarray(optimized_cut, dtype=np.int64).copy()

    def allocate(self, model: ModelProfile, sys: SystemProfile, env: EnvironmentSample,
                 cut) -> RoundPlan:
        return optimize_round(model, sys, env, cut, self.round_rule)


_POLICIES = {
    "OPT": Policy("OPT", "ga", OPT_RULE),
    "RCLS": Policy("RCLS", "random", OPT_RULE),
    "SCLS": Policy("SCLS", "shallowest", OPT_RULE),
    "ECFA": Policy("ECFA", "ga", RoundRule(freq="even")),
    "GTRA": Policy("GTRA", "ga", RoundRule(assign="greedy")),
    "ETRA": Policy("ETRA", "ga", RoundRule(downlink_power="even")),
}


def baseline_policy(name: str) -> Policy:
    """Look up a policy by name (case-insensitive)."""
    key = str(name).upper()
    if key not in _POLICIES:
        raise ValueError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
    return _POLICIES[key]
