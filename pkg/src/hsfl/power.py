"""Subchannel assignment and transmit power for one link.

A link problem minimises ``max_k offset_k + load_k / R_k`` where ``R_k`` is
the Shannon rate over the subchannels client k owns.  On uplinks each client
transmits at its own cap (the rate only grows with power and no constraint
couples clients), so only the assignment is searched.  On downlinks the
server splits a shared budget: for a given assignment the split comes from a
bisection on the bottleneck latency, or is even when ``downlink_rule`` says
so.  The discrete search is a depth-first branch and bound; the exhaustive
enumeration with the same leaf rule is kept as an oracle.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _kernels

ENUMERATION_LIMIT = 100_000


class InfeasiblePowerError(ValueError):
    """No assignment gives every loaded client a finite rate."""


@dataclass(frozen=True)
class LinkProblem:
    """One link's subproblem.

    Exactly one of ``power_cap`` (per-client caps, uplink) and ``budget``
    (shared server cap, downlink) is set.
    """

    gain: np.ndarray
    load: np.ndarray
    offset: np.ndarray
    bandwidth: float
    noise: float
    power_cap: np.ndarray | None = None
    budget: float | None = None
    downlink_rule: str = "bisection"

    def __post_init__(self):
        gain = np.atleast_2d(np.asarray(self.gain, dtype=float))
        n_clients = gain.shape[1]
        load = np.asarray(self.load, dtype=float).reshape(n_clients)
        offset = np.asarray(self.offset, dtype=float).reshape(n_clients)
        if np.any(gain < 0) or np.any(load < 0):
            raise ValueError("gains and loads must be >= 0")
        if (self.power_cap is None) == (self.budget is None):
            raise ValueError("set exactly one of power_cap (uplink) and budget (downlink)")
        if self.power_cap is not None:
            cap = np.broadcast_to(np.asarray(self.power_cap, dtype=float), (n_clients,)).copy()
            if np.any(~(cap > 0)):
                raise ValueError("power caps must be > 0")
            object.__setattr__(self, "power_cap", cap)
        elif not self.budget > 0:
            raise ValueError("budget must be > 0")
        if self.downlink_rule not in ("bisection", "even"):
            raise ValueError(f"unknown downlink rule {self.downlink_rule!r}")
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "load", load)
        object.__setattr__(self, "offset", offset)

    @property
    def num_clients(self) -> int:
        return self.gain.shape[1]

    @property
    def subchannel_count(self) -> int:
        return self.gain.shape[0]

    @property
    def is_uplink(self) -> bool:
        return self.power_cap is not None

    def kernel_args(self):
        """(budget_mode, gain, c, w, fixed powers, budget, bw, noise)."""
        if self.is_uplink:
            return (False, self.gain, self.offset, self.load, self.power_cap, 0.0,
                    float(self.bandwidth), float(self.noise))
        if self.downlink_rule == "even":
            even = np.full(self.num_clients, self.budget / self.num_clients)
            return (False, self.gain, self.offset, self.load, even, float(self.budget),
                    float(self.bandwidth), float(self.noise))
        return (True, self.gain, self.offset, self.load, np.zeros(self.num_clients),
                float(self.budget), float(self.bandwidth), float(self.noise))

    def evaluate(self, assign) -> tuple[float, np.ndarray]:
        """Objective and powers of a complete assignment under the leaf rule."""
        assign = np.asarray(assign, dtype=np.int64)
        power = np.zeros(self.num_clients)
        obj = _kernels.eval_leaf(*self._leaf_args(assign), power)
        return float(obj), power

    def _leaf_args(self, assign):
        budget_mode, gain, c, w, p, budget, bw, noise = self.kernel_args()
        return budget_mode, assign, gain, c, w, p, budget, bw, noise


@dataclass
class PowerSolution:
    assign: np.ndarray
    power: np.ndarray
    objective: float
    nodes: int = 0
    pruned: int = 0
    leaves: int = 0
    limited: bool = False
    history: np.ndarray = field(default=None, repr=False)

    def write_trace(self, path) -> None:
        """CSV of the search: totals first, then the incumbent history."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["kind", "nodes", "value"])
            writer.writerow(["expanded", self.nodes, ""])
            writer.writerow(["pruned", self.pruned, ""])
            writer.writerow(["leaves", self.leaves, ""])
            for nodes, obj in (self.history if self.history is not None else []):
                writer.writerow(["incumbent", int(nodes), repr(float(obj))])


def greedy_assignment(gain, load=None) -> np.ndarray:
    """Assign subchannels by best gain.

    First every client with something to send gets one subchannel, taking
    the highest remaining (subchannel, client) gain each time; the leftover
    subchannels then go to whichever client sees the best gain on them.
    """
    gain = np.atleast_2d(np.asarray(gain, dtype=float))
    n_chan, n_clients = gain.shape
    needy = np.ones(n_clients, bool) if load is None else np.asarray(load) > 0
    assign = np.full(n_chan, -1, dtype=np.int64)
    free = np.ones(n_chan, bool)
    waiting = needy.copy()
    while waiting.any() and free.any():
        masked = np.where(free[:, None] & waiting[None, :], gain, -np.inf)
        i, k = np.unravel_index(int(np.argmax(masked)), masked.shape)
        assign[i] = k
        free[i] = False
        waiting[k] = False
    for i in np.flatnonzero(free):
        assign[i] = int(np.argmax(gain[i]))
    return assign


def search_orders(sub: LinkProblem) -> tuple[np.ndarray, np.ndarray]:
    """Subchannels by descending best gain, clients by descending load."""
    chan = np.argsort(-sub.gain.max(axis=1), kind="stable").astype(np.int64)
    clients = np.argsort(-sub.load, kind="stable").astype(np.int64)
    return chan, clients


def _check_servable(sub: LinkProblem) -> None:
    loaded = np.flatnonzero(sub.load > 0)
    if loaded.size > sub.subchannel_count:
        raise InfeasiblePowerError(
            f"{loaded.size} clients need a subchannel but only {sub.subchannel_count} exist")
    dead = [k for k in loaded if not np.any(sub.gain[:, k] > 0)]
    if dead:
        raise InfeasiblePowerError(f"clients {dead} have zero gain on every subchannel")


def solve_power(sub: LinkProblem, init_assign=None, max_nodes: int = 50_000_000,
                hist_cap: int = 256) -> PowerSolution:
    """Branch and bound over assignments; exact under the link's leaf rule.

    ``init_assign`` seeds the incumbent (default: :func:`greedy_assignment`).

    Raises:
        InfeasiblePowerError: if some loaded client can never get a rate.
    """
    _check_servable(sub)
    if init_assign is None:
        init_assign = greedy_assignment(sub.gain, sub.load)
    init_assign = np.asarray(init_assign, dtype=np.int64)
    chan, clients = search_orders(sub)
    (assign, power, obj, nodes, pruned, leaves, limited,
     hist_nodes, hist_obj) = _kernels.bnb_link(
        *sub.kernel_args(), chan, clients, init_assign, int(max_nodes), int(hist_cap))
    history = np.column_stack([hist_nodes, hist_obj]) if len(hist_nodes) else np.empty((0, 2))
    return PowerSolution(assign, power, float(obj), int(nodes), int(pruned), int(leaves),
                         bool(limited), history)


def enumerate_power(sub: LinkProblem) -> PowerSolution:
    """Exhaustive search over all K**I assignments; test oracle."""
    size = sub.num_clients ** sub.subchannel_count
    if size > ENUMERATION_LIMIT:
        raise ValueError(f"K**I = {size} exceeds the enumeration limit {ENUMERATION_LIMIT}")
    assign, power, obj, count = _kernels.enumerate_link(*sub.kernel_args())
    return PowerSolution(assign, power, float(obj), int(count), 0, int(count), False)


def node_lower_bound(sub: LinkProblem, partial_assign) -> float:
    """Bound used at a search node; -1 marks subchannels not yet assigned."""
    partial = np.asarray(partial_assign, dtype=np.int64)
    budget_mode, gain, c, w, p, budget, bw, noise = sub.kernel_args()
    return float(_kernels.node_bound(budget_mode, gain, c, w, p, budget, bw, noise, partial))
