"""Per-round allocation of server frequency, subchannels and power.

For a fixed cut vector and environment draw, the capped bottleneck term
``max_k min(N T_k,MS + T_k,ES^U, tau)`` couples the frequency split with the
MS uplink, MS downlink and ES uplink assignments; the ES downlink term is
separate and solved on its own.  The coupled part is handled by block
coordinate descent: each link in turn is re-solved exactly with the others
fixed, then the server-side continuous variables, keeping a move only if
the round improves.

The frequency split and the MS downlink power split both equalise client
latencies, so alternating between them stalls as soon as every client sits
at the same bottleneck.  When both are optimised they are therefore moved
together: the downlink powers come from a joint search over (F, p) for the
current assignment, and the shares are then recomputed by the frequency
allocator at those powers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .freq import FLOOR_SHARE, FreqSubproblem, solve_freq
from .latency import LatencyBreakdown, per_round_latency, transfer_times
from .power import InfeasiblePowerError, LinkProblem, greedy_assignment, solve_power
from .profiles import (
    DOWNLINKS, ES_DOWN, ES_UP, LINKS, MS_DOWN, MS_UP, Allocation, EnvironmentSample,
    ModelProfile, SystemProfile,
)

COUPLED_LINKS = (MS_UP, MS_DOWN, ES_UP)
IMPROVE_RTOL = 1e-9


@dataclass(frozen=True)
class RoundRule:
    """Which solver handles each short-timescale dimension.

    freq: "lagrangian" or "even"; assign: "bnb" or "greedy";
    downlink_power: "bisection" or "even".
    """

    freq: str = "lagrangian"
    assign: str = "bnb"
    downlink_power: str = "bisection"
    max_passes: int = 6

    def __post_init__(self):
        if self.freq not in ("lagrangian", "even"):
            raise ValueError(f"unknown frequency rule {self.freq!r}")
        if self.assign not in ("bnb", "greedy"):
            raise ValueError(f"unknown assignment rule {self.assign!r}")
        if self.downlink_power not in ("bisection", "even"):
            raise ValueError(f"unknown downlink power rule {self.downlink_power!r}")


OPT_RULE = RoundRule()


@dataclass
class RoundPlan:
    allocation: Allocation
    breakdown: LatencyBreakdown
    passes: int

    @property
    def latency(self) -> float:
        return self.breakdown.round_total


class _RoundState:
    """Mutable working copy of one round's decision."""

    def __init__(self, model, sys, env, cut, rule):
        self.model, self.sys, self.env, self.rule = model, sys, env, rule
        self.downlink_rule = "even"
        # exact link solves keyed on their inputs; repeated passes re-ask often
        self._solved = {}
        self.cut = np.asarray(cut, dtype=np.int64)
        b, n_batches = sys.batch_size, sys.batches_per_round
        k = sys.num_clients
        self.client_time = (b * model.client_fp_flops[self.cut] + b * model.client_bp_flops[self.cut]) / (
            env.client_freq * sys.client_intensity)
        # server work per round in cycle-seconds, so latency is work / share
        self.server_work = n_batches * (b * model.server_fp_flops[self.cut]
                                        + b * model.server_bp_flops[self.cut]) / sys.server_intensity
        self.load = np.zeros((len(LINKS), k))
        self.load[MS_UP] = n_batches * b * model.smashed_bits[self.cut]
        self.load[MS_DOWN] = n_batches * b * model.gradient_bits[self.cut]
        self.load[ES_UP] = model.model_bits[self.cut]
        self.load[ES_DOWN] = model.model_bits[self.cut]
        self.shares = np.full(k, sys.server_freq / k)
        self.assign = np.stack([greedy_assignment(env.gain[j], self.load[j])
                                for j in range(len(LINKS))])
        self.power = np.zeros((len(LINKS), k))
        self.power[MS_UP] = sys.client_power_cap
        self.power[ES_UP] = sys.client_power_cap
        self.power[MS_DOWN] = sys.ms_power_cap / k
        self.power[ES_DOWN] = sys.es_power_cap / k

    def allocation(self) -> Allocation:
        return Allocation(self.cut.copy(), self.shares.copy(), self.assign.copy(),
                          self.power.copy())

    def link_terms(self, link) -> np.ndarray:
        rates = _kernels.client_rates(self.assign[link], self.power[link], self.env.gain[link],
                                      self.sys.subchannel_bandwidth, self.sys.noise_psd)
        return transfer_times(self.load[link], rates)

    def coupled_terms(self) -> dict:
        terms = {link: self.link_terms(link) for link in COUPLED_LINKS}
        terms["client"] = self.sys.batches_per_round * self.client_time
        terms["server"] = self.server_work / self.shares
        return terms

    def score(self) -> tuple[float, float]:
        """(round latency, uncapped bottleneck) for comparing candidate moves."""
        bd = per_round_latency(self.model, self.sys, self.allocation(), self.env, check=False)
        inner = self.sys.batches_per_round * bd.ms_total + bd.es_uplink
        finite = inner[np.isfinite(inner)]
        return bd.round_total, float(finite.max()) if finite.size else np.inf

    def link_problem(self, link, offset) -> LinkProblem:
        load = self.load[link].copy()
        offset = offset.copy()
        # clients already past the tolerance are capped whatever this link does
        lost = offset >= self.sys.straggler_tolerance
        load[lost] = 0.0
        offset[lost] = 0.0
        common = dict(gain=self.env.gain[link], load=load, offset=offset,
                      bandwidth=self.sys.subchannel_bandwidth, noise=self.sys.noise_psd,
                      downlink_rule=self.downlink_rule)
        if link in DOWNLINKS:
            cap = self.sys.ms_power_cap if link == MS_DOWN else self.sys.es_power_cap
            return LinkProblem(budget=cap, **common)
        return LinkProblem(power_cap=self.sys.client_power_cap, **common)

    def resolve_link(self, link, offset) -> None:
        key = (link, self.downlink_rule, offset.tobytes(), self.assign[link].tobytes(),
               self.power[link].tobytes() if link not in DOWNLINKS else b"")
        if key not in self._solved:
            self._solved[key] = self._solve_link(link, offset)
        hit = self._solved[key]
        if hit is not None:
            self.assign[link] = hit[0]
            self.power[link] = hit[1]

    def _solve_link(self, link, offset):
        sub = self.link_problem(link, offset)
        if self.rule.assign == "bnb":
            try:
                sol = solve_power(sub, init_assign=self.assign[link])
            except InfeasiblePowerError:
                return None
            return sol.assign, sol.power
        return self.assign[link].copy(), sub.evaluate(self.assign[link])[1]


def _better(new, old) -> bool:
    if new[0] < old[0] * (1 - IMPROVE_RTOL):
        return True
    return new[0] <= old[0] and new[1] < old[1] * (1 - IMPROVE_RTOL)


def _try(state: _RoundState, current, move) -> tuple[tuple, bool]:
    saved = (state.assign.copy(), state.power.copy(), state.shares.copy())
    move()
    new = state.score()
    if _better(new, current):
        return new, True
    state.assign, state.power, state.shares = saved
    return current, False


def _continuous(state: _RoundState, joint: bool = True) -> None:
    """Re-fit the server-side continuous variables to the current assignment.

    With ``joint`` the MS downlink powers move together with the shares;
    otherwise only the shares are re-fitted.
    """
    rule = state.rule
    if rule.freq != "lagrangian":
        return
    terms = state.coupled_terms()
    if joint and state.downlink_rule == "bisection":
        power = _joint_powers(state, terms)
        if power is not None:
            state.power[MS_DOWN] = power
            terms = state.coupled_terms()
    m = terms["client"] + terms[MS_UP] + terms[MS_DOWN] + terms[ES_UP]
    m = np.where(m >= state.sys.straggler_tolerance, np.inf, m)
    state.shares = solve_freq(FreqSubproblem(m, state.server_work, state.sys.server_freq)).shares


def _link_pass(state: _RoundState, current, refit: bool = False) -> tuple[tuple, bool]:
    """Re-solve each coupled link given the others; ``refit`` also re-fits
    the server variables before judging the move."""
    improved = False
    for link in COUPLED_LINKS:
        terms = state.coupled_terms()
        offset = terms["client"] + terms["server"]
        for other in COUPLED_LINKS:
            if other != link:
                offset = offset + terms[other]

        def move(link=link, offset=offset):
            state.resolve_link(link, offset)
            if refit:
                _continuous(state, joint=False)

        current, ok = _try(state, current, move)
        improved |= ok
    return current, improved


def _freq_step(state: _RoundState, current) -> tuple[tuple, bool]:
    terms = state.coupled_terms()
    m = terms["client"] + terms[MS_UP] + terms[MS_DOWN] + terms[ES_UP]
    m = np.where(m >= state.sys.straggler_tolerance, np.inf, m)
    sol = solve_freq(FreqSubproblem(m, state.server_work, state.sys.server_freq))

    def move():
        state.shares = sol.shares

    return _try(state, current, move)


def _joint_powers(state: _RoundState, terms) -> np.ndarray | None:
    """MS downlink powers of the joint (F, p) optimum for the current assignment."""
    sys, env = state.sys, state.env
    k_all = sys.num_clients
    a = terms["client"] + terms[MS_UP] + terms[ES_UP]
    w = state.load[MS_DOWN]
    assign = state.assign[MS_DOWN]
    cnt = np.array([(assign == k).sum() for k in range(k_all)], dtype=np.int64)
    active = (a < sys.straggler_tolerance) & ((w <= 0) | (cnt > 0))
    if not active.any():
        return None
    snr = np.zeros((k_all, max(1, sys.subchannel_count)))
    for k in range(k_all):
        owned = np.flatnonzero(assign == k)
        snr[k, : owned.size] = env.gain[MS_DOWN, owned, k] / sys.noise_psd
    idx = np.flatnonzero(active)
    a_act, n_act, w_act = a[idx], state.server_work[idx], w[idx]
    f_budget = sys.server_freq * (1 - FLOOR_SHARE * k_all)
    # even split over the active clients is always achievable
    p_even = np.where(w_act > 0, sys.ms_power_cap / max(1, int((w_act > 0).sum())), 0.0)
    rates = np.array([sys.subchannel_bandwidth * np.log2(1 + p_even[j] * snr[k, : cnt[k]]).sum()
                      for j, k in enumerate(idx)])
    down = transfer_times(w_act, rates)
    t_hi = float(np.max(a_act + n_act / (f_budget / idx.size) + down))
    p_out = np.zeros(idx.size)
    f_out = np.zeros(idx.size)
    t = _kernels.joint_split(a_act, n_act, w_act, snr[idx], cnt[idx],
                             float(sys.subchannel_bandwidth), f_budget,
                             float(sys.ms_power_cap), t_hi, p_out, f_out)
    if not np.isfinite(t):
        return None
    power = np.zeros(k_all)
    power[idx] = p_out
    total = power.sum()
    if total > 0:
        power *= sys.ms_power_cap / total
    return power


def _server_step(state: _RoundState, current) -> tuple[tuple, bool]:
    """Joint move of the frequency shares and the MS downlink powers."""
    current, ok = _try(state, current, lambda: _continuous(state))
    if ok:
        return current, ok
    return _freq_step(state, current)


def _settle(state: _RoundState, current, step) -> tuple[tuple, int]:
    """Alternate ``step`` (None for links only) with link passes until stuck."""
    passes = 0
    for _ in range(state.rule.max_passes):
        passes += 1
        improved = False
        if step is not None:
            current, improved = step(state, current)
        current, moved = _link_pass(state, current, refit=step is not None)
        if not (improved or moved):
            break
    return current, passes


def optimize_round(model: ModelProfile, sys: SystemProfile, env: EnvironmentSample,
                   cut, rule: RoundRule = OPT_RULE) -> RoundPlan:
    """Allocate one round for a fixed cut vector.

    Starts from an even frequency split, greedy subchannels, uplinks at cap
    and even downlink splits.  The ES downlink is solved on its own.  The
    coupled links are then settled in phases, each keeping only improving
    moves: links alone, then links with the frequency split, then (when the
    downlink power is optimised) links with the joint server-side move.
    """
    state = _RoundState(model, sys, env, cut, rule)
    state.downlink_rule = rule.downlink_power
    es = state.link_problem(ES_DOWN, np.zeros(sys.num_clients))
    if rule.assign == "bnb":
        try:
            sol = solve_power(es, init_assign=state.assign[ES_DOWN])
            state.assign[ES_DOWN], state.power[ES_DOWN] = sol.assign, sol.power
        except InfeasiblePowerError:
            pass
    else:
        state.power[ES_DOWN] = es.evaluate(state.assign[ES_DOWN])[1]

    state.downlink_rule = "even"
    current = state.score()
    current, passes = _settle(state, current, None)
    if rule.freq == "lagrangian":
        current, more = _settle(state, current, _freq_step)
        passes += more
    if rule.downlink_power == "bisection":
        state.downlink_rule = "bisection"
        step = _server_step if rule.freq == "lagrangian" else None
        current, more = _settle(state, current, step)
        passes += more
    alloc = state.allocation()
    return RoundPlan(alloc, per_round_latency(model, sys, alloc, env), passes)
