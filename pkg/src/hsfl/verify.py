"""Oracle and property suites behind ``hsfl verify`` and the acceptance tests.

Each suite compares a production routine with an independent oracle
(straight-line scalar code, exhaustive search, finite differences) and
returns :class:`CheckResult` records.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import splitnn as nn
from .channel import sample_batch
from .config import build_scenario, load_config
from .cutlayer import FitnessCache, GAConfig, cut_bounds, enumerate_cuts, optimize_cuts
from .experiments import policy_means, run_experiment, sorted_rows
from .freq import FreqSubproblem, brute_force_freq, solve_freq
from .latency import per_round_latency
from .power import LinkProblem, enumerate_power, solve_power
from .profiles import (
    ES_DOWN, ES_UP, LINKS, MS_DOWN, MS_UP, Allocation, EnvironmentSample, ModelProfile,
    SystemProfile,
)
from .protocol import build_aggregation_plan

BASELINES = ("RCLS", "SCLS", "ECFA", "GTRA", "ETRA")

SYNTHETIC_MODEL = {
    "fp_flops": [1e7, 2e7, 4e7, 8e7, 1e7],
    "activation_bits": [24576, 32768, 16384, 8192, 2048, 320],
    "param_bits": [2e5, 1e6, 4e6, 1.6e7, 2e5],
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f} s)"


def _timed(name, fn):
    start = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - start)


def small_scenario(k=3, subchannels=6, level=0.5, max_cut=3, tolerance=300.0, path_loss=1e-4):
    """The synthetic profile on a small system, for the solver suites."""
    params = {
        "model": dict(SYNTHETIC_MODEL),
        "system": dict(num_clients=k, batch_size=256, batches_per_round=5, total_rounds=20,
                       server_freq=100e10, subchannel_count=subchannels,
                       total_bandwidth=10e6, noise_psd=1e-3, client_power_cap=5.5,
                       ms_power_cap=100.0, es_power_cap=100.0,
                       straggler_tolerance=tolerance, max_cut=max_cut, dataset_size=100),
        "environment": dict(freq_mean=5e10, freq_sd_ratio=0.2, path_loss=path_loss),
    }
    return build_scenario(params, level)


# latency model

def _scalar_rate(bw, noise, assign_row, gain, power, k):
    rate = 0.0
    for i in range(len(assign_row)):
        if assign_row[i] == k:
            rate += bw * math.log2(1.0 + power * gain[i][k] / noise)
    return rate


def _scalar_time(load, rate):
    if load <= 0.0:
        return 0.0
    return math.inf if rate <= 0.0 else load / rate


def scalar_round_latency(model: ModelProfile, sys: SystemProfile, alloc: Allocation,
                         env: EnvironmentSample) -> dict:
    """Straight-line recomputation of every per-client term and the total."""
    out = {name: [] for name in ("client_compute", "server_compute", "ms_uplink",
                                 "ms_downlink", "es_uplink", "es_downlink", "contribution")}
    b = float(sys.batch_size)
    bw, noise = float(sys.subchannel_bandwidth), float(sys.noise_psd)
    assign = alloc.subchannel_assign.tolist()
    gain = env.gain.tolist()
    for k in range(sys.num_clients):
        l = int(alloc.cut[k])
        tc = (b * float(model.client_fp_flops[l]) + b * float(model.client_bp_flops[l])) / (
            float(env.client_freq[k]) * float(sys.client_intensity[k]))
        ts = (b * float(model.server_fp_flops[l]) + b * float(model.server_bp_flops[l])) / (
            float(alloc.server_freq_share[k]) * float(sys.server_intensity))
        times = {}
        for link, load in ((MS_UP, b * float(model.smashed_bits[l])),
                           (MS_DOWN, b * float(model.gradient_bits[l])),
                           (ES_UP, float(model.model_bits[l])),
                           (ES_DOWN, float(model.model_bits[l]))):
            rate = _scalar_rate(bw, noise, assign[link], gain[link],
                                float(alloc.power[link][k]), k)
            times[link] = _scalar_time(load, rate)
        ms = tc + ts + times[MS_UP] + times[MS_DOWN]
        out["client_compute"].append(tc)
        out["server_compute"].append(ts)
        out["ms_uplink"].append(times[MS_UP])
        out["ms_downlink"].append(times[MS_DOWN])
        out["es_uplink"].append(times[ES_UP])
        out["es_downlink"].append(times[ES_DOWN])
        out["contribution"].append(min(sys.batches_per_round * ms + times[ES_UP],
                                       sys.straggler_tolerance))
    out["round_total"] = max(out["contribution"]) + max(out["es_downlink"])
    return out


def random_instance(rng):
    """A random feasible (model, sys, alloc, env) with some dead links."""
    n_layers = int(rng.integers(1, 7))
    model = ModelProfile.from_layers(rng.uniform(1e5, 1e8, n_layers),
                                     rng.uniform(1e2, 1e5, n_layers + 1),
                                     rng.uniform(1e4, 1e7, n_layers),
                                     bp_ratio=float(rng.uniform(1, 3)))
    k = int(rng.integers(1, 6))
    n_chan = int(rng.integers(1, 9))
    cap = rng.uniform(0.5, 10, k)
    sys = SystemProfile(
        num_clients=k, batch_size=int(rng.integers(1, 512)),
        batches_per_round=int(rng.integers(1, 10)), total_rounds=10,
        server_freq=float(rng.uniform(1e10, 1e12)), server_intensity=float(rng.uniform(0.5, 4)),
        client_intensity=rng.uniform(0.5, 4, k), subchannel_count=n_chan,
        subchannel_bandwidth=float(rng.uniform(1e5, 5e6)), noise_psd=float(rng.uniform(1e-4, 1e-2)),
        client_power_cap=cap, ms_power_cap=100.0, es_power_cap=100.0,
        straggler_tolerance=float(rng.uniform(1, 100)),
        max_cut=rng.integers(0, n_layers + 1, k), dataset_size=1)
    cut = rng.integers(0, sys.max_cut + 1)
    share = rng.dirichlet(np.ones(k)) * sys.server_freq
    assign = rng.integers(-1, k, size=(len(LINKS), n_chan))
    power = np.zeros((len(LINKS), k))
    for link in (MS_UP, ES_UP):
        power[link] = rng.uniform(0, 1, k) * cap
    for link in (MS_DOWN, ES_DOWN):
        power[link] = rng.dirichlet(np.ones(k)) * 100.0 * rng.uniform(0.5, 1)
    gain = rng.exponential(1e-2, size=(len(LINKS), n_chan, k))
    gain[rng.random(gain.shape) < 0.1] = 0.0
    env = EnvironmentSample(rng.uniform(1e9, 1e11, k), gain)
    return model, sys, Allocation(cut, share, assign, power), env


def _rel_close(a, b, rtol):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    same_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    with np.errstate(invalid="ignore"):
        err = np.abs(a - b) / np.maximum(np.abs(b), np.finfo(float).tiny)
    return bool(np.all(same_inf | (err <= rtol)))


def latency_suite(trials: int = 1000, seed: int = 0, rtol: float = 1e-12) -> list[CheckResult]:
    rng = np.random.default_rng(seed)

    def oracle():
        bad = 0
        for _ in range(trials):
            model, sys, alloc, env = random_instance(rng)
            bd = per_round_latency(model, sys, alloc, env)
            ref = scalar_round_latency(model, sys, alloc, env)
            ok = all(_rel_close(getattr(bd, name), ref[name], rtol) for name in ref
                     if name != "round_total")
            bad += not (ok and _rel_close(bd.round_total, ref["round_total"], rtol))
        return bad == 0, f"{trials - bad}/{trials} instances within {rtol:g} relative"

    def sentinels():
        k = 3
        model = ModelProfile.from_layers([1e6], [1e3, 1e3], [1e5])
        sys = small_scenario(k=k, subchannels=4, max_cut=1, tolerance=10.0).sys
        # client 0 owns subchannel 0 on every link; clients 1 and 2 own nothing
        assign = np.full((4, sys.subchannel_count), -1)
        assign[:, 0] = 0
        power = np.ones((4, k))
        power[[MS_DOWN, ES_DOWN]] = 100.0 / (2 * k)
        alloc = Allocation(np.ones(k, dtype=np.int64), np.full(k, sys.server_freq / k),
                           assign, power)
        gain = np.ones((4, sys.subchannel_count, k))
        env = EnvironmentSample(np.full(k, 1e10), gain)
        bd = per_round_latency(model, sys, alloc, env)
        checks = [
            # a dead link with data to send is infinite and hits the cap
            np.isinf(bd.ms_uplink[1]) and bd.stragglers[1]
            and bd.contribution[1] == sys.straggler_tolerance,
            np.isfinite(bd.ms_uplink[0]) and not bd.stragglers[0],
        ]
        # nothing to send costs nothing, even on a dead link
        cut0 = Allocation(np.zeros(k, dtype=np.int64), alloc.server_freq_share,
                          np.full_like(assign, -1), power)
        bd0 = per_round_latency(model, sys, cut0, env)
        checks.append(np.all(bd0.es_uplink == 0) and np.all(bd0.es_downlink == 0))
        # a crawling client is held exactly at the tolerance
        slow = EnvironmentSample(np.array([1e-3, 1e10, 1e10]), gain)
        bds = per_round_latency(model, sys, alloc, slow)
        checks.append(bds.stragglers[0] and bds.contribution[0] == sys.straggler_tolerance
                      and np.all(bds.contribution <= sys.straggler_tolerance))
        return all(checks), f"{sum(map(bool, checks))}/{len(checks)} sentinel checks"

    return [_timed("latency oracle", oracle), _timed("latency sentinels", sentinels)]


# frequency allocator

def freq_suite(trials: int = 200, seed: int = 0, gap: float = 1e-2,
               sym_rtol: float = 1e-6) -> list[CheckResult]:
    rng = np.random.default_rng(seed)

    def grid():
        worst, bad = -np.inf, 0
        for t in range(trials):
            k = (2, 3, 4)[t % 3]
            sub = FreqSubproblem(rng.uniform(0, 5, k), rng.uniform(0.1, 10, k) * 1e12,
                                 float(rng.uniform(1e11, 1e13)))
            sol = solve_freq(sub)
            _, ref = brute_force_freq(sub, grid={2: 200, 3: 120, 4: 40}[k], refine=3)
            rel = (sol.objective - ref) / ref
            worst = max(worst, rel)
            bad += rel > gap
        return bad == 0, f"worst relative gap {worst:.2e} over {trials} instances"

    def symmetric():
        worst = 0.0
        for _ in range(trials // 4 or 1):
            k = int(rng.integers(2, 9))
            sub = FreqSubproblem(np.full(k, rng.uniform(0, 5)), np.full(k, rng.uniform(0.1, 10) * 1e12),
                                 float(rng.uniform(1e11, 1e13)))
            shares = solve_freq(sub).shares
            worst = max(worst, float(np.ptp(shares) / shares.mean()))
        return worst <= sym_rtol, f"largest share spread {worst:.1e} relative"

    return [_timed("frequency vs grid", grid), _timed("frequency symmetry", symmetric)]


# power allocator

def random_link_problem(rng) -> LinkProblem:
    k = int(rng.integers(2, 5))
    i_max = int(math.floor(math.log(1e5) / math.log(k) + 1e-9))
    n_chan = int(rng.integers(k, min(i_max, 8) + 1))
    gain = rng.exponential(1.0, (n_chan, k)) * 1e-2
    load = rng.uniform(1e5, 1e7, k)
    load[rng.random(k) < 0.15] = 0.0
    offset = rng.uniform(0, 2, k)
    common = dict(gain=gain, load=load, offset=offset, bandwidth=1e6, noise=1e-3)
    kind = rng.integers(0, 3)
    if kind == 0:
        return LinkProblem(power_cap=rng.uniform(1, 10, k), **common)
    rule = "bisection" if kind == 1 else "even"
    return LinkProblem(budget=100.0, downlink_rule=rule, **common)


def power_suite(trials: int = 200, seed: int = 0, rtol: float = 1e-12) -> list[CheckResult]:
    rng = np.random.default_rng(seed)

    def oracle():
        mismatch, ties = 0, 0
        for _ in range(trials):
            sub = random_link_problem(rng)
            got, ref = solve_power(sub), enumerate_power(sub)
            same = abs(got.objective - ref.objective) <= rtol * abs(ref.objective)
            replay, _ = sub.evaluate(got.assign)
            tie = abs(replay - ref.objective) <= rtol * abs(ref.objective)
            mismatch += not same
            ties += not tie
        ok = mismatch == 0 and ties == 0
        return ok, (f"{trials - mismatch}/{trials} objectives equal, "
                    f"{trials - ties}/{trials} assignments tie-equivalent")

    return [_timed("power vs enumeration", oracle)]


# cut-layer GA

def ga_suite(trials: int = 100, samples: int = 3, required: float = 0.95,
             scenario_seed: int = 7) -> list[CheckResult]:
    def oracle():
        scen = small_scenario(k=3, subchannels=6, max_cut=3)
        draws = sample_batch(scen.stats, scenario_seed, samples)
        cache = FitnessCache(draws, scen.model, scen.sys)
        upper = cut_bounds(scen.model, scen.sys)
        best_cut, best = enumerate_cuts(cache, upper)
        hits = 0
        for seed in range(trials):
            res = optimize_cuts(GAConfig(seed=seed, saa_samples=samples), scen.stats,
                                scen.model, scen.sys, cache=cache)
            hits += res.latency <= best
        rate = hits / trials
        return rate >= required, (f"optimum {best_cut.tolist()} found in {hits}/{trials} "
                                  f"runs over {int(np.prod(upper + 1))} candidates")

    return [_timed("GA vs enumeration", oracle)]


# toy split network

def split_suite(steps: int = 10, seed: int = 0, rtol: float = 1e-10,
                fd_rtol: float = 1e-5) -> list[CheckResult]:
    def equivalence():
        rng = np.random.default_rng(seed)
        base = nn.LayeredModel.init([6, 8, 7, 5, 3], ["tanh", "relu", "tanh", "identity"], seed)
        x = rng.standard_normal((64, 6))
        y = rng.integers(0, 3, 64)
        batches = [rng.choice(64, 16, replace=False) for _ in range(steps)]
        ref = base.copy()
        for idx in batches:
            nn.unsplit_step(ref, x[idx], y[idx], 0.05)
        worst = 0.0
        for cut in range(base.num_layers + 1):
            state = nn.SplitState.from_model(base, cut, 0.05)
            for idx in batches:
                nn.split_step(state, x[idx], y[idx])
            a, b = state.merged().to_vector(), ref.to_vector()
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))))
        return worst <= rtol, f"largest relative parameter gap {worst:.1e} over all cuts"

    def finite_difference():
        rng = np.random.default_rng(seed + 1)
        model = nn.LayeredModel.init([4, 6, 5, 3], ["tanh", "tanh", "identity"], seed + 1)
        x = rng.standard_normal((10, 4))
        y = rng.integers(0, 3, 10)
        grad = nn.loss_gradient(model, x, y)
        vec = model.to_vector()
        picks = rng.choice(vec.size, 20, replace=False)
        h, worst = 1e-5, 0.0
        for p in picks:
            up, down = vec.copy(), vec.copy()
            up[p] += h
            down[p] -= h
            fd = (nn.evaluate(model.from_vector(up), x, y)[0]
                  - nn.evaluate(model.from_vector(down), x, y)[0]) / (2 * h)
            # floor keeps the ratio meaningful for near-zero gradients
            worst = max(worst, abs(fd - grad[p]) / max(abs(fd), abs(grad[p]), 1e-6))
        return worst <= fd_rtol, f"largest relative gradient error {worst:.1e} on 20 parameters"

    return [_timed("split/unsplit equivalence", equivalence),
            _timed("finite-difference gradient", finite_difference)]


def aggregation_suite(trials: int = 20, seed: int = 0) -> list[CheckResult]:
    def consistency():
        rng = np.random.default_rng(seed)
        exact, differs = 0, 0
        for t in range(trials):
            k = int(rng.integers(2, 5))
            cuts = rng.integers(0, 5, k)
            while cuts.min() == cuts.max():
                cuts = rng.integers(0, 5, k)
            plan = build_aggregation_plan(cuts, 4, rng.integers(1, 100, k))
            states = [nn.SplitState.from_model(nn.LayeredModel.init([3, 4, 4, 4, 2], seed=1000 * t + j),
                                               int(c), 0.1) for j, c in enumerate(cuts)]
            es, ms = nn.aggregate_copies(states, plan)
            exact += all(np.array_equal(es[j].weight, ms[j].weight)
                         and np.array_equal(es[j].bias, ms[j].bias) for j in plan.common)
            nn.federated_aggregate(states, plan)
            es_x, ms_x = nn.aggregate_copies(states, plan, exchange=False)
            differs += any(not np.array_equal(es_x[j].weight, ms_x[j].weight) for j in plan.common)
        ok = exact == trials and differs == trials
        return ok, (f"copies equal in {exact}/{trials}, no-exchange copies differ "
                    f"in {differs}/{trials}")

    return [_timed("common-layer aggregation", consistency)]


def convergence_suite(seeds: int = 20, rounds: int = 50, local_steps: int = 2, lr: float = 0.5,
                      alpha: float = 0.5, loss_rtol: float = 0.10,
                      monotone_share: float = 0.95) -> list[CheckResult]:
    def run():
        monotone, close, worst = 0, 0, 0.0
        for s in range(seeds):
            x, y = nn.make_separable(300, 2, 1.0, seed=s)
            parts = nn.dirichlet_partition(y, 3, alpha, seed=s)
            data = [(x[p], y[p]) for p in parts]
            model = nn.LayeredModel.init([2, 8, 8, 2], seed=s)
            _, curve = nn.train_hsfl(model, data, [0, 1, 2], lr, rounds, local_steps)
            _, ref = nn.train_centralized(model, x, y, lr, rounds * local_steps)
            losses = np.array([c[1] for c in curve])
            monotone += bool(np.all(np.diff(losses) <= 0))
            gap = abs(losses[-1] - ref[-1][1]) / ref[-1][1]
            worst = max(worst, gap)
            close += gap <= loss_rtol
        ok = monotone >= monotone_share * seeds and close == seeds
        return ok, (f"monotone in {monotone}/{seeds} seeds, final loss within "
                    f"{loss_rtol:.0%} of centralized in {close}/{seeds} (worst {worst:.1%})")

    return [_timed("toy convergence", run)]


# desk-scale shape checks

def shape_suite(config_path, seeds=None, log=None) -> list[CheckResult]:
    """OPT against each baseline on every seed, sweep monotonicity on seed
    means, and the OPT advantage at the highest vs lowest heterogeneity."""
    cfg = load_config(config_path)
    start = time.perf_counter()
    results = run_experiment(cfg, seeds=seeds, log=log)
    rows = sorted_rows(results)
    elapsed = time.perf_counter() - start
    out = []

    base = [r for r in rows if r.axis == "base"]
    losses = []
    for row in base:
        if row.policy == "OPT":
            continue
        opt = next(r for r in base if r.policy == "OPT" and r.seed == row.seed)
        if not opt.mean_round_latency <= row.mean_round_latency:
            losses.append(f"{row.policy}@seed{row.seed}")
    out.append(CheckResult("OPT <= every baseline on every seed", not losses,
                           "no losses" if not losses else "beaten: " + ", ".join(losses), elapsed))

    direction = {"bandwidth": -1, "server_freq": -1, "server_power": -1, "heterogeneity": 1}
    bad = []
    for axis, sign in direction.items():
        means = policy_means(rows, axis).get("OPT")
        if not means:
            continue
        vals = [means[v] for v in sorted(means)]
        steps = np.diff(vals) * sign
        if np.any(steps < 0):
            bad.append(f"{axis} {[round(v, 4) for v in vals]}")
    out.append(CheckResult("sweep monotonicity", not bad,
                           "all axes monotone" if not bad else "; ".join(bad), 0.0))

    means = policy_means(rows, "heterogeneity")
    if "OPT" in means and len(means["OPT"]) >= 2:
        lo, hi = min(means["OPT"]), max(means["OPT"])
        narrow = [p for p in means if p != "OPT"
                  and not means[p][hi] - means["OPT"][hi] > means[p][lo] - means["OPT"][lo]]
        detail = ", ".join(f"{p} {means[p][lo] - means['OPT'][lo]:.3f}->"
                           f"{means[p][hi] - means['OPT'][hi]:.3f}" for p in means if p != "OPT")
        out.append(CheckResult("advantage widens with heterogeneity", not narrow, detail, 0.0))
    return out


SUITES = {
    "latency": latency_suite,
    "frequency": freq_suite,
    "power": power_suite,
    "ga": ga_suite,
    "split": split_suite,
    "aggregation": aggregation_suite,
    "convergence": convergence_suite,
}


def run_all(config_path=None, log=None) -> list[CheckResult]:
    """Every suite; the shape checks run only when a config is given."""
    results = []
    for name, suite in SUITES.items():
        for res in suite():
            results.append(res)
            if log is not None:
                log(res.line())
    if config_path is not None:
        for res in shape_suite(config_path):
            results.append(res)
            if log is not None:
                log(res.line())
    return results
