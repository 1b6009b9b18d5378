import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsfl.power import (
    InfeasiblePowerError, LinkProblem, enumerate_power, greedy_assignment, node_lower_bound,
    solve_power,
)
from hsfl.verify import power_suite, random_link_problem

seeds = st.integers(0, 2**32 - 1)


def uplink(gain, load, cap=2.0, offset=None):
    gain = np.asarray(gain, dtype=float)
    k = gain.shape[1]
    return LinkProblem(gain=gain, load=load, offset=np.zeros(k) if offset is None else offset,
                       bandwidth=1e6, noise=1e-3, power_cap=np.full(k, cap))


def downlink(gain, load, budget=10.0, rule="bisection"):
    gain = np.asarray(gain, dtype=float)
    return LinkProblem(gain=gain, load=load, offset=np.zeros(gain.shape[1]), bandwidth=1e6,
                       noise=1e-3, budget=budget, downlink_rule=rule)


def test_single_client_takes_everything_at_cap():
    sol = solve_power(uplink(np.ones((4, 1)), [1e6], cap=3.0))
    assert sol.assign.tolist() == [0, 0, 0, 0]
    assert sol.power.tolist() == [3.0]


def test_symmetric_downlink_splits_evenly():
    sol = solve_power(downlink(np.ones((2, 2)), [1e6, 1e6]))
    assert sorted(sol.assign.tolist()) == [0, 1]
    np.testing.assert_allclose(sol.power, [5.0, 5.0], rtol=1e-9)


@pytest.mark.parametrize("rule", ["bisection", "even"])
def test_asymmetric_matches_enumeration(rule):
    gain = np.array([[3.0, 0.5], [1.0, 2.0], [0.2, 0.9]])
    for sub in (uplink(gain, [2e6, 1e6]), downlink(gain, [2e6, 1e6], rule=rule)):
        assert solve_power(sub).objective == enumerate_power(sub).objective


def test_greedy_trace():
    assert greedy_assignment([[9, 1], [1, 4]]).tolist() == [0, 1]


def test_greedy_covers_every_loaded_client_first():
    # client 0 is best everywhere but client 1 still gets one subchannel
    assign = greedy_assignment([[9, 1], [8, 2], [7, 3]], load=[1, 1])
    assert set(assign.tolist()) == {0, 1}


def test_infeasible_instances():
    with pytest.raises(InfeasiblePowerError):
        solve_power(uplink(np.ones((1, 2)), [1.0, 1.0]))
    with pytest.raises(InfeasiblePowerError):
        solve_power(uplink(np.array([[1.0, 0.0], [1.0, 0.0]]), [1.0, 1.0]))


def test_zero_load_instances_finish_immediately():
    sol = solve_power(uplink(np.ones((8, 5)), np.zeros(5), offset=np.arange(5.0)))
    assert sol.objective == 4.0
    assert sol.nodes == 0


def test_trace_csv(tmp_path):
    sol = solve_power(downlink(np.random.default_rng(0).random((5, 3)), [1e6, 2e6, 3e6]))
    sol.write_trace(tmp_path / "trace.csv")
    text = (tmp_path / "trace.csv").read_text()
    assert text.startswith("kind,nodes,value") and "expanded" in text


def test_enumeration_guard():
    with pytest.raises(ValueError):
        enumerate_power(uplink(np.ones((20, 2)), [1.0, 1.0]))


def test_oracle_suite_sample():
    assert all(r.passed for r in power_suite(trials=30, seed=11))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_bnb_equals_enumeration_and_is_feasible(seed):
    sub = random_link_problem(np.random.default_rng(seed))
    got, ref = solve_power(sub), enumerate_power(sub)
    assert got.objective == pytest.approx(ref.objective, rel=1e-12)
    if sub.is_uplink:
        assert np.all(got.power <= sub.power_cap)
    else:
        assert got.power.sum() <= sub.budget * (1 + 1e-9)


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_lower_bound_audit(seed):
    """Bounds at arbitrary partial assignments never exceed the best completion."""
    rng = np.random.default_rng(seed)
    sub = random_link_problem(rng)
    k, n = sub.num_clients, sub.subchannel_count
    partial = rng.integers(0, k, n)
    free = rng.random(n) < 0.5
    partial[free] = -1
    bound = node_lower_bound(sub, partial)
    best = np.inf
    for fill in itertools.product(range(k), repeat=int(free.sum())):
        full = partial.copy()
        full[free] = fill
        best = min(best, sub.evaluate(full)[0])
    assert bound <= best * (1 + 1e-12)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(1.0, 10.0))
def test_monotone_in_resources(seed, factor):
    rng = np.random.default_rng(seed)
    sub = random_link_problem(rng)
    base = solve_power(sub).objective
    common = dict(load=sub.load, offset=sub.offset, bandwidth=sub.bandwidth, noise=sub.noise,
                  downlink_rule=sub.downlink_rule)
    if sub.is_uplink:
        caps = dict(power_cap=sub.power_cap * factor)
        same = dict(power_cap=sub.power_cap)
    else:
        caps = dict(budget=sub.budget * factor)
        same = dict(budget=sub.budget)
    tol = 1 + 1e-9
    assert solve_power(LinkProblem(gain=sub.gain, **common, **caps)).objective <= base * tol
    assert solve_power(LinkProblem(gain=sub.gain * factor, **common, **same)).objective <= base * tol
    extra = np.vstack([sub.gain, rng.random((1, sub.num_clients))])
    if sub.num_clients ** extra.shape[0] <= 100_000:
        assert solve_power(LinkProblem(gain=extra, **common, **same)).objective <= base * tol
