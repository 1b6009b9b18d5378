import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hsfl.latency import (
    aggregation_latencies, client_compute_latency, link_rate, per_round_latency,
    server_compute_latency, smashed_uplink_latency, transfer_times,
)
from hsfl.profiles import ES_DOWN, ES_UP, MS_DOWN, MS_UP, Allocation, FeasibilityError
from hsfl.verify import latency_suite, random_instance, scalar_round_latency

from conftest import make_alloc, make_env, make_sys, one_layer_model

seeds = st.integers(0, 2**32 - 1)


def test_client_compute_examples():
    model, sys = one_layer_model(fp=1e6), make_sys()
    env = make_env(2, 2, freq=2.56e9)
    assert client_compute_latency(model, sys, env, 0, 0) == 0.0
    assert client_compute_latency(model, sys, env, 0, 1) == pytest.approx(0.1, rel=1e-15)
    fast = make_env(2, 2, freq=5.12e9)
    assert client_compute_latency(model, sys, fast, 0, 1) == pytest.approx(0.05, rel=1e-15)


@pytest.mark.parametrize("snr, expected", [(1.0, 1e6), (3.0, 2e6)])
def test_link_rate_examples(snr, expected):
    sys = make_sys(k=1, n_chan=1)
    alloc = make_alloc(1, 1, power=snr)
    assert link_rate(sys, alloc, make_env(1, 1), MS_UP, 0) == pytest.approx(expected, rel=1e-15)


def test_link_rate_without_subchannels_is_zero():
    sys = make_sys(k=2, n_chan=2)
    alloc = make_alloc(2, 2, assign=np.zeros((4, 2), dtype=int))
    assert link_rate(sys, alloc, make_env(2, 2), MS_UP, 1) == 0.0


def test_smashed_uplink_examples():
    sys = make_sys(k=1, n_chan=1, subchannel_bandwidth=2.56e6)
    alloc = make_alloc(1, 1)
    env = make_env(1, 1)
    assert smashed_uplink_latency(one_layer_model(smashed=1e3), sys, alloc, env, 0) == \
        pytest.approx(0.1, rel=1e-15)
    assert smashed_uplink_latency(one_layer_model(smashed=0.0), sys, alloc, env, 0) == 0.0
    dead = make_env(1, 1, gain=0.0)
    assert smashed_uplink_latency(one_layer_model(), sys, alloc, dead, 0) == math.inf


def test_server_compute_examples():
    model, sys = one_layer_model(fp=1e6), make_sys()
    alloc = make_alloc(2, 2, cut=0, share=np.array([2.56e9, 5.12e9]))
    assert server_compute_latency(model, sys, alloc, 0) == pytest.approx(0.1, rel=1e-15)
    assert server_compute_latency(model, sys, alloc, 1) == pytest.approx(0.05, rel=1e-15)
    top = make_alloc(2, 2, cut=1)
    assert server_compute_latency(model, sys, top, 0) == 0.0


def test_aggregation_examples():
    model, sys = one_layer_model(params=1e6), make_sys(k=1, n_chan=1)
    env = make_env(1, 1)
    assert aggregation_latencies(model, sys, make_alloc(1, 1, cut=0), env, 0) == (0.0, 0.0)
    up, down = aggregation_latencies(model, sys, make_alloc(1, 1), env, 0)
    assert up == pytest.approx(1.0, rel=1e-15) and down == pytest.approx(1.0, rel=1e-15)
    alloc = make_alloc(1, 1)
    alloc.power[ES_UP] = 0.0
    up, down = aggregation_latencies(model, sys, alloc, env, 0)
    assert up == math.inf and math.isfinite(down)


def test_single_client_round_is_the_full_sum():
    model, sys = one_layer_model(), make_sys(k=1, n_chan=1, batches_per_round=3)
    alloc, env = make_alloc(1, 1), make_env(1, 1)
    bd = per_round_latency(model, sys, alloc, env)
    ms = bd.client_compute + bd.server_compute + bd.ms_uplink + bd.ms_downlink
    assert bd.round_total == pytest.approx(float(3 * ms[0] + bd.es_uplink[0] + bd.es_downlink[0]),
                                           rel=1e-15)
    assert not bd.stragglers.any()


def test_infinite_uplink_is_capped_at_tolerance():
    model, sys = one_layer_model(), make_sys(k=2, n_chan=2, straggler_tolerance=50.0)
    alloc, env = make_alloc(2, 2), make_env(2, 2)
    alloc.power[MS_UP, 1] = 0.0
    bd = per_round_latency(model, sys, alloc, env)
    assert bd.stragglers.tolist() == [False, True]
    assert bd.round_total == 50.0 + bd.es_downlink.max()


def test_identical_clients_give_either_value():
    model, sys = one_layer_model(), make_sys(k=2, n_chan=2)
    bd = per_round_latency(model, sys, make_alloc(2, 2), make_env(2, 2))
    assert bd.contribution[0] == bd.contribution[1]
    assert bd.round_total == bd.contribution[0] + bd.es_downlink[0]


def test_infeasible_allocation_raises():
    model, sys = one_layer_model(), make_sys()
    alloc = make_alloc(2, 2)
    alloc.power[MS_DOWN] = 80.0
    with pytest.raises(FeasibilityError, match="C5"):
        per_round_latency(model, sys, alloc, make_env(2, 2))


def test_transfer_times_sentinels():
    np.testing.assert_array_equal(transfer_times([0.0, 1.0, 2.0], [0.0, 0.0, 4.0]),
                                  [0.0, np.inf, 0.5])


def test_oracle_sample():
    assert all(r.passed for r in latency_suite(trials=150, seed=3))


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_matches_scalar_oracle(seed):
    model, sys, alloc, env = random_instance(np.random.default_rng(seed))
    bd = per_round_latency(model, sys, alloc, env)
    ref = scalar_round_latency(model, sys, alloc, env)
    if math.isfinite(ref["round_total"]):
        assert bd.round_total == pytest.approx(ref["round_total"], rel=1e-12)
    else:
        assert bd.round_total == ref["round_total"]


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_decomposition_and_cap(seed):
    model, sys, alloc, env = random_instance(np.random.default_rng(seed))
    bd = per_round_latency(model, sys, alloc, env)
    assert bd.recompute_total() == bd.round_total
    assert bd.round_total <= sys.straggler_tolerance + bd.es_downlink.max()


@settings(max_examples=60, deadline=None)
@given(seeds, st.floats(1.0, 10.0))
def test_more_share_or_power_never_hurts(seed, factor):
    rng = np.random.default_rng(seed)
    model, sys, alloc, env = random_instance(rng)
    base = per_round_latency(model, sys, alloc, env, check=False).round_total
    k = int(rng.integers(0, sys.num_clients))
    more_f = Allocation(alloc.cut, alloc.server_freq_share.copy(), alloc.subchannel_assign,
                        alloc.power.copy())
    more_f.server_freq_share[k] *= factor
    assert per_round_latency(model, sys, more_f, env, check=False).round_total <= base
    link = int(rng.integers(0, 4))
    more_p = Allocation(alloc.cut, alloc.server_freq_share, alloc.subchannel_assign,
                        alloc.power.copy())
    more_p.power[link, k] = more_p.power[link, k] * factor + 1e-3
    assert per_round_latency(model, sys, more_p, env, check=False).round_total <= base


def test_zero_client_tables_reduce_to_server_training():
    model, sys = one_layer_model(), make_sys()
    bd = per_round_latency(model, sys, make_alloc(2, 2, cut=0), make_env(2, 2))
    assert np.all(bd.client_compute == 0) and np.all(bd.es_uplink == 0)
    assert np.all(bd.es_downlink == 0)
