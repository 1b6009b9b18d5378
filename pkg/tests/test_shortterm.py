import numpy as np
import pytest

from hsfl.channel import sample_batch
from hsfl.profiles import MS_DOWN, check_allocation
from hsfl.shortterm import OPT_RULE, RoundRule, optimize_round


@pytest.fixture(scope="module")
def envs(scenario):
    return sample_batch(scenario.stats, 3, 6)


def test_rule_validation():
    with pytest.raises(ValueError):
        RoundRule(freq="fast")
    with pytest.raises(ValueError):
        RoundRule(assign="random")


def test_plans_are_feasible_and_consistent(scenario, envs):
    cut = np.array([0, 1, 3])
    for env in envs:
        plan = optimize_round(scenario.model, scenario.sys, env, cut)
        check_allocation(plan.allocation, scenario.model, scenario.sys)
        assert plan.breakdown.recompute_total() == plan.latency
        assert plan.allocation.cut.tolist() == cut.tolist()


def test_deterministic(scenario, envs):
    a = optimize_round(scenario.model, scenario.sys, envs[0], [1, 2, 3])
    b = optimize_round(scenario.model, scenario.sys, envs[0], [1, 2, 3])
    assert a.latency == b.latency
    np.testing.assert_array_equal(a.allocation.power, b.allocation.power)


def test_even_downlink_never_beats_the_full_solver(scenario, envs):
    etra = RoundRule(downlink_power="even")
    for env in envs:
        for cut in ([0, 0, 0], [0, 2, 3], [3, 3, 3]):
            opt = optimize_round(scenario.model, scenario.sys, env, cut).latency
            assert opt <= optimize_round(scenario.model, scenario.sys, env, cut, etra).latency


def test_ablations_respect_their_rule(scenario, envs):
    env, k = envs[0], scenario.sys.num_clients
    ecfa = optimize_round(scenario.model, scenario.sys, env, [1, 2, 3], RoundRule(freq="even"))
    np.testing.assert_array_equal(ecfa.allocation.server_freq_share,
                                  np.full(k, scenario.sys.server_freq / k))
    etra = optimize_round(scenario.model, scenario.sys, env, [1, 2, 3],
                          RoundRule(downlink_power="even"))
    np.testing.assert_allclose(etra.allocation.power[MS_DOWN], scenario.sys.ms_power_cap / k)


def test_full_solver_beats_its_starting_point(scenario, envs):
    greedy_even = RoundRule(freq="even", assign="greedy", downlink_power="even")
    for env in envs:
        assert optimize_round(scenario.model, scenario.sys, env, [0, 1, 2], OPT_RULE).latency <= \
            optimize_round(scenario.model, scenario.sys, env, [0, 1, 2], greedy_even).latency
