import numpy as np
import pytest

from hsfl.channel import sample
from hsfl.policies import POLICY_NAMES, baseline_policy
from hsfl.profiles import MS_DOWN, MS_UP
from hsfl.power import greedy_assignment
from hsfl.verify import small_scenario


def test_lookup_is_case_insensitive_and_strict():
    assert baseline_policy("ecfa").name == "ECFA"
    assert [baseline_policy(n).name for n in POLICY_NAMES] == list(POLICY_NAMES)
    with pytest.raises(ValueError, match="unknown policy"):
        baseline_policy("FAST")


def test_ecfa_even_shares():
    scen = small_scenario(k=4, subchannels=6)
    sys = scen.sys.replace(server_freq=100.0)
    plan = baseline_policy("ECFA").allocate(scen.model, sys, sample(scen.stats, 0), [0, 1, 2, 3])
    np.testing.assert_array_equal(plan.allocation.server_freq_share, [25.0] * 4)


def test_scls_takes_the_smallest_maximum():
    scen = small_scenario(k=3, max_cut=[2, 5, 3])
    assert baseline_policy("SCLS").choose_cuts(scen.model, scen.sys).tolist() == [2, 2, 2]


def test_rcls_is_seeded_and_feasible():
    scen = small_scenario(k=5, subchannels=6, max_cut=[0, 1, 2, 3, 4])
    draws = {tuple(baseline_policy("RCLS").choose_cuts(scen.model, scen.sys, rng=s))
             for s in range(30)}
    assert len(draws) > 1
    for cut in draws:
        assert all(0 <= c <= m for c, m in zip(cut, [0, 1, 2, 3, 4]))
    a = baseline_policy("RCLS").choose_cuts(scen.model, scen.sys, rng=9)
    assert a.tolist() == baseline_policy("RCLS").choose_cuts(scen.model, scen.sys, rng=9).tolist()


def test_gtra_uses_greedy_assignment():
    scen = small_scenario(k=3, subchannels=5)
    env = sample(scen.stats, 2)
    plan = baseline_policy("GTRA").allocate(scen.model, scen.sys, env, [1, 2, 3])
    for link in (MS_UP, MS_DOWN):
        assert plan.allocation.subchannel_assign[link].tolist() == \
            greedy_assignment(env.gain[link]).tolist()


def test_ga_policies_need_the_cut():
    scen = small_scenario()
    with pytest.raises(ValueError):
        baseline_policy("OPT").choose_cuts(scen.model, scen.sys)
    assert baseline_policy("ETRA").choose_cuts(scen.model, scen.sys,
                                               optimized_cut=[1, 2, 3]).tolist() == [1, 2, 3]
